from .accuracy import (
    blur_psnr,
    measurement_rel_error,
    psnr,
    rel_l2,
    shift_aligned_psnr,
    ssim,
)
from .ranking import chi_tilde, ranking_score
from .report import MetricReport

__all__ = [
    "psnr",
    "ssim",
    "blur_psnr",
    "rel_l2",
    "measurement_rel_error",
    "shift_aligned_psnr",
    "chi_tilde",
    "ranking_score",
    "MetricReport",
]
