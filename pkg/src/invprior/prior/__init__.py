from .sampling import sample_unconditional, sample_unconditional_field
from .schedule import NoiseSchedule, discretize_schedule
from .score import (
    Denoised,
    GaussianPrior,
    MixturePrior,
    ScorePrior,
    grf_prior,
    prior_from_config,
)

__all__ = [
    "Denoised",
    "GaussianPrior",
    "MixturePrior",
    "NoiseSchedule",
    "ScorePrior",
    "discretize_schedule",
    "grf_prior",
    "prior_from_config",
    "sample_unconditional",
    "sample_unconditional_field",
]
