"""Per-case metric bundle serialized as one JSON object."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..instrument import COUNTER_FIELDS


@dataclass
class MetricReport:
    """Every accuracy number computed for a single reconstruction, plus
    the run's efficiency counters.  Fields that make no sense for the
    problem at hand stay ``None`` (e.g. closure chi-squares outside the
    interferometric problem)."""

    psnr: float | None = None
    ssim: float | None = None
    blur_psnr: float | None = None
    shift_psnr: float | None = None
    rel_l2: float | None = None
    meas_err: float | None = None
    chi2_cp: float | None = None
    chi2_logca: float | None = None
    chi_tilde_cp: float | None = None
    chi_tilde_logca: float | None = None
    counters: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in COUNTER_FIELDS:
            if name in self.counters:
                bad = self.counters[name] < 0
                if bad:
                    raise ValueError(f"counter {name} negative")
        for name in ("chi_tilde_cp", "chi_tilde_logca"):
            v = getattr(self, name)
            if v is not None and v < 1.0:
                raise ValueError(f"{name} below 1: {v}")

    def metric_dict(self) -> dict:
        out = asdict(self)
        out.pop("counters")
        return {k: v for k, v in out.items() if v is not None}

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, data: dict) -> "MetricReport":
        return cls(**data)
