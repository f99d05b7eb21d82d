"""Variance-exploding noise schedules and their warped discretization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    """VE schedule: x at noise level sigma is x0 + sigma * eps."""

    sigma_min: float = 0.002
    sigma_max: float = 80.0
    num_steps: int = 100
    rho: float = 7.0
    kind: str = "variance-exploding"

    def __post_init__(self):
        if not (0 < self.sigma_min < self.sigma_max):
            raise ValueError("need 0 < sigma_min < sigma_max")
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if self.kind != "variance-exploding":
            raise ValueError(f"unsupported schedule kind {self.kind!r}")

    def with_steps(self, num_steps: int) -> "NoiseSchedule":
        return NoiseSchedule(self.sigma_min, self.sigma_max, num_steps, self.rho)


def discretize_schedule(sched: NoiseSchedule) -> np.ndarray:
    """Decreasing sigma grid with power-law warp; endpoints hit exactly."""
    n, rho = sched.num_steps, sched.rho
    if n == 1:
        return np.array([sched.sigma_max])
    i = np.arange(n)
    lo = sched.sigma_min ** (1.0 / rho)
    hi = sched.sigma_max ** (1.0 / rho)
    sigmas = (hi + i / (n - 1) * (lo - hi)) ** rho
    sigmas[0] = sched.sigma_max
    sigmas[-1] = sched.sigma_min
    return sigmas
