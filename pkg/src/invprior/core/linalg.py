"""Dense linear algebra: SVD factors with validated invariants.

The decomposition itself is delegated to LAPACK through numpy; the wrapper
enforces the feasibility bound, the nonincreasing singular-value order and
the reconstruction contract that downstream spectral-domain solvers rely
on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CapacityError

MAX_DENSE_ENTRIES = 10**7


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD A = U diag(s) V^H with s nonincreasing and nonnegative."""

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray  # columns are right singular vectors

    def __post_init__(self):
        s = np.asarray(self.singular_values, dtype=np.float64)
        if np.any(s < 0) or np.any(np.diff(s) > 0):
            raise ValueError("singular values must be nonnegative and nonincreasing")
        object.__setattr__(self, "singular_values", s)

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.singular_values) @ self.V.conj().T

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (self.U * self.singular_values) @ (self.V.conj().T @ x)

    def pinv_apply(self, y: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
        s = self.singular_values
        cutoff = rcond * (s[0] if s.size else 0.0)
        inv = np.where(s > cutoff, 1.0 / np.where(s > 0, s, 1.0), 0.0)
        return self.V @ (inv * (self.U.conj().T @ y))


def svd(a: np.ndarray, max_entries: int | None = None) -> SvdFactors:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError("svd expects a 2-D matrix")
    bound = MAX_DENSE_ENTRIES if max_entries is None else int(max_entries)
    if a.size > bound:
        raise CapacityError(f"dense SVD limited to {bound} entries, got {a.size}")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return SvdFactors(U=u, singular_values=s, V=vh.conj().T)
