"""Forward-model interface shared by all physics operators.

Solver-facing convention: the unknown is a flat real vector (complex
sources travel as stacked real/imaginary channels), the observation is a
flat real vector, and ``misfit`` is the problem's data-fidelity term —
0.5*||G(z) - y||^2 for Gaussian-noise problems, the normalized chi-square
sum for the interferometric one.  Capability flags say which structural
handles exist; posterior samplers are gated on them before any physics
runs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.linalg import SvdFactors


@dataclass(frozen=True)
class Capability:
    is_linear: bool = False
    has_svd: bool = False
    has_pseudo_inverse: bool = False
    has_gradient: bool = False

    def __post_init__(self):
        if self.has_svd and not self.has_pseudo_inverse:
            raise ValueError("has_svd implies has_pseudo_inverse")
        if self.has_pseudo_inverse and not self.is_linear:
            raise ValueError("has_pseudo_inverse implies is_linear")


class ForwardModel:
    """Deterministic forward map plus optional structure."""

    name: str = "model"
    capabilities: Capability = Capability()
    n: int  # real source dimension
    m: int  # real observation dimension
    source_shape: tuple  # (channels, ny, nx) layout of the unknown
    clamp_range: tuple | None = None  # physical validity domain for x0_hat

    # --- required ---
    def apply(self, z: np.ndarray) -> np.ndarray:
        """G(z), noiseless."""
        raise NotImplementedError

    # --- optional structure ---
    def apply_batch(self, zs: np.ndarray) -> np.ndarray:
        return np.stack([self.apply(z) for z in zs])

    def misfit(self, z: np.ndarray, y: np.ndarray):
        """(loss, gradient) of the data-fidelity term at z."""
        if not self.capabilities.has_gradient:
            raise NotImplementedError(f"{self.name}: no gradient access")
        raise NotImplementedError

    def misfit_batch(self, zs: np.ndarray, y: np.ndarray):
        pairs = [self.misfit(z, y) for z in zs]
        return np.array([p[0] for p in pairs]), np.stack([p[1] for p in pairs])

    def misfit_value(self, z: np.ndarray, y: np.ndarray) -> float:
        """Loss only (usable on gradient-free models)."""
        return float(self.loss_from_forward(self.apply(z), y))

    def misfit_value_batch(self, zs: np.ndarray, y: np.ndarray) -> np.ndarray:
        fs = self.apply_batch(zs)
        return np.array([self.loss_from_forward(f, y) for f in fs])

    def loss_from_forward(self, gz: np.ndarray, y: np.ndarray) -> float:
        return 0.5 * float(np.sum((gz - y) ** 2))

    def rmatvec(self, w: np.ndarray) -> np.ndarray:
        """A^T w for linear models."""
        raise NotImplementedError

    def normal_solve(self, rhs: np.ndarray, reg: float) -> np.ndarray:
        """(A^T A + reg I)^{-1} rhs for linear models."""
        raise NotImplementedError

    def pinv_apply(self, y: np.ndarray) -> np.ndarray:
        """Pseudo-inverse applied to an observation vector."""
        raise NotImplementedError

    def svd_factors(self) -> SvdFactors:
        raise NotImplementedError


class MatrixModel(ForwardModel):
    """Dense real linear model y = A z; base for the assembled operators."""

    def __init__(self, a: np.ndarray, name: str = "linear", source_shape=None):
        a = np.asarray(a, dtype=np.float64)
        self.A = a
        self.m, self.n = a.shape
        self.name = name
        self.source_shape = source_shape or (1, 1, self.n)
        self.capabilities = Capability(
            is_linear=True, has_svd=True, has_pseudo_inverse=True, has_gradient=True
        )
        self._svd: SvdFactors | None = None
        self._svd_max_entries: int | None = None

    def apply(self, z):
        return self.A @ z

    def apply_batch(self, zs):
        return np.asarray(zs) @ self.A.T

    def misfit(self, z, y):
        r = self.A @ z - y
        return 0.5 * float(r @ r), self.A.T @ r

    def misfit_batch(self, zs, y):
        r = np.asarray(zs) @ self.A.T - y[None]
        return 0.5 * np.sum(r * r, axis=1), r @ self.A

    def rmatvec(self, w):
        return self.A.T @ w

    def svd_factors(self) -> SvdFactors:
        if self._svd is None:
            from ..core.linalg import svd

            self._svd = svd(self.A, max_entries=self._svd_max_entries)
        return self._svd

    def normal_solve(self, rhs, reg):
        f = self.svd_factors()
        s2 = f.singular_values**2
        # A = U s V^T (real) => (A^T A + reg I)^{-1} = V diag(1/(s^2+reg)) V^T
        # plus the orthogonal complement scaled by 1/reg
        vt_rhs = f.V.T @ rhs
        in_span = f.V @ (vt_rhs / (s2 + reg))
        if reg > 0:
            out_span = (rhs - f.V @ vt_rhs) / reg
            return in_span + out_span
        return in_span

    def pinv_apply(self, y):
        return self.svd_factors().pinv_apply(y)
