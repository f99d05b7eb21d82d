"""Analytic score priors.

These close the loop that a trained denoising network normally occupies:
each prior knows its exact posterior-mean denoiser E[x0 | x_sigma], the
matching score via Tweedie's identity, the exact Jacobian-vector product
of the denoiser (what reverse-mode differentiation through a network
would supply), and how to draw fresh samples.

Field layout: priors act on stacked real channels of shape
(channels, ny, nx); solver-facing code passes flat real vectors and the
prior reshapes internally.  Complex sources are carried as two channels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.fftops import fft2, ifft2
from ..core.field import Field
from ..core.grf import grf_spectrum, hermitize
from ..core.rng import RngStream


@dataclass(frozen=True)
class Denoised:
    """Posterior mean and score at one noise level; Tweedie-consistent."""

    x0_hat: np.ndarray
    score: np.ndarray
    sigma: float

    @classmethod
    def from_x0(cls, x: np.ndarray, x0_hat: np.ndarray, sigma: float) -> "Denoised":
        score = (x0_hat - x) / (sigma * sigma)
        return cls(x0_hat=x0_hat, score=score, sigma=float(sigma))

    def check(self, x: np.ndarray) -> None:
        resid = self.score * self.sigma**2 + x - self.x0_hat
        scale = 1.0 + np.max(np.abs(self.x0_hat)) + np.max(np.abs(x))
        assert np.max(np.abs(resid)) <= 1e-12 * scale


class ScorePrior:
    """Interface shared by the analytic priors."""

    kind: str
    shape: tuple  # (channels, ny, nx)

    @property
    def dim(self) -> int:
        c, ny, nx = self.shape
        return c * ny * nx

    def _as_field(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64).reshape(self.shape)

    def denoise(self, x: np.ndarray, sigma: float) -> Denoised:
        if not sigma > 0:
            raise ValueError("denoise requires sigma > 0")
        shaped = self._as_field(x)
        x0 = self._x0(shaped, float(sigma))
        return Denoised.from_x0(
            shaped.reshape(np.shape(x)), x0.reshape(np.shape(x)), float(sigma)
        )

    def denoiser_vjp(self, x: np.ndarray, sigma: float, v: np.ndarray) -> np.ndarray:
        """(d x0_hat / d x)^T v, exact.  Posterior-mean denoisers have a
        symmetric Jacobian (posterior covariance / sigma^2)."""
        raise NotImplementedError

    def denoise_batch(self, xs: np.ndarray, sigma: float) -> np.ndarray:
        """Posterior means for a stack of inputs, shape (batch, dim)."""
        return np.stack([self.denoise(x, sigma).x0_hat for x in xs])

    def sample(self, rng: RngStream) -> np.ndarray:
        raise NotImplementedError

    def _x0(self, x: np.ndarray, sigma: float) -> np.ndarray:
        raise NotImplementedError


class GaussianPrior(ScorePrior):
    """Gaussian prior whose covariance is diagonal in the Fourier basis.

    ``spectrum[k]`` is the variance of the unitary-FFT coefficient at mode
    k, shared across channels; ``mean`` is a (channels, ny, nx) field.
    """

    kind = "gaussian"

    def __init__(self, mean: np.ndarray, spectrum: np.ndarray):
        mean = np.asarray(mean, dtype=np.float64)
        if mean.ndim == 2:
            mean = mean[None]
        spectrum = np.asarray(spectrum, dtype=np.float64)
        if np.any(spectrum <= 0):
            raise ValueError("covariance spectrum must be strictly positive")
        if mean.shape[-2:] != spectrum.shape:
            raise ValueError("mean and spectrum grids differ")
        self.mean = mean
        self.spectrum = spectrum
        self.shape = mean.shape

    @classmethod
    def isotropic(cls, shape, variance: float, mean: float | np.ndarray = 0.0):
        if len(shape) == 2:
            shape = (1,) + tuple(shape)
        mean_field = np.broadcast_to(np.asarray(mean, dtype=float), shape).copy()
        return cls(mean_field, np.full(shape[-2:], float(variance)))

    def _multiplier(self, sigma: float) -> np.ndarray:
        return self.spectrum / (self.spectrum + sigma * sigma)

    def _apply_mult(self, mult: np.ndarray, v: np.ndarray) -> np.ndarray:
        return ifft2(fft2(v) * mult).real

    def _x0(self, x: np.ndarray, sigma: float) -> np.ndarray:
        return self.mean + self._apply_mult(self._multiplier(sigma), x - self.mean)

    def denoiser_vjp(self, x, sigma, v):
        shaped = self._as_field(v)
        out = self._apply_mult(self._multiplier(float(sigma)), shaped)
        return out.reshape(np.shape(v))

    def denoise_batch(self, xs, sigma):
        xs = np.asarray(xs, dtype=np.float64)
        batch = xs.shape[0]
        shaped = xs.reshape((batch,) + self.shape)
        mult = self._multiplier(float(sigma))
        out = self.mean[None] + ifft2(fft2(shaped - self.mean[None]) * mult).real
        return out.reshape(batch, -1)

    def sample(self, rng: RngStream) -> np.ndarray:
        gen = rng.generator()
        c, ny, nx = self.shape
        out = np.empty(self.shape)
        root = np.sqrt(self.spectrum)
        for ch in range(c):
            coeff = gen.standard_normal((ny, nx)) + 1j * gen.standard_normal((ny, nx))
            coeff = hermitize(coeff / np.sqrt(2.0))
            out[ch] = ifft2(coeff * root).real
        return (self.mean + out).reshape(-1)


def grf_prior(
    ny: int, nx: int, tau: float, alpha: float, amplitude: float = 1.0, channels: int = 1
) -> GaussianPrior:
    """Gaussian prior with the (|k|^2 + tau^2)^(-alpha) covariance spectrum."""
    spec = grf_spectrum(ny, nx, tau, alpha)
    spec[0, 0] = (tau * tau) ** (-alpha)  # keep the spectrum strictly positive
    return GaussianPrior(np.zeros((channels, ny, nx)), amplitude**2 * spec)


class MixturePrior(ScorePrior):
    """Finite Gaussian mixture with isotropic per-component covariances."""

    kind = "gaussian-mixture"

    def __init__(self, weights, means, variances, grid_shape=None):
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be positive and sum to 1")
        means = np.asarray(means, dtype=np.float64)
        if means.ndim == 1:
            means = means[:, None]
        self.weights = w
        self.means = means.reshape(means.shape[0], -1)
        self.variances = np.asarray(variances, dtype=np.float64)
        if np.any(self.variances <= 0):
            raise ValueError("component variances must be positive")
        if grid_shape is None:
            grid_shape = (1, 1, self.means.shape[1])
        elif len(grid_shape) == 2:
            grid_shape = (1,) + tuple(grid_shape)
        self.shape = tuple(grid_shape)

    def _log_resp(self, flat: np.ndarray, sigma: float):
        s2 = self.variances + sigma * sigma  # (K,)
        d2 = np.sum((flat[None, :] - self.means) ** 2, axis=1)
        logp = np.log(self.weights) - 0.5 * d2 / s2 - 0.5 * flat.size * np.log(s2)
        logp = logp - logp.max()
        p = np.exp(logp)
        return p / p.sum(), s2

    def _x0(self, x: np.ndarray, sigma: float) -> np.ndarray:
        flat = x.reshape(-1)
        resp, s2 = self._log_resp(flat, sigma)
        shrink = self.variances / s2  # (K,)
        comp_means = self.means + shrink[:, None] * (flat[None, :] - self.means)
        return (resp[:, None] * comp_means).sum(axis=0).reshape(x.shape)

    def denoiser_vjp(self, x, sigma, v):
        sigma = float(sigma)
        flat = np.asarray(x, dtype=np.float64).reshape(-1)
        vf = np.asarray(v, dtype=np.float64).reshape(-1)
        resp, s2 = self._log_resp(flat, sigma)
        shrink = self.variances / s2
        comp_means = self.means + shrink[:, None] * (flat[None, :] - self.means)
        x0 = (resp[:, None] * comp_means).sum(axis=0)
        # posterior covariance: sum_k r_k (v_k I + b_k b_k^T) - x0 x0^T
        iso = float(np.sum(resp * shrink * sigma * sigma))
        out = iso * vf
        out += (resp * (comp_means @ vf)) @ comp_means
        out -= x0 * (x0 @ vf)
        return (out / (sigma * sigma)).reshape(np.shape(v))

    def denoise_batch(self, xs, sigma):
        xs = np.asarray(xs, dtype=np.float64).reshape(len(xs), -1)
        s2 = self.variances + sigma * sigma
        d2 = ((xs[:, None, :] - self.means[None]) ** 2).sum(axis=-1)
        logp = (
            np.log(self.weights)[None]
            - 0.5 * d2 / s2[None]
            - 0.5 * xs.shape[1] * np.log(s2)[None]
        )
        logp -= logp.max(axis=1, keepdims=True)
        r = np.exp(logp)
        r /= r.sum(axis=1, keepdims=True)
        shrink = self.variances / s2
        comp = self.means[None] + shrink[None, :, None] * (
            xs[:, None, :] - self.means[None]
        )
        return (r[:, :, None] * comp).sum(axis=1)

    def sample(self, rng: RngStream) -> np.ndarray:
        gen = rng.generator()
        k = gen.choice(len(self.weights), p=self.weights)
        draw = self.means[k] + np.sqrt(self.variances[k]) * gen.standard_normal(
            self.means.shape[1]
        )
        return draw


def prior_from_config(cfg: dict, grid_shape=None) -> ScorePrior:
    """Build a prior from its JSON declaration."""
    kind = cfg.get("kind")
    if kind == "gaussian":
        if "spectrum_file" in cfg:
            from ..fld import read_fld

            spec_field: Field = read_fld(cfg["spectrum_file"])
            spectrum = spec_field.values.real
            ny, nx = spectrum.shape
        else:
            if grid_shape is None:
                ny = nx = int(cfg.get("n", 64))
            else:
                ny, nx = grid_shape
            spectrum = np.full((ny, nx), float(cfg.get("variance", 1.0)))
        channels = int(cfg.get("channels", 1))
        mean = np.full((channels, ny, nx), float(cfg.get("mean", 0.0)))
        return GaussianPrior(mean, spectrum)
    if kind == "grf":
        if grid_shape is None:
            ny = nx = int(cfg.get("n", 64))
        else:
            ny, nx = grid_shape
        return grf_prior(
            ny,
            nx,
            float(cfg.get("tau", 3.0)),
            float(cfg.get("alpha", 4.0)),
            amplitude=float(cfg.get("amplitude", 1.0)),
            channels=int(cfg.get("channels", 1)),
        )
    if kind == "gaussian-mixture":
        return MixturePrior(
            cfg["weights"], cfg["means"], cfg["variances"], cfg.get("grid_shape")
        )
    raise ValueError(f"unknown prior kind {kind!r}")
