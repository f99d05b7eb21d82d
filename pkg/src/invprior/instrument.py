"""Evaluation accounting for forward models and score priors.

Every reconstruction run owns one :class:`EvalCounters`; the two wrapper
classes forward calls to the underlying model/prior unchanged while
recording how much work went through.  The counting convention:

* a *total* counter adds one per evaluation, batched or not;
* a *sequential* counter adds one per dependent batch — a batch of k
  independent evaluations is one unit of critical-path depth;
* a gradient call also counts the forward/denoiser pass it contains, so
  ``misfit`` bumps both the forward and forward-gradient counters;
* structural linear algebra (adjoint applies, normal solves, pseudo
  inverses, factorizations) is not a simulation and is not counted.

Runtimes come from a monotonic clock.  The total runtime accumulates the
full wall time of every counted call; the sequential runtime divides a
batch's wall time by the batch width, approximating the critical path on
a machine wide enough to run the batch at once.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

COUNTER_FIELDS = (
    "fwd_total",
    "fwd_seq",
    "fwd_grad_total",
    "fwd_grad_seq",
    "denoise_total",
    "denoise_seq",
    "denoise_grad_total",
    "denoise_grad_seq",
    "runtime_total",
    "runtime_seq",
)


@dataclass
class EvalCounters:
    """The ten per-run efficiency fields."""

    fwd_total: int = 0
    fwd_seq: int = 0
    fwd_grad_total: int = 0
    fwd_grad_seq: int = 0
    denoise_total: int = 0
    denoise_seq: int = 0
    denoise_grad_total: int = 0
    denoise_grad_seq: int = 0
    runtime_total: float = 0.0
    runtime_seq: float = 0.0

    def add(self, kinds, batch: int, elapsed: float) -> None:
        """Record one dependent batch.  ``kinds`` may name several counter
        families (a gradient call is also a forward call); the wall time
        is attributed once."""
        if batch < 1:
            raise ValueError("batch size must be >= 1")
        if isinstance(kinds, str):
            kinds = (kinds,)
        for kind in kinds:
            setattr(self, f"{kind}_total", getattr(self, f"{kind}_total") + batch)
            setattr(self, f"{kind}_seq", getattr(self, f"{kind}_seq") + 1)
        self.runtime_total += elapsed
        self.runtime_seq += elapsed / batch

    def as_dict(self) -> dict:
        out = {name: getattr(self, name) for name in COUNTER_FIELDS}
        # clock fields carry millisecond resolution in reports
        out["runtime_total"] = round(self.runtime_total, 3)
        out["runtime_seq"] = round(self.runtime_seq, 3)
        return out

    def total_evaluations(self) -> int:
        return (
            self.fwd_total
            + self.fwd_grad_total
            + self.denoise_total
            + self.denoise_grad_total
        )


class _Clock:
    def __init__(self, counters: EvalCounters, kinds, batch: int):
        self.counters = counters
        self.kinds = kinds
        self.batch = batch
        self.start = 0.0

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, *exc):
        self.counters.add(self.kinds, self.batch, time.monotonic() - self.start)
        return False


class InstrumentedModel:
    """Forward model proxy that meters physics evaluations."""

    def __init__(self, model, counters: EvalCounters):
        self._model = model
        self.counters = counters

    # metadata passthrough ------------------------------------------------
    @property
    def name(self):
        return self._model.name

    @property
    def capabilities(self):
        return self._model.capabilities

    @property
    def n(self):
        return self._model.n

    @property
    def m(self):
        return self._model.m

    @property
    def source_shape(self):
        return self._model.source_shape

    @property
    def clamp_range(self):
        return self._model.clamp_range

    def __getattr__(self, attr):
        # uncounted structure (rmatvec, normal_solve, pinv_apply,
        # svd_factors, loss_from_forward, problem-specific helpers)
        return getattr(self._model, attr)

    # counted physics -----------------------------------------------------
    def apply(self, z):
        with _Clock(self.counters, "fwd", 1):
            return self._model.apply(z)

    def apply_batch(self, zs):
        with _Clock(self.counters, "fwd", max(1, len(zs))):
            return self._model.apply_batch(zs)

    def misfit(self, z, y):
        with _Clock(self.counters, ("fwd", "fwd_grad"), 1):
            return self._model.misfit(z, y)

    def misfit_batch(self, zs, y):
        with _Clock(self.counters, ("fwd", "fwd_grad"), max(1, len(zs))):
            return self._model.misfit_batch(zs, y)

    def misfit_value(self, z, y):
        with _Clock(self.counters, "fwd", 1):
            return self._model.misfit_value(z, y)

    def misfit_value_batch(self, zs, y):
        with _Clock(self.counters, "fwd", max(1, len(zs))):
            return self._model.misfit_value_batch(zs, y)


class InstrumentedPrior:
    """Score prior proxy that meters denoiser evaluations."""

    def __init__(self, prior, counters: EvalCounters):
        self._prior = prior
        self.counters = counters

    @property
    def kind(self):
        return self._prior.kind

    @property
    def shape(self):
        return self._prior.shape

    @property
    def dim(self):
        return self._prior.dim

    def __getattr__(self, attr):
        return getattr(self._prior, attr)

    def denoise(self, x, sigma):
        with _Clock(self.counters, "denoise", 1):
            return self._prior.denoise(x, sigma)

    def denoise_batch(self, xs, sigma):
        with _Clock(self.counters, "denoise", max(1, len(xs))):
            return self._prior.denoise_batch(xs, sigma)

    def denoiser_vjp(self, x, sigma, v):
        with _Clock(self.counters, "denoise_grad", 1):
            return self._prior.denoiser_vjp(x, sigma, v)

    def sample(self, rng):
        # fresh prior draws are free of both the model and the denoiser
        return self._prior.sample(rng)


def instrument(model, prior, counters: EvalCounters | None = None):
    """Wrap a (model, prior) pair around a shared counter set."""
    c = counters if counters is not None else EvalCounters()
    return InstrumentedModel(model, c), InstrumentedPrior(prior, c), c


def counters_snapshot(*sources) -> dict:
    """Merge the counters reachable from wrapped models/priors into the
    ten-field report dict.  Objects sharing one counter set are merged
    once."""
    seen: list[EvalCounters] = []
    for src in sources:
        c = src.counters if hasattr(src, "counters") else src
        if not isinstance(c, EvalCounters):
            raise TypeError(f"no counters on {type(src).__name__}")
        if not any(c is s for s in seen):
            seen.append(c)
    merged = EvalCounters()
    for c in seen:
        for name in COUNTER_FIELDS:
            setattr(merged, name, getattr(merged, name) + getattr(c, name))
    return merged.as_dict()


def zero_snapshot() -> dict:
    return EvalCounters().as_dict()


def assert_untouched(counters: EvalCounters) -> None:
    """True only if no counted evaluation of any kind has happened."""
    if counters.total_evaluations() != 0:
        raise AssertionError(
            f"expected zero evaluations, saw {counters.as_dict()}"
        )


__all__ = [
    "COUNTER_FIELDS",
    "EvalCounters",
    "InstrumentedModel",
    "InstrumentedPrior",
    "instrument",
    "counters_snapshot",
    "zero_snapshot",
    "assert_untouched",
]
