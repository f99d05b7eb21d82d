"""Posterior samplers and classical baselines behind one entry point.

:func:`run_solver` is the only way the harness invokes an algorithm: it
checks operator capabilities *before* any instrumented evaluation, wraps
the model/prior pair in counters, dispatches on the algorithm id, and
returns the estimate together with the evaluation accounting.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..instrument import EvalCounters, instrument
from .baselines import blurred_init, run_eki, run_fista_tv, run_gd, tv_prox, tv_value
from .guidance import (
    sample_cgsg,
    sample_dps,
    sample_fgsg,
    sample_lgd,
    sample_pigdm,
    smoothed_gradient,
)
from .projection import sample_ddnm, sample_ddrm
from .smc import sample_fps, sample_mcgdiff, systematic_resample
from .spec import (
    BASELINE_ALGORITHMS,
    DIFFUSION_ALGORITHMS,
    SolverSpec,
    check_capabilities,
    registry_defaults,
    registry_search_space,
)
from .splitting import sample_daps, sample_diffpir, sample_pnpdm
from .variational import sample_reddiff


def _fista_adapter(spec, prior, model, y, info=None, init=None):
    return run_fista_tv(spec, model, y, info)


def _eki_adapter(spec, prior, model, y, info=None, init=None):
    return run_eki(spec, prior, model, y, info)


def _gd_adapter(spec, prior, model, y, info=None, init=None):
    return run_gd(spec, model, y, info, init=init)


def _plain(fn):
    def adapter(spec, prior, model, y, info=None, init=None):
        return fn(spec, prior, model, y, info)

    return adapter


SAMPLERS = {
    "dps": _plain(sample_dps),
    "lgd": _plain(sample_lgd),
    "fgsg": _plain(sample_fgsg),
    "cgsg": _plain(sample_cgsg),
    "pigdm": _plain(sample_pigdm),
    "ddrm": _plain(sample_ddrm),
    "ddnm": _plain(sample_ddnm),
    "diffpir": _plain(sample_diffpir),
    "pnpdm": _plain(sample_pnpdm),
    "daps": _plain(sample_daps),
    "reddiff": _plain(sample_reddiff),
    "fps": _plain(sample_fps),
    "mcgdiff": _plain(sample_mcgdiff),
    "fista_tv": _fista_adapter,
    "eki": _eki_adapter,
    "gd": _gd_adapter,
}


@dataclass
class SolverResult:
    """Estimate plus the per-run bookkeeping."""

    estimate: np.ndarray
    counters: dict
    info: dict = field(default_factory=dict)


def run_solver(spec: SolverSpec, prior, model, y, init=None) -> SolverResult:
    """Run one algorithm on one observation.

    Capability checks happen before the model or prior is wrapped, so a
    rejected configuration has provably zero evaluations on its counters.
    """
    check_capabilities(spec.algorithm, model)
    wrapped_model, wrapped_prior, counters = instrument(model, prior)
    info: dict = {}
    estimate = SAMPLERS[spec.algorithm](
        spec, wrapped_prior, wrapped_model, np.asarray(y, dtype=np.float64),
        info=info, init=init,
    )
    return SolverResult(
        estimate=np.asarray(estimate), counters=counters.as_dict(), info=info
    )


__all__ = [
    "BASELINE_ALGORITHMS",
    "DIFFUSION_ALGORITHMS",
    "SAMPLERS",
    "SolverResult",
    "SolverSpec",
    "blurred_init",
    "check_capabilities",
    "registry_defaults",
    "registry_search_space",
    "run_solver",
    "run_eki",
    "run_fista_tv",
    "run_gd",
    "sample_cgsg",
    "sample_daps",
    "sample_ddnm",
    "sample_ddrm",
    "sample_diffpir",
    "sample_dps",
    "sample_fgsg",
    "sample_fps",
    "sample_lgd",
    "sample_mcgdiff",
    "sample_pigdm",
    "sample_pnpdm",
    "sample_reddiff",
    "smoothed_gradient",
    "systematic_resample",
    "tv_prox",
    "tv_value",
]
