"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when it imported cleanly; callers can
force a backend (tests, benchmarks) through :func:`get_backend`.
"""
from __future__ import annotations

from . import wavestep_np

try:  # pragma: no cover - exercised implicitly by the import
    from . import _wavestep

    HAVE_COMPILED = True
    _default = _wavestep
except ImportError:  # pragma: no cover
    HAVE_COMPILED = False
    _default = wavestep_np

step_wave = _default.step_wave
step_wave_adjoint = _default.step_wave_adjoint
BACKEND = "compiled" if HAVE_COMPILED else "numpy"


def get_backend(name: str = "auto"):
    """Return the kernel module for ``name`` in {auto, compiled, numpy}."""
    if name == "auto":
        return _default
    if name == "numpy":
        return wavestep_np
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel extension is not available")
        return _wavestep
    raise ValueError(f"unknown kernel backend {name!r}")
