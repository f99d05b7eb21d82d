"""Solver configuration, the bundled defaults registry, and gating.

A :class:`SolverSpec` fully determines a reconstruction run: algorithm
id, noise schedule, seed, and the hyperparameter mapping.  Defaults per
(algorithm, problem) ship in ``data/defaults.json``; unknown algorithms,
unknown hyperparameter names, and capability mismatches are rejected
before any physics or denoiser evaluation happens.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

from ..errors import CapabilityError, ConfigError
from ..prior.schedule import NoiseSchedule

# structural handles each algorithm insists on before it will run
REQUIREMENTS: dict[str, tuple] = {
    "dps": ("has_gradient",),
    "lgd": ("has_gradient",),
    "fgsg": (),
    "cgsg": (),
    "pigdm": ("is_linear", "has_pseudo_inverse"),
    "ddrm": ("has_svd",),
    "ddnm": ("has_pseudo_inverse",),
    "diffpir": ("has_gradient",),
    "pnpdm": ("has_gradient",),
    "daps": ("has_gradient",),
    "reddiff": ("has_gradient",),
    "fps": ("is_linear",),
    "mcgdiff": ("has_svd",),
    "fista_tv": ("is_linear",),
    "eki": (),
    "gd": ("has_gradient",),
}

DIFFUSION_ALGORITHMS = (
    "dps",
    "lgd",
    "fgsg",
    "cgsg",
    "pigdm",
    "ddrm",
    "ddnm",
    "diffpir",
    "pnpdm",
    "daps",
    "reddiff",
    "fps",
    "mcgdiff",
)
BASELINE_ALGORITHMS = ("fista_tv", "eki", "gd")


def check_capabilities(algorithm: str, model) -> None:
    """Raise CapabilityError unless the model carries every handle the
    algorithm needs.  Called before any evaluation."""
    if algorithm not in REQUIREMENTS:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    caps = model.capabilities
    missing = [flag for flag in REQUIREMENTS[algorithm] if not getattr(caps, flag)]
    if missing:
        raise CapabilityError(
            f"{algorithm} needs {', '.join(missing)} but model "
            f"{model.name!r} does not provide "
            + ("it" if len(missing) == 1 else "them")
        )


def _load_registry() -> dict:
    text = resources.files("invprior.data").joinpath("defaults.json").read_text()
    return json.loads(text)


_REGISTRY_CACHE: dict | None = None


def defaults_registry() -> dict:
    global _REGISTRY_CACHE
    if _REGISTRY_CACHE is None:
        _REGISTRY_CACHE = _load_registry()
    return _REGISTRY_CACHE


def registry_defaults(algorithm: str, problem: str | None, variant: str | None = None) -> dict:
    """Merged hyperparameter defaults for one (algorithm, problem) pair.

    Order: the algorithm's "common" block, then its problem block, then
    the chosen variant override (e.g. ``receivers=60``).  Search-space
    declarations are stripped; ask :func:`registry_search_space` for them.
    """
    reg = defaults_registry()
    if algorithm not in reg:
        raise ConfigError(f"no registry entry for algorithm {algorithm!r}")
    entry = reg[algorithm]
    params = dict(entry.get("common", {}))
    block = entry.get(problem or "", {})
    params.update({k: v for k, v in block.items() if k not in ("variants", "search")})
    if variant is not None:
        variants = block.get("variants", {})
        if variant not in variants:
            raise ConfigError(
                f"{algorithm}/{problem} has no variant {variant!r}; "
                f"known: {sorted(variants) or 'none'}"
            )
        params.update(variants[variant])
    return params


def registry_search_space(algorithm: str, problem: str) -> dict:
    """The tuning ranges recorded for one (algorithm, problem) pair."""
    reg = defaults_registry()
    entry = reg.get(algorithm, {})
    space = entry.get(problem, {}).get("search")
    if not space:
        raise ConfigError(f"no search space recorded for {algorithm}/{problem}")
    return dict(space)


@dataclass(frozen=True)
class SolverSpec:
    """Everything a run needs besides the prior/model/data triplet."""

    algorithm: str
    schedule: NoiseSchedule = field(default_factory=NoiseSchedule)
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in REQUIREMENTS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")

    @classmethod
    def for_problem(
        cls,
        algorithm: str,
        problem: str | None = None,
        variant: str | None = None,
        seed: int = 0,
        schedule: NoiseSchedule | None = None,
        **overrides,
    ) -> "SolverSpec":
        params = registry_defaults(algorithm, problem, variant)
        params.update(overrides)
        sched = schedule if schedule is not None else NoiseSchedule()
        return cls(algorithm=algorithm, schedule=sched, seed=seed, params=params)

    def get(self, name: str, default=None):
        return self.params.get(name, default)

    def require(self, name: str):
        if name not in self.params:
            raise ConfigError(f"{self.algorithm}: missing hyperparameter {name!r}")
        return self.params[name]

    def with_params(self, **updates) -> "SolverSpec":
        merged = dict(self.params)
        merged.update(updates)
        return replace(self, params=merged)

    def with_seed(self, seed: int) -> "SolverSpec":
        return replace(self, seed=int(seed))

    def num_steps(self, default: int = 100) -> int:
        n = int(self.params.get("num_steps", default))
        if n < 1:
            raise ConfigError("num_steps must be positive")
        return n
