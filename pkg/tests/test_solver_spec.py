"""Hyperparameter registry and SolverSpec plumbing."""
import dataclasses

import pytest

from invprior.errors import ConfigError
from invprior.prior.schedule import NoiseSchedule
from invprior.solvers.spec import (
    SolverSpec,
    registry_defaults,
    registry_search_space,
)


def test_common_block_merges_with_problem_overrides():
    d = registry_defaults("dps", "fwi")
    assert d["num_steps"] == 100
    assert d["guidance_convention"] == "norm"
    assert d["guidance_scale"] == 0.01  # problem block wins over common


def test_variant_overlay_wins_over_problem_block():
    base = registry_defaults("dps", "scattering")
    assert base["guidance_scale"] == 380.0
    sparse = registry_defaults("dps", "scattering", variant="receivers=60")
    assert sparse["guidance_scale"] == 625.0
    dense = registry_defaults("dps", "scattering", variant="receivers=360")
    assert dense["guidance_scale"] == 280.0


def test_mri_dataset_variants():
    sim = registry_defaults("dps", "mri", variant="dataset=sim")
    raw = registry_defaults("dps", "mri", variant="dataset=raw")
    assert sim["guidance_scale"] == 0.589
    assert raw["guidance_scale"] == 0.428


def test_registry_rejects_unknown_names():
    with pytest.raises(ConfigError):
        registry_defaults("nosuch", "fwi")
    with pytest.raises(ConfigError):
        registry_defaults("dps", "scattering", variant="receivers=45")


def test_search_space_has_direction_and_bounds():
    space = registry_search_space("dps", "scattering")
    lo, hi = space["guidance_scale"]
    assert lo < hi
    assert space["scale"] == "log"
    with pytest.raises(ConfigError):
        registry_search_space("dps", "nosuchproblem")


def test_spec_is_frozen_and_copies_on_update():
    spec = SolverSpec("dps", seed=7, params={"num_steps": 12})
    with pytest.raises(dataclasses.FrozenInstanceError):
        spec.seed = 8
    other = spec.with_params(guidance_scale=2.0)
    assert other is not spec
    assert other.get("guidance_scale") == 2.0
    assert spec.get("guidance_scale") is None
    assert spec.with_seed(3).seed == 3


def test_spec_require_raises_on_missing():
    spec = SolverSpec("dps", seed=0, params={})
    with pytest.raises(ConfigError, match="guidance_scale"):
        spec.require("guidance_scale")


def test_num_steps_prefers_params_over_default():
    spec = SolverSpec("dps", seed=0, params={})
    assert spec.num_steps(50) == 50
    spec = SolverSpec("dps", seed=0, params={"num_steps": 12})
    assert spec.num_steps(50) == 12
    with pytest.raises(ConfigError):
        SolverSpec("dps", seed=0, params={"num_steps": 0}).num_steps()


def test_for_problem_seeds_registry_then_overrides():
    spec = SolverSpec.for_problem("daps", "fwi", seed=4)
    assert spec.get("anneal_steps") == 150
    assert spec.get("langevin_step") == pytest.approx(3e-4)
    spec = SolverSpec.for_problem("daps", "fwi", seed=4, langevin_step=1.0)
    assert spec.get("langevin_step") == 1.0
    assert spec.seed == 4


def test_every_algorithm_has_a_common_block():
    for algorithm in (
        "dps", "lgd", "fgsg", "cgsg", "reddiff", "diffpir", "pnpdm", "daps",
        "ddrm", "ddnm", "pigdm", "fps", "mcgdiff", "fista_tv", "eki", "gd",
    ):
        d = registry_defaults(algorithm, None)
        assert isinstance(d, dict) and d, algorithm
