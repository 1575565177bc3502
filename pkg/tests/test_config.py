"""Config layout: defaults, validation, round-trips, the frozen matching recipe."""

import json

import pytest

from factored_pg.config import (
    ArmConfig,
    EnvConfig,
    ExperimentConfig,
    OptimizerConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    matching_task_config,
    save_config,
)
from factored_pg.errors import ConfigError

MINIMAL = {
    "env": {"name": "target_matching", "params": {"m": 4}},
    "arms": [{"kind": "state_value"}, {"name": "action", "kind": "mean_q"}],
}


def test_minimal_config_fills_defaults():
    cfg = config_from_dict(dict(MINIMAL))
    assert cfg.env.name == "target_matching"
    assert cfg.optimizer.kind == "npg"
    assert cfg.n_iterations == 100
    assert cfg.n_trajectories == 150
    assert cfg.lam == 0.97
    assert cfg.normalize is True
    assert cfg.seeds == (0, 1, 2, 3, 4)
    # unnamed arms inherit their kind as the name
    assert [arm.name for arm in cfg.arms] == ["state_value", "action"]


def test_env_feature_defaults_per_environment():
    cfg = config_from_dict(dict(MINIMAL))
    assert all(arm.spec.features == "linear" for arm in cfg.arms)
    pm = config_from_dict(
        {"env": {"name": "point_mass"}, "arms": [{"kind": "state_value"}]}
    )
    assert pm.arms[0].spec.features == "rff"
    assert pm.arms[0].spec.n_features == 100
    other = config_from_dict(
        {"env": {"name": "communicate_target"}, "arms": [{"kind": "state_value"}]}
    )
    assert other.arms[0].spec.features == "rff"
    assert other.arms[0].spec.n_features == 250


def test_arm_fields_pass_through():
    cfg = config_from_dict(
        {
            "env": {"name": "target_matching"},
            "arms": [
                {
                    "name": "a",
                    "kind": "mc_q",
                    "mc_samples": 25,
                    "exact": True,
                    "max_aggregation": True,
                    "features": "quadratic",
                    "ridge": 1e-8,
                    "tabular": False,
                }
            ],
        }
    )
    spec = cfg.arms[0].spec
    assert spec.mc_samples == 25
    assert spec.exact is True
    assert spec.max_aggregation is True
    assert spec.features == "quadratic"
    assert spec.ridge == 1e-8


def test_round_trip_through_dict_and_file(tmp_path):
    cfg = matching_task_config(12, seeds=(3, 4))
    again = config_from_dict(config_to_dict(cfg))
    assert again == cfg
    path = tmp_path / "cfg.json"
    save_config(cfg, path)
    assert load_config(path) == cfg
    # the saved form is fully resolved, so a naive json reader sees every field
    raw = json.loads(path.read_text())
    assert raw["optimizer"]["kl"] == 0.025
    assert raw["arms"][1]["ridge"] == 1e-8


def test_malformed_json_reports_config_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("env"),
        lambda d: d.pop("arms"),
        lambda d: d.update(arms=[]),
        lambda d: d.update(arms=[{"kind": "nope"}]),
        lambda d: d.update(arms=[{"kind": "state_value", "bogus": 1}]),
        lambda d: d.update(arms=[{"kind": "state_value"}, {"kind": "state_value"}]),
        lambda d: d.update(optimizer={"kind": "adam"}),
        lambda d: d.update(lam=1.5),
        lambda d: d.update(n_iterations=0),
        lambda d: d.update(seeds=[]),
        lambda d: d.update(typo_field=3),
    ],
)
def test_invalid_configs_rejected(mutate):
    raw = json.loads(json.dumps(MINIMAL))
    mutate(raw)
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_arm_missing_kind_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"env": {"name": "target_matching"}, "arms": [{"name": "x"}]})


def test_matching_task_config_frozen_protocol():
    cfg = matching_task_config(100)
    assert cfg.env.params == {"m": 100, "target_seed": 0}
    assert cfg.optimizer == OptimizerConfig(kind="npg", lr=0.05, kl=0.025, cg_iters=10, damping=0.1)
    assert cfg.n_trajectories == 250
    assert cfg.lam == 1.0
    assert cfg.normalize is True
    assert cfg.seeds == (0, 1, 2, 3, 4)
    state, action = cfg.arms
    assert (state.name, state.spec.kind, state.spec.features) == ("state", "state_value", "linear")
    assert (action.name, action.spec.kind, action.spec.features) == ("action", "mean_q", "quadratic")
    assert action.spec.ridge == 1e-8
    # iteration budget scales with problem size unless pinned
    assert matching_task_config(12).n_iterations == 120
    assert cfg.n_iterations == 420
    assert matching_task_config(12, n_iterations=7).n_iterations == 7


def test_direct_dataclass_validation():
    arm = ArmConfig(name="a", spec=matching_task_config(4).arms[0].spec)
    with pytest.raises(ConfigError):
        ExperimentConfig(env=EnvConfig(name="x"), arms=(arm,), seeds=())
    with pytest.raises(ConfigError):
        ExperimentConfig(env=EnvConfig(name="x"), arms=(), seeds=(0,))
