import dataclasses

import pytest

from hetvfc.config import (
    ConfigError,
    ExperimentConfig,
    apply_override,
    dump_config,
    load_config,
    loads_config,
    sweep_points,
)


def test_empty_config_gives_defaults():
    assert loads_config("") == ExperimentConfig()
    assert loads_config("{}") == ExperimentConfig()


def test_default_values():
    cfg = ExperimentConfig()
    sc, phy, solver = cfg.scenario, cfg.phy, cfg.solver
    assert (sc.vehicles, sc.lanes, sc.density, sc.compute, sc.arrival_rate, sc.slot_length) == (40, 3, 0.04, 2e9, 10, 0.06)
    assert sc.task_size_kb == [300, 500] and sc.intensity == 200
    assert (phy.n_vlc, phy.n_rf, phy.gamma_v, phy.gamma_r, phy.mu_r_dbm_hz) == (8, 8, 0.5e6, 0.5e6, -174)
    assert (solver.xi, solver.epsilon, solver.accuracy) == (0.4, 1e-4, 1e-8)
    assert len(cfg.seeds) == 20
    assert sc.road_length == pytest.approx(40 / (3 * 0.04))


def test_round_trip(tmp_path):
    cfg = apply_override(ExperimentConfig(), "scenario.compute", 3e9)
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_invalid_field_named_by_path():
    with pytest.raises(ConfigError, match=r"phy\.gamma_v: must be positive"):
        loads_config("phy:\n  gamma_v: -1\n")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as exc:
        loads_config("scenario:\n  lanez: 2\n")
    assert exc.value.path == "scenario.lanez"


def test_type_errors():
    with pytest.raises(ConfigError, match="scenario.lanes"):
        loads_config("scenario:\n  lanes: 2.5\n")
    with pytest.raises(ConfigError, match="solver.deadline"):
        loads_config("solver:\n  deadline: maybe\n")
    with pytest.raises(ConfigError, match=r"methods\[0\]"):
        loads_config("methods: [magic]\n")


def test_string_exponents_accepted():
    assert loads_config("scenario:\n  compute: 2e9\n").scenario.compute == 2e9


def test_unparseable_yaml():
    with pytest.raises(ConfigError):
        loads_config("scenario: [\n")


def test_gamma_alias_sets_both_bandwidths():
    cfg = apply_override(ExperimentConfig(), "phy.gamma", 0.25e6)
    assert cfg.phy.gamma_v == cfg.phy.gamma_r == 0.25e6


def test_override_rejects_unknown_and_non_numeric():
    with pytest.raises(ConfigError):
        apply_override(ExperimentConfig(), "phy.nope", 1)
    with pytest.raises(ConfigError):
        apply_override(ExperimentConfig(), "methods", 1)


def test_override_leaves_original_untouched():
    cfg = ExperimentConfig()
    apply_override(cfg, "scenario.intensity", 50)
    assert cfg.scenario.intensity == 200


def test_sweep_is_cartesian():
    cfg = loads_config(
        "sweep:\n  - {field: scenario.intensity, values: [50, 150]}\n"
        "  - {field: phy.gamma, values: [0.25e6, 0.5e6, 1e6]}\n"
    )
    pts = sweep_points(cfg)
    assert len(pts) == 6
    assert pts[0][1].scenario.intensity == 50 and pts[0][1].phy.gamma_r == 0.25e6
    assert pts[-1][1].scenario.intensity == 150 and pts[-1][1].phy.gamma_v == 1e6


def test_sweep_field_validated():
    with pytest.raises(ConfigError, match=r"sweep\[0\]\.field"):
        loads_config("sweep:\n  - {field: scenario.nothing, values: [1]}\n")


def test_config_is_plain_data():
    d = dataclasses.asdict(ExperimentConfig())
    assert set(d) >= {"scenario", "phy", "channel", "solver", "baselines", "methods", "seeds", "sweep"}
