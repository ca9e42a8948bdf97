import json
import math
from pathlib import Path

import numpy as np
import pytest

from qlab.config import AUTO_TIME_POINTS, SEED_ENV, ScenarioConfig, load_config
from qlab.errors import ConfigError
from qlab.measures import BilateralExponential
from tests.utils import write_config


def test_load_config(tmp_path):
    cfg = load_config(write_config(tmp_path), environ={})
    assert cfg.run == ("spectral",)
    assert isinstance(cfg.measure, BilateralExponential)
    assert cfg.domain.to_list() == [[0.0, math.pi]]
    assert cfg.start_point == 0.0
    assert cfg.grid.n == 120
    assert cfg.mc.paths == 20000
    assert cfg.mc.seed == 7
    # relative output directories hang off the config file
    assert cfg.output_dir == tmp_path.resolve() / "out"


def test_auto_time_grid(tmp_path):
    cfg = load_config(write_config(tmp_path), environ={})
    times = cfg.mc.times()
    assert len(times) == AUTO_TIME_POINTS
    assert times[0] == 0.0
    assert times[-1] == pytest.approx(10.0)


def test_explicit_time_grid(tmp_path):
    path = write_config(tmp_path, mc={"paths": 1000, "horizon": 4.0, "time_grid": [0.0, 1.0, 4.0]})
    np.testing.assert_array_equal(load_config(path, environ={}).mc.times(), [0.0, 1.0, 4.0])


def test_seed_override_from_environment(tmp_path):
    cfg = load_config(write_config(tmp_path), environ={SEED_ENV: "99"})
    assert cfg.mc.seed == 99
    assert cfg.mc.paths == 20000


def test_seed_override_must_be_an_integer(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_config(write_config(tmp_path), environ={SEED_ENV: "lucky"})
    assert excinfo.value.payload["key"] == SEED_ENV
    assert excinfo.value.exit_code == 3


def test_start_defaults_to_left_end(tmp_path):
    path = write_config(tmp_path, domain=[[1.0, 2.0], [3.0, 4.0]], start=None)
    assert load_config(path, environ={}).start_point == 1.0


@pytest.mark.parametrize(
    "overrides,key",
    [
        ({"run": []}, "run"),
        ({"run": ["spectral", "fly"]}, "run"),
        ({"mc": {"paths": 999}}, "mc.paths"),
        ({"mc": {"horizon": 0.0}}, "mc.horizon"),
        ({"mc": {"horizon": 5.0, "time_grid": [0.0, 6.0]}}, "mc.time_grid"),
        ({"mc": {"time_grid": [2.0, 1.0]}}, "mc.time_grid"),
        ({"grid": {"n": 9}}, "grid.n"),
        ({"grid": {"n": 100.5}}, "grid.n"),
        ({"start": 4.0}, "start"),
        ({"domain": []}, "domain"),
        ({"measure": {"type": "bilateral_exp", "p": -1.0}}, "measure"),
        ({"measure": {"type": "stable"}}, "measure.type"),
        ({"threads": 0}, "threads"),
        ({"diagnostics": {"plateau_window": [10.0, 5.0]}}, "diagnostics.plateau_window"),
        ({"table": {"p": 0.0}}, "table.p"),
        ({"extra": 1}, "extra"),
        ({"grid": {"n": 100, "m": 1}}, "grid.m"),
        ({"mc": {"paths": 2000, "sede": 3}}, "mc.sede"),
        ({"diagnostics": {"plateau": [5.0, 15.0]}}, "diagnostics.plateau"),
    ],
)
def test_invalid_configurations(tmp_path, overrides, key):
    with pytest.raises(ConfigError) as excinfo:
        load_config(write_config(tmp_path, **overrides), environ={})
    assert excinfo.value.payload.get("key") == key


def test_missing_measure(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"domain": [[0.0, 1.0]], "run": ["spectral"]}), encoding="utf-8")
    with pytest.raises(ConfigError, match="missing key 'measure'"):
        load_config(path, environ={})


def test_invalid_json(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text('{"run": ["spectral",]', encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(path, environ={})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read configuration"):
        load_config(tmp_path / "absent.json", environ={})


def test_table_only_scenario_needs_no_measure(tmp_path):
    cfg = ScenarioConfig.from_dict({"run": ["table61"], "table": {"p": 2.0, "n": 50}}, base_dir=tmp_path)
    assert cfg.measure is None
    assert cfg.table.p == 2.0
    with pytest.raises(ConfigError):
        cfg.start_point
    with pytest.raises(ConfigError):
        cfg.with_overrides(run=("spectral",))


def test_with_overrides(tmp_path):
    cfg = load_config(write_config(tmp_path), environ={})
    updated = cfg.with_overrides(run=("simulate", "simulate"), threads=3, output_dir=tmp_path / "elsewhere", seed=5)
    assert updated.run == ("simulate",)
    assert updated.threads == 3
    assert updated.output_dir == tmp_path / "elsewhere"
    assert updated.mc.seed == 5
    # the original is frozen and untouched
    assert cfg.mc.seed == 7
    with pytest.raises(ConfigError):
        cfg.with_overrides(threads=0)


def test_to_dict_reflects_the_scenario(tmp_path):
    cfg = load_config(write_config(tmp_path, start=None), environ={})
    document = cfg.to_dict()
    assert document["start"] == 0.0
    assert document["mc"]["time_grid"] == "auto"
    assert document["domain"] == [[0.0, math.pi]]
    again = ScenarioConfig.from_dict(document, base_dir=Path(tmp_path))
    assert again.run == cfg.run
    assert again.mc == cfg.mc
    assert again.grid == cfg.grid


def test_typo_in_a_key_is_not_silently_ignored(tmp_path):
    with pytest.raises(ConfigError, match="unknown configuration key 'mc.path'"):
        load_config(write_config(tmp_path, mc={"path": 5000}), environ={})


def test_null_measure_reads_as_absent_for_table_runs(tmp_path):
    cfg = ScenarioConfig.from_dict({"run": ["table61"], "measure": None, "domain": None}, base_dir=tmp_path)
    assert cfg.measure is None
    assert cfg.domain is None
