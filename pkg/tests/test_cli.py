import json

import pytest

from qlab.cli import build_parser, main
from qlab.reports import validate_summary
from tests.utils import write_config

ATOM_MEASURE = {"type": "atoms", "atoms": [{"x": 0.3, "w": 1.0}]}


def _summary(out):
    return json.loads((out / "summary.json").read_text(encoding="utf-8"))


def test_parser_rejects_unknown_commands():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["explode", "--config", "x.json"])


def test_spectral_command(tmp_path):
    out = tmp_path / "spectral"
    assert main(["spectral", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0

    summary = _summary(out)
    validate_summary(summary)
    assert summary["run"] == ["spectral"]
    assert summary["condition_status"] == "neumann"
    assert summary["omega"] == 2.0
    assert summary["mu1"] == pytest.approx(1.727, abs=1e-2)
    assert summary["decay_rate"] == pytest.approx(1.0 / summary["mu1"], rel=1e-9)
    assert summary["quasi_nilpotent"] is False
    assert summary["clustering_counts"]["0.05"] >= 1

    lines = (out / "prediction.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,semigroup,asymptotic"
    assert len(lines) == 302
    assert lines[1].startswith("0,1,")
    assert not (out / "error.json").exists()


def test_runs_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, run=["spectral", "simulate"])
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["run", "--config", str(cfg), "--out", str(first)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(second)]) == 0

    for name in ("summary.json", "prediction.csv", "survival.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    summary = _summary(first)
    assert summary["mc_paths"] == 20000
    assert summary["zero_jump_check"]["t"] == 1.0


def test_output_dir_from_config(tmp_path):
    assert main(["spectral", "--config", str(write_config(tmp_path))]) == 0
    assert (tmp_path / "out" / "summary.json").exists()


def test_violated_condition_exits_with_two(tmp_path):
    measure = {"type": "atoms", "atoms": [{"x": 0.3, "w": 1.0}, {"x": -0.3, "w": 1.0}]}
    cfg = write_config(tmp_path, measure=measure, domain=[[0.0, 1.0]], start=0.5)
    out = tmp_path / "violated"
    metrics = tmp_path / "metrics.prom"

    assert main(["spectral", "--config", str(cfg), "--out", str(out), "--metrics-file", str(metrics)]) == 2

    error = json.loads((out / "error.json").read_text(encoding="utf-8"))
    assert error["error"] == "ConditionViolatedError"
    assert error["exit_code"] == 2
    assert error["omega"] == 2.0
    assert error["t_norm"] >= error["omega"]
    assert not (out / "summary.json").exists()
    assert 'qlab_stages_total{stage="operator",status="ConditionViolatedError"} 1.0' in metrics.read_text(encoding="utf-8")


def test_exit_time_for_nilpotent_atoms(tmp_path):
    cfg = write_config(
        tmp_path,
        measure=ATOM_MEASURE,
        domain=[[0.0, 1.0]],
        mc={"paths": 20000, "horizon": 40.0, "seed": 3},
        run=["exit-time"],
    )
    out = tmp_path / "exit"
    metrics = tmp_path / "metrics.prom"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--metrics-file", str(metrics)]) == 0

    summary = _summary(out)
    assert summary["condition_status"] == "nilpotent"
    assert summary["nilpotency_index"] == 4
    assert summary["mean_exit_time_spectral"] == 4.0
    assert summary["mean_exit_time_mc"] == pytest.approx(4.0, rel=0.02)

    text = metrics.read_text(encoding="utf-8")
    assert 'qlab_condition_status{status="nilpotent"} 1.0' in text
    assert "qlab_paths_simulated_total 20000.0" in text
    assert 'qlab_stages_total{stage="exit-time",status="ok"} 1.0' in text


def test_table_without_measure(tmp_path):
    cfg = tmp_path / "table.json"
    cfg.write_text(json.dumps({"run": ["table61"], "table": {"p": 1.0, "n": 200}}), encoding="utf-8")
    out = tmp_path / "table"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0

    lines = (out / "table61.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 6
    assert lines[0].startswith("label,p_omega,tabulated,equation_root")
    document = json.loads((out / "table61.json").read_text(encoding="utf-8"))
    assert document["operator_monotone"] is True
    summary = _summary(out)
    assert summary["omega"] is None
    assert summary["table61"] == document


def test_validate_command(tmp_path):
    cfg = write_config(
        tmp_path,
        grid={"n": 200},
        mc={"paths": 200_000, "horizon": 30.0, "seed": 3},
        diagnostics={"plateau_window": [5.0, 10.0]},
    )
    out = tmp_path / "validate"
    assert main(["validate", "--config", str(cfg), "--out", str(out), "--threads", "2"]) == 0

    summary = _summary(out)
    validation = summary["validation"]
    assert set(validation) == {"decay_rate", "prefactor", "mean_exit_time"}
    assert all(entry["passed"] for entry in validation.values())
    assert summary["prefactor_plateau"] > 0.0
    assert summary["fit_window"] is not None


def test_invalid_json_writes_error(tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{not json", encoding="utf-8")
    out = tmp_path / "broken"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 3

    error = json.loads((out / "error.json").read_text(encoding="utf-8"))
    assert error["error"] == "ConfigError"
    assert error["exit_code"] == 3


def test_bad_thread_count(tmp_path):
    assert main(["spectral", "--config", str(write_config(tmp_path)), "--threads", "0"]) == 3
