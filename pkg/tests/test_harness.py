import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fwlnn import cli, harness, zoo
from fwlnn.errors import InvalidArgument
from fwlnn.harness import ConvergenceRule, ExperimentConfig


def test_detect_convergence_examples():
    assert harness.detect_convergence([0.0] * 10) == 0
    series = list(np.linspace(0.3, 0.021, 21)) + [0.019, 0.01, 0.008, 0.005]
    assert harness.detect_convergence(series, 0.02, 3) == 21
    assert harness.detect_convergence([0.5] * 30) is None
    assert harness.detect_convergence([0.01, 0.01, 0.5, 0.01, 0.01, 0.01]) == 3
    assert harness.detect_convergence([0.01, 0.01]) is None  # window never completes
    with pytest.raises(InvalidArgument):
        harness.detect_convergence([0.1], 0.0)
    with pytest.raises(InvalidArgument):
        ConvergenceRule(window=0)


@settings(max_examples=200, deadline=None)
@given(series=st.lists(st.floats(0, 1), max_size=40), t1=st.floats(0.001, 0.5), t2=st.floats(0.001, 0.5),
       window=st.integers(1, 5))
def test_rule_monotonicity(series, t1, t2, window):
    lo, hi = sorted((t1, t2))
    a = harness.detect_convergence(series, lo, window)
    b = harness.detect_convergence(series, hi, window)
    if a is not None:
        assert b is not None and b <= a
    if b is not None:
        assert b + window <= len(series)


def test_config_validation_and_json():
    cfg = ExperimentConfig("boolean", np=1024, task="and", trials=2, seed=4, rule=ConvergenceRule(0.03, 2))
    assert ExperimentConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg
    with pytest.raises(InvalidArgument):
        ExperimentConfig("xor-net")
    with pytest.raises(InvalidArgument):
        ExperimentConfig("plantran", np=0)
    with pytest.raises(InvalidArgument):
        ExperimentConfig.from_json({"network": "plantran", "bogus": 1})
    with pytest.raises(InvalidArgument):
        ExperimentConfig("plantran", eta=0.7)  # golden nets are fixed to the default rate
    ExperimentConfig("plantran", eta=0.7, golden=False)


@pytest.fixture(scope="module")
def small_records():
    return [harness.run_experiment(ExperimentConfig("boolean", task="always-true", trials=2, max_steps=60, seed=1)),
            harness.run_experiment(ExperimentConfig("umult", np=128, max_steps=100, seed=1))]


def test_record_invariants(small_records):
    b, u = small_records
    assert len(b.trials) == 2 and len(b.mse_series) == 60
    for t in b.trials:
        if t.nc is None:
            assert t.post_mse is None
        else:
            assert t.nc <= len(t.mse_series)
            assert t.post_mse == pytest.approx(np.mean(t.mse_series[t.nc:]))
    assert u.nc is None and u.post_mse == pytest.approx(np.mean(u.mse_series))
    assert not u.failed


def test_report_files(tmp_path, small_records):
    written = harness.emit_report(small_records[:1], tmp_path)
    names = {p.relative_to(tmp_path).as_posix() for p in written}
    assert {"summary.csv", "summary.json", "trials.csv"} <= names
    assert len([n for n in names if n.startswith("series/")]) == 1
    assert len([n for n in names if n.startswith("figures/") and n.endswith(".png")]) == 1
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and list(rows[0]) == list(harness.SUMMARY_COLUMNS)
    with open(tmp_path / "series" / "boolean-np256-always-true.csv") as fh:
        series = list(csv.DictReader(fh))
    assert [float(r["mse"]) for r in series] == pytest.approx(small_records[0].mse_series, abs=0)


def test_csv_json_parity(tmp_path, small_records):
    harness.emit_report(small_records, tmp_path, figures=False)
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    js = harness.load_summary_json(tmp_path / "summary.json")
    assert len(rows) == len(js) == 2
    for r, j in zip(rows, js):
        for col in harness.SUMMARY_COLUMNS:
            if j[col] is None:
                assert r[col] == ""
            elif isinstance(j[col], str):
                assert r[col] == j[col]
            else:
                assert float(r[col]) == float(j[col])


def test_report_rejects_empty(tmp_path):
    with pytest.raises(InvalidArgument):
        harness.emit_report([], tmp_path)


def test_reports_byte_identical(tmp_path):
    cfg = ExperimentConfig("plantran", trials=3, max_steps=40, seed=9)
    for d in ("a", "b"):
        harness.emit_report([harness.run_experiment(cfg)], tmp_path / d, figures=False)
    for name in ("summary.csv", "summary.json", "trials.csv", "series/plantran-np256.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_suite_shape():
    cfgs = harness.table2_suite()
    assert len(cfgs) == 5
    assert [(c.network, c.np) for c in cfgs] == [("umult", 128), ("plantran", 256), ("boolean", 256),
                                                 ("boolean", 256), ("boolean", 1024)]
    assert len({c.name() for c in cfgs}) == 5


def test_failed_run_flagged():
    rec = harness.run_experiment(ExperimentConfig("boolean", task="and", max_steps=3))
    assert rec.nc is None and rec.failed


def test_cli_throughput(capsys):
    assert cli.main(["throughput", "256", "256", "1e-4"]) == 0
    assert "1.966e+17" in capsys.readouterr().out


def test_cli_validate(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(zoo.load_golden("plantran").dumps())
    assert cli.main(["validate", str(good)]) == 0
    assert "4 layers, 29 neurons, 100 synapses" in capsys.readouterr().out
    doc = json.loads(good.read_text())
    doc["synapses"].append({"from": "nowhere", "to": "forward/out", "weight": 1.0, "delay": 0})
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert cli.main(["validate", str(bad)]) == 1
    assert "dangling-edge" in capsys.readouterr().out


def test_cli_run_with_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"network": "boolean", "task": "always-true", "max_steps": 80}))
    out = tmp_path / "out"
    code = cli.main(["run", str(cfg), "--np", "128", "--seed", "3", "--bits", "8", "--sigma", "0.01",
                     "--out", str(out), "--no-figures"])
    assert code == 0
    doc = json.loads((out / "summary.json").read_text())["runs"][0]
    assert doc["config"]["np"] == 128 and doc["config"]["seed"] == 3
    assert doc["config"]["quant"] == {"bits": 8} and doc["config"]["noise"]["sigma"] == 0.01


def test_cli_exit_code_on_failure(tmp_path):
    cfg = tmp_path / "short.json"
    cfg.write_text(json.dumps({"network": "boolean", "task": "and", "max_steps": 3}))
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "s"), "--no-figures"]) == 1
    assert cli.main(["run", "--network", "boolean", "--task", "no-such-fn", "--out", str(tmp_path / "e"),
                     "--no-figures"]) == 1
