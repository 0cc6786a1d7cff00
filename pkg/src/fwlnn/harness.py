"""Experiment configuration, execution and reporting."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import network, zoo
from .errors import InvalidArgument
from .network import ExecConfig, Netlist
from .optics import NoiseSpec, QuantizationSpec

NETWORKS = ("umult", "plantran", "boolean", "sigma-and")
SUMMARY_COLUMNS = ("network", "np", "nc", "post_mse", "seed", "eta", "threshold", "window")


def detect_convergence(series: Sequence[float], threshold: float = 0.02, window: int = 3) -> int | None:
    """First index starting ``window`` consecutive values below ``threshold``."""
    if not threshold > 0 or window < 1:
        raise InvalidArgument("threshold must be positive and window at least 1")
    run = 0
    for i, v in enumerate(series):
        run = run + 1 if v < threshold else 0
        if run == window:
            return i - window + 1
    return None


@dataclass(frozen=True)
class ConvergenceRule:
    threshold: float = 0.02
    window: int = 3

    def __post_init__(self):
        if not self.threshold > 0 or self.window < 1:
            raise InvalidArgument("threshold must be positive and window at least 1")


@dataclass(frozen=True)
class ExperimentConfig:
    network: str
    np: int = 256
    # Boolean function name or "all-separable"; ignored by other networks
    task: str | None = None
    trials: int = 1  # random tasks (plantran) or repeats per function (boolean)
    seed: int = 0
    quant: QuantizationSpec = QuantizationSpec()
    noise: NoiseSpec = NoiseSpec()
    rule: ConvergenceRule = ConvergenceRule()
    max_steps: int = 200
    eta: float = zoo.DEFAULT_ETA
    golden: bool = True  # load the bundled netlist instead of retraining
    label: str = ""

    def __post_init__(self):
        if self.network not in NETWORKS:
            raise InvalidArgument(f"unknown network {self.network!r}")
        if int(self.np) != self.np or self.np < 1:
            raise InvalidArgument("np must be a positive integer")
        if self.trials < 1 or self.max_steps < 1:
            raise InvalidArgument("trials and max_steps must be positive")
        if not self.eta > 0:
            raise InvalidArgument("eta must be positive")
        if self.golden and self.eta != zoo.DEFAULT_ETA and self.network in ("plantran", "boolean"):
            raise InvalidArgument("golden netlists are built for the default eta; set golden=false")

    def name(self) -> str:
        return self.label or f"{self.network}-np{self.np}" + (f"-{self.task}" if self.task else "")

    def to_json(self) -> dict:
        d = asdict(self)
        d["quant"] = {"bits": self.quant.bits}
        d["noise"] = {"sigma": self.noise.sigma, "seed": self.noise.seed}
        d["rule"] = {"threshold": self.rule.threshold, "window": self.rule.window}
        return d

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        if "quant" in doc:
            doc["quant"] = QuantizationSpec(**doc["quant"])
        if "noise" in doc:
            doc["noise"] = NoiseSpec(**doc["noise"])
        if "rule" in doc:
            doc["rule"] = ConvergenceRule(**doc["rule"])
        return cls(**doc)


@dataclass
class TrialRecord:
    task: str
    seed: int
    mse_series: list[float]
    nc: int | None
    post_mse: float | None


@dataclass
class RunRecord:
    config: ExperimentConfig
    mse_series: list[float]  # mean over trials, per step
    nc: int | None  # median over trials; None if the median trial never converged
    post_mse: float | None
    trials: list[TrialRecord] = field(default_factory=list)
    wall_time: float = 0.0
    error: str | None = None

    @property
    def failed(self) -> bool:
        if self.error is not None:
            return True
        return self.config.network in ("plantran", "boolean") and any(t.nc is None for t in self.trials)


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def post_convergence_mse(series: Sequence[float], nc: int | None) -> float | None:
    return None if nc is None else float(np.mean(series[nc:]))


def get_network(cfg: ExperimentConfig) -> Netlist:
    return zoo.load_golden(cfg.network) if cfg.golden else zoo.build(cfg.network, cfg.eta)


def _exec(cfg: ExperimentConfig, seed: int) -> ExecConfig:
    return ExecConfig(np=cfg.np, seed=seed, quant=cfg.quant, noise=replace(cfg.noise, seed=cfg.noise.seed + seed))


def _run_trial(net: Netlist, cfg: ExperimentConfig, trial: int, fn: zoo.BooleanFunction | None) -> TrialRecord:
    seed = trial_seed(cfg.seed, trial)
    ex = _exec(cfg, seed)
    if cfg.network in ("umult", "sigma-and"):
        data = zoo.gen_product_data(cfg.max_steps, seed)
        trace = network.run(net, [p.x for p in data], ex)
        mse = [(rec[net.outputs[0]] - p.y) ** 2 for rec, p in zip(trace.outputs, data)]
        return TrialRecord("product", seed, mse, None, float(np.mean(mse)))
    if cfg.network == "plantran":
        task = zoo.PlanTranTask.random(seed)
        data = zoo.gen_plantran_data(task, cfg.max_steps)
        inputs = [(p.x[0], p.y) for p in data]
        label = f"w={task.w:.4f}"
    else:
        data = zoo.gen_boolean_data(fn, cfg.max_steps, seed)
        inputs = [(p.x[0], p.x[1], p.y) for p in data]
        label = fn.name
    trace = network.run(net, inputs, ex)
    mse = [float((rec[net.outputs[0]] - p.y) ** 2) for rec, p in zip(trace.outputs, data)]
    nc = detect_convergence(mse, cfg.rule.threshold, cfg.rule.window)
    return TrialRecord(label, seed, mse, nc, post_convergence_mse(mse, nc))


def _functions(cfg: ExperimentConfig) -> list[zoo.BooleanFunction]:
    if cfg.task in (None, "all-separable"):
        return zoo.enumerate_separable()
    return [zoo.boolean_function(cfg.task)]


def _median_nc(ncs: list[int | None]) -> int | None:
    vals = sorted(np.inf if n is None else n for n in ncs)
    m = float(np.median(vals))
    return None if not np.isfinite(m) else int(np.floor(m))


def run_experiment(cfg: ExperimentConfig, net: Netlist | None = None) -> RunRecord:
    start = time.perf_counter()
    net = net or get_network(cfg)
    plan: list[zoo.BooleanFunction | None]
    if cfg.network == "boolean":
        plan = [f for f in _functions(cfg) for _ in range(cfg.trials)]
    else:
        plan = [None] * cfg.trials
    trials = [_run_trial(net, cfg, i, fn) for i, fn in enumerate(plan)]
    series = np.mean([t.mse_series for t in trials], axis=0).tolist()
    if cfg.network in ("umult", "sigma-and"):
        nc, post = None, float(np.mean([t.post_mse for t in trials]))
    else:
        nc = _median_nc([t.nc for t in trials])
        done = [t.post_mse for t in trials if t.post_mse is not None]
        post = float(np.median(done)) if done else None
    return RunRecord(cfg, series, nc, post, trials, time.perf_counter() - start)


def table2_suite(seed: int = 0, trials: int = 20) -> list[ExperimentConfig]:
    """The five network/np settings of the hardware results table."""
    return [
        ExperimentConfig("umult", np=128, max_steps=1000, seed=seed, label="umult-np128"),
        ExperimentConfig("plantran", np=256, trials=trials, seed=seed, label="plantran-np256"),
        ExperimentConfig("boolean", np=256, task="always-true", trials=trials, seed=seed,
                         label="boolean-np256-always-true"),
        ExperimentConfig("boolean", np=256, task="all-separable", seed=seed, label="boolean-np256-all"),
        ExperimentConfig("boolean", np=1024, task="all-separable", seed=seed, label="boolean-np1024-all"),
    ]


# ---------------------------------------------------------------- reports

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summary_rows(records: Sequence[RunRecord]) -> list[dict]:
    return [{"network": r.config.network, "np": r.config.np, "nc": r.nc, "post_mse": r.post_mse,
             "seed": r.config.seed, "eta": r.config.eta, "threshold": r.config.rule.threshold,
             "window": r.config.rule.window} for r in records]


def _csv(rows: list[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _unique_names(records: Sequence[RunRecord]) -> list[str]:
    names, seen = [], {}
    for r in records:
        base = r.config.name()
        seen[base] = seen.get(base, 0) + 1
        names.append(base if seen[base] == 1 else f"{base}-{seen[base]}")
    return names


def emit_report(records: Sequence[RunRecord], out_dir: str | Path, formats: Sequence[str] = ("csv", "json"),
                figures: bool = True) -> list[Path]:
    """Write summary, per-trial table and per-run MSE series; wall time is left out so reruns match byte for byte."""
    if not records:
        raise InvalidArgument("no records to report")
    for f in formats:
        if f not in ("csv", "json"):
            raise InvalidArgument(f"unknown report format {f!r}")
    out = Path(out_dir)
    (out / "series").mkdir(parents=True, exist_ok=True)
    names = _unique_names(records)
    written = []
    rows = summary_rows(records)
    trial_rows = [{"run": n, "task": t.task, "trial_seed": t.seed, "nc": t.nc, "post_mse": t.post_mse}
                  for n, r in zip(names, records) for t in r.trials]
    if "csv" in formats:
        written.append(_write(out / "summary.csv", _csv(rows, SUMMARY_COLUMNS)))
        written.append(_write(out / "trials.csv", _csv(trial_rows, ("run", "task", "trial_seed", "nc", "post_mse"))))
        for n, r in zip(names, records):
            series = [{"step": i, "mse": float(m)} for i, m in enumerate(r.mse_series)]
            written.append(_write(out / "series" / f"{n}.csv", _csv(series, ("step", "mse"))))
    if "json" in formats:
        doc = {"runs": [{"name": n, "summary": row, "config": r.config.to_json(), "error": r.error,
                         "trials": [asdict(t) for t in r.trials], "mse_series": r.mse_series}
                        for n, row, r in zip(names, rows, records)]}
        written.append(_write(out / "summary.json", json.dumps(doc, indent=1, sort_keys=True) + "\n"))
    if figures:
        from . import plotting

        (out / "figures").mkdir(exist_ok=True)
        for n, r in zip(names, records):
            written.append(plotting.plot_series(r, out / "figures" / f"{n}.png"))
    return written


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def load_summary_json(path: str | Path) -> list[dict]:
    return [run["summary"] for run in json.loads(Path(path).read_text())["runs"]]
