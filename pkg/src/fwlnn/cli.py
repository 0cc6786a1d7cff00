"""Command-line entry point: run, suite, throughput, validate, golden."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, network, optics, zoo
from .errors import InvalidArgument
from .harness import ExperimentConfig
from .optics import NoiseSpec, QuantizationSpec


def _overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.np is not None:
        changes["np"] = args.np
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.bits is not None:
        changes["quant"] = QuantizationSpec(args.bits)
    if args.sigma is not None:
        changes["noise"] = NoiseSpec(args.sigma, cfg.noise.seed)
    return replace(cfg, **changes) if changes else cfg


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--np", type=int, help="pulse-train length")
    p.add_argument("--seed", type=int)
    p.add_argument("--bits", type=int, help="signal quantization bits (0 or 8-12)")
    p.add_argument("--sigma", type=float, help="detector noise stddev")
    p.add_argument("--out", type=Path, default=Path("results"), help="report directory")
    p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p.add_argument("--no-figures", action="store_true")


def _report(records, args) -> int:
    formats = ("csv", "json") if args.format == "both" else (args.format,)
    harness.emit_report(records, args.out, formats, figures=not args.no_figures)
    for r in records:
        status = "FAILED" if r.failed else "ok"
        print(f"{r.config.name():32s} np={r.config.np:<5d} nc={r.nc} post_mse={r.post_mse} [{status}]")
    return 1 if any(r.failed for r in records) else 0


def _run_safely(cfg: ExperimentConfig) -> harness.RunRecord:
    try:
        return harness.run_experiment(cfg)
    except (InvalidArgument, RuntimeError) as exc:
        return harness.RunRecord(cfg, [], None, None, error=f"{type(exc).__name__}: {exc}")


def cmd_run(args) -> int:
    doc = json.loads(args.config.read_text()) if args.config else {}
    if args.network:
        doc["network"] = args.network
    if "network" not in doc:
        raise InvalidArgument("a network is required (config file or --network)")
    if args.task:
        doc["task"] = args.task
    if args.trials:
        doc["trials"] = args.trials
    cfg = _overrides(ExperimentConfig.from_json(doc), args)
    return _report([_run_safely(cfg)], args)


def cmd_suite(args) -> int:
    cfgs = [_overrides(c, args) for c in harness.table2_suite(args.seed or 0, args.trials)]
    return _report([_run_safely(c) for c in cfgs], args)


def cmd_throughput(args) -> int:
    rate = optics.throughput(args.n_inputs, args.n_outputs, args.delta_x)
    print(f"transit time {optics.transit_time(args.delta_x):.4g} s, throughput {rate:.4g} ops/s")
    return 0


def cmd_validate(args) -> int:
    net = network.Netlist.loads(args.netlist.read_text())
    diags = network.validate(net)
    for d in diags:
        print(f"{d.code}: {d.message}")
    if not diags:
        st = net.stats()
        print(f"valid: {st.layers} layers, {st.neurons} neurons, {st.synapses} synapses, encoding {net.encoding}")
    return 1 if diags else 0


def cmd_golden(args) -> int:
    for path in zoo.save_golden(args.dir):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fwlnn", description="Fixed-weight learning network simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("config", type=Path, nargs="?", help="experiment config JSON")
    p.add_argument("--network", choices=harness.NETWORKS)
    p.add_argument("--task", help="Boolean function name or all-separable")
    p.add_argument("--trials", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="reproduce the five-row results table")
    p.add_argument("--trials", type=int, default=20)
    _add_common(p)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("throughput", help="optical multiply-accumulate rate")
    p.add_argument("n_inputs", type=int)
    p.add_argument("n_outputs", type=int)
    p.add_argument("delta_x", type=float, help="mask thickness in metres")
    p.set_defaults(func=cmd_throughput)

    p = sub.add_parser("validate", help="check a netlist JSON file")
    p.add_argument("netlist", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("golden", help="rebuild the bundled netlists")
    p.add_argument("dir", type=Path)
    p.set_defaults(func=cmd_golden)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
