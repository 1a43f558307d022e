"""Command line interface.

    islandsis <subcommand> <config.yaml> [--seed N] [--out DIR]

Subcommands: simulate, meanfield, converge, classify, taylor, compare,
suite, plotdata.  The only positional arguments are the subcommand and the
config path; everything else lives in the config file.  --seed and --out
override the config; the ISLANDSIS_OUT environment variable overrides the
config's output directory (but not --out).

Exit status: 0 on success, 1 when a requested check fails, 2 on a config or
hypothesis error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from ..analysis import UnmetHypothesisError, classify_multi, classify_single, taylor_coefficients
from ..topology import is_regular, superdegree
from .config import ConfigError, ExperimentConfig
from .experiments import run_compare, run_converge, run_meanfield, run_simulate
from .suites import run_theorem_suite
from .trajio import emit_plot_data

ENV_OUT = "ISLANDSIS_OUT"

COMMANDS = (
    "simulate",
    "meanfield",
    "converge",
    "classify",
    "taylor",
    "compare",
    "suite",
    "plotdata",
)


def _resolve_out(cfg: ExperimentConfig, flag: str | None) -> Path:
    if flag:
        return Path(flag)
    env = os.environ.get(ENV_OUT)
    if env:
        return Path(env)
    return Path(cfg.raw.get("out", "out"))


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _cmd_classify(cfg: ExperimentConfig, out: Path) -> int:
    net = cfg.build_net()
    params = cfg.meanfield_params(net)
    if not params.is_symmetric_configuration:
        raise ConfigError("strains", "classification needs a symmetric configuration "
                                      "(equal sizes, one uniform rate per strain)")
    if not is_regular(net):
        raise UnmetHypothesisError("supernetwork is not regular")
    gammas = [params.uniform_rate(k) for k in range(1, params.num_strains + 1)]
    if len(gammas) == 1:
        result = classify_single(net, gammas[0])
    else:
        result = classify_multi(net, gammas)
    payload = dict(result.to_dict(), superdegree=superdegree(net, 1))
    _emit(payload)
    return 0


def _cmd_taylor(cfg: ExperimentConfig, out: Path) -> int:
    net = cfg.build_net()
    params = cfg.meanfield_params(net)
    y0 = cfg.initial_fractions(net)
    order = cfg.raw.get("taylor_order", 6)
    if not isinstance(order, int) or isinstance(order, bool):
        raise ConfigError("taylor_order", f"expected an integer, got {order!r}")
    table = taylor_coefficients(params, y0, order)
    payload = {
        "n_max": table.n_max,
        "coefficients": {
            f"island{i + 1}:strain{k + 1}": table.coeff[:, i, k].tolist()
            for i in range(y0.shape[0])
            for k in range(y0.shape[1])
        },
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "taylor_table.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _emit(payload)
    return 0


def _cmd_suite(cfg: ExperimentConfig, out: Path) -> int:
    reports = [run_theorem_suite(name) for name in cfg.suites()]
    payload = {"suites": [r.to_dict() for r in reports], "passed": all(r.passed for r in reports)}
    out.mkdir(parents=True, exist_ok=True)
    (out / "suite_report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    for report in reports:
        for check in report.checks:
            print(f"[{'PASS' if check.passed else 'FAIL'}] {report.suite}:{check.name}")
    return 0 if payload["passed"] else 1


def _cmd_plotdata(cfg: ExperimentConfig, out: Path) -> int:
    section = cfg.raw.get("plotdata", {})
    if not isinstance(section, dict):
        raise ConfigError("plotdata", "expected a mapping")
    inputs = section.get("inputs", [])
    if not isinstance(inputs, list):
        raise ConfigError("plotdata.inputs", "expected a list of trajectory files")
    missing = [p for p in inputs if not Path(p).exists()]
    if missing:
        raise ConfigError("plotdata.inputs", f"missing input files: {missing}")
    mode = section.get("mode", "series")
    if mode not in ("series", "overlay"):
        raise ConfigError("plotdata.mode", f"expected series|overlay, got {mode!r}")
    out.mkdir(parents=True, exist_ok=True)
    target = out / section.get("output", "plotdata.csv")
    rows = emit_plot_data(inputs, mode, target)
    _emit({"output": str(target), "rows": rows})
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="islandsis", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("config", help="path to the YAML experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    args = parser.parse_args(argv)

    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg.raw["seed"] = args.seed
        out = _resolve_out(cfg, args.out)

        if args.command == "simulate":
            _emit(run_simulate(cfg, out))
            return 0
        if args.command == "meanfield":
            _emit(run_meanfield(cfg, out))
            return 0
        if args.command == "converge":
            report = run_converge(cfg, out)
            _emit(report.to_dict())
            return 0 if report.monotone_trend else 1
        if args.command == "classify":
            return _cmd_classify(cfg, out)
        if args.command == "taylor":
            return _cmd_taylor(cfg, out)
        if args.command == "compare":
            report = run_compare(cfg, out)
            _emit(report)
            return 0 if report.get("passed", True) else 1
        if args.command == "suite":
            return _cmd_suite(cfg, out)
        if args.command == "plotdata":
            return _cmd_plotdata(cfg, out)
        raise AssertionError(args.command)
    except (ConfigError, UnmetHypothesisError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
