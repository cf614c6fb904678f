"""Command-line front end: train, sweep, report, oracle."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .envs import DistractorChain, optimal_return_oracle
from .figures import (emit_error_routing_figure, emit_reliability_figure,
                      emit_triad_figure)
from .harness import TrainConfig, discover_runs, run_experiment, sweep


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gammaroute",
                                     description="Multi-timescale PPO experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the config's actor mode")
    p_train.add_argument("--config", required=True, help="path to a YAML config")
    p_train.add_argument("--seed", type=int, default=None,
                         help="run a single seed instead of the config's seed list")

    p_sweep = sub.add_parser("sweep", help="train all seeds x all listed modes")
    p_sweep.add_argument("--config", required=True, help="path to a YAML config")

    p_report = sub.add_parser("report", help="emit an SVG figure from finished runs")
    p_report.add_argument("--runs", required=True, help="output root of a sweep")
    p_report.add_argument("--figure", required=True,
                          choices=("triad", "error", "reliability"))
    p_report.add_argument("--out", default=None, help="SVG output path")

    p_oracle = sub.add_parser("oracle", help="exact chain solution at one gamma")
    p_oracle.add_argument("--env", required=True, choices=("distractor_chain",))
    p_oracle.add_argument("--gamma", type=float, required=True)
    return parser


def _load_config(path: str) -> TrainConfig:
    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"config file not found: {config_path}")
    return TrainConfig.load(config_path)


def _cmd_train(args) -> int:
    config = _load_config(args.config)
    artifacts = run_experiment(config, seed=args.seed)
    for art in artifacts:
        print(f"run complete: {art.run_dir}")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args.config)
    results = sweep(config)
    for mode, artifacts in results.items():
        print(f"{mode}: {len(artifacts)} seed(s) in {config.resolved_out_dir() / mode}")
    return 0


def _cmd_report(args) -> int:
    root = Path(args.runs)
    runs = discover_runs(root)
    if not runs:
        print(f"no completed runs under {root}", file=sys.stderr)
        return 1

    out = Path(args.out) if args.out else root / f"{args.figure}.svg"
    if args.figure == "triad":
        if "attention" not in runs:
            print("triad figure needs attention-mode runs", file=sys.stderr)
            return 1
        emit_triad_figure(runs["attention"], out)
    elif args.figure == "error":
        if "error" not in runs:
            print("error figure needs error-mode runs", file=sys.stderr)
            return 1
        emit_error_routing_figure(runs["error"], out)
    else:
        if len(runs) < 2:
            print("reliability figure needs at least two conditions", file=sys.stderr)
            return 1
        emit_reliability_figure(runs, out)
    print(f"wrote {out}")
    return 0


def _cmd_oracle(args) -> int:
    solution = optimal_return_oracle(DistractorChain(), args.gamma)
    print(f"label: {solution.label}")
    print(f"value: {solution.value!r}")
    print(f"greedy_return: {solution.greedy_return!r}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"train": _cmd_train, "sweep": _cmd_sweep,
                "report": _cmd_report, "oracle": _cmd_oracle}
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
