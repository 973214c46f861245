"""Command-line entry point.

Commands: run, grid, ablation. Each takes --config <json> --out <dir>
[--workers k] [--seed s]; the seed flag overrides the config's seed. Config
files are strict JSON mirrors of ExperimentConfig (unknown fields rejected).
Exit codes: 0 ok, 1 runtime failure, 2 invalid config/arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone

from . import __version__, figures, report
from .errors import ConfigError, FedPromptError
from .orchestrator import ExperimentConfig, ablation_generator, run_protocol, temperature_grid


def _load_config(path: str, seed_override: int | None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as e:
        raise ConfigError("<file>", f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"{path} is not valid JSON (line {e.lineno}: {e.msg})") from e
    if not isinstance(data, dict):
        raise ConfigError("<file>", "config must be a JSON object")
    cfg = ExperimentConfig.from_dict(data)
    if seed_override is not None:
        cfg = replace(cfg, seed=seed_override).validate()
    return cfg


def _parse_taus(text: str, flag: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(flag, f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise ConfigError(flag, "no temperatures given")
    return values


def cmd_run(config_path: str, out_dir: str, workers: int = 1, seed: int | None = None) -> int:
    try:
        cfg = _load_config(config_path, seed)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    started = datetime.now(timezone.utc)
    try:
        metrics = run_protocol(cfg, workers=workers)
    except FedPromptError as e:
        print(f"error: run failed: {e}", file=sys.stderr)
        return 1
    os.makedirs(out_dir, exist_ok=True)
    outputs = []
    metrics_path = os.path.join(out_dir, "metrics.csv")
    report.write_metrics_csv(metrics, metrics_path)
    outputs.append(metrics_path)
    if any(rm.gen_loss_curve for rm in metrics):
        curves_path = os.path.join(out_dir, "gen_curves.csv")
        report.write_gen_curves_csv(metrics, curves_path)
        outputs.append(curves_path)
    fig_path = os.path.join(out_dir, "metrics.png")
    figures.render_run(metrics, fig_path)
    outputs.append(fig_path)
    report.write_manifest(cfg, started, outputs, os.path.join(out_dir, "manifest.json"), __version__)
    print(f"wrote {len(outputs)} files to {out_dir}")
    return 0


def cmd_grid(config_path: str, taus1: list[float], taus2: list[float],
             out_dir: str, workers: int = 1, seed: int | None = None) -> int:
    try:
        cfg = _load_config(config_path, seed)
        if any(t <= 0 for t in taus1 + taus2):
            raise ConfigError("taus", "temperatures must be positive")
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    started = datetime.now(timezone.utc)
    try:
        matrix = temperature_grid(cfg, taus1, taus2, workers=workers)
    except FedPromptError as e:
        print(f"error: grid failed: {e}", file=sys.stderr)
        return 1
    os.makedirs(out_dir, exist_ok=True)
    grid_path = os.path.join(out_dir, "grid.csv")
    report.write_grid_csv(matrix, taus2, grid_path)
    fig_path = os.path.join(out_dir, "grid.png")
    figures.render_grid(matrix, taus1, taus2, fig_path)
    report.write_manifest(cfg, started, [grid_path, fig_path],
                          os.path.join(out_dir, "manifest.json"), __version__)
    print(f"wrote grid to {out_dir}")
    return 0


def cmd_ablation(config_path: str, out_dir: str, workers: int = 1, seed: int | None = None) -> int:
    try:
        cfg = _load_config(config_path, seed)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    started = datetime.now(timezone.utc)
    try:
        series = ablation_generator(cfg, workers=workers)
    except FedPromptError as e:
        print(f"error: ablation failed: {e}", file=sys.stderr)
        return 1
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "ablation.csv")
    report.write_ablation_csv(series, csv_path)
    fig_path = os.path.join(out_dir, "ablation.png")
    figures.render_ablation(series, fig_path)
    report.write_manifest(cfg, started, [csv_path, fig_path],
                          os.path.join(out_dir, "manifest.json"), __version__)
    print(f"wrote ablation to {out_dir}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedprompt", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=1, help="client parallelism (results unaffected)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    common(sub.add_parser("run", help="run one experiment or baseline"))
    grid = sub.add_parser("grid", help="temperature sensitivity grid")
    common(grid)
    grid.add_argument("--taus1", default="0.1,1,10", help="comma-separated local temperatures")
    grid.add_argument("--taus2", default="0.1,1,10", help="comma-separated global temperatures")
    common(sub.add_parser("ablation", help="paired attention-vs-mlp generator runs"))
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.workers, args.seed)
    if args.command == "grid":
        try:
            taus1 = _parse_taus(args.taus1, "--taus1")
            taus2 = _parse_taus(args.taus2, "--taus2")
        except ConfigError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        return cmd_grid(args.config, taus1, taus2, args.out, args.workers, args.seed)
    return cmd_ablation(args.config, args.out, args.workers, args.seed)


def entrypoint() -> None:
    raise SystemExit(main())
