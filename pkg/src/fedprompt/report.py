"""Delimited metrics outputs and the run manifest.

All CSVs use '.' decimals, 10-significant-digit e-notation, and LF line
endings so reruns of the same config are byte-identical. The metrics CSV has
fixed columns: round, client_id (or "mean"), accuracy, gen_loss, train_loss;
client rows leave gen_loss empty, the per-round "mean" row carries the
generator loss and the mean train loss.
"""

from __future__ import annotations

import csv
import json
import math
import os
from datetime import datetime, timezone

import numpy as np

from .orchestrator import ExperimentConfig, RoundMetrics

METRICS_COLUMNS = ["round", "client_id", "accuracy", "gen_loss", "train_loss"]


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    return f"{x:.9e}"


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_metrics_csv(metrics: list[RoundMetrics], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(METRICS_COLUMNS)
        for rm in metrics:
            for n, (acc, tl) in enumerate(zip(rm.accuracies, rm.train_losses)):
                w.writerow([rm.round_index, n, fmt_float(acc), "", fmt_float(tl)])
            w.writerow([
                rm.round_index,
                "mean",
                fmt_float(rm.mean_accuracy),
                fmt_float(rm.gen_loss),
                fmt_float(float(np.mean(rm.train_losses))),
            ])


def write_gen_curves_csv(metrics: list[RoundMetrics], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["round", "step", "loss"])
        for rm in metrics:
            for step, loss in enumerate(rm.gen_loss_curve):
                w.writerow([rm.round_index, step, fmt_float(loss)])


def write_grid_csv(matrix: np.ndarray, taus2: list[float], path: str) -> None:
    """Accuracy matrix, one row per tau1 (in run order), one column per tau2."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow([f"tau2={t:g}" for t in taus2])
        for row in matrix:
            w.writerow([fmt_float(v) for v in row])


def write_ablation_csv(series: dict[str, list[RoundMetrics]], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["round", "kind", "mean_accuracy", "gen_loss"])
        for kind in sorted(series):
            for rm in series[kind]:
                w.writerow([rm.round_index, kind, fmt_float(rm.mean_accuracy), fmt_float(rm.gen_loss)])


def write_manifest(cfg: ExperimentConfig, started: datetime, outputs: list[str], path: str, version: str) -> None:
    doc = {
        "config": cfg.to_dict(),
        "version": version,
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": [os.path.basename(p) for p in outputs],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_manifest_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(json.load(fh)["config"])
