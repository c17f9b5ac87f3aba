"""Matched-pair shuffle-augmentation ablation.

For each requested time-series depth and seed, trains one model with per-epoch
channel shuffling and one without, predicts the test split, and scores both
through the detection pipeline's own eval CLI (patchset mode). The dataset
root holds one pipeline-built sub-dataset per depth, named T01, T05, ...;
requesting a depth without a sub-dataset is an error.
"""

from __future__ import annotations

import csv
import json
import subprocess
from dataclasses import replace
from pathlib import Path

from .data import DatasetFormatError, dataset_depth
from .predict import write_patch_masks
from .train import ToyModelConfig, load_weights, train

OWS_CLI = "ows"


def _run_pipeline_eval(pred_dir: Path, dataset_dir: Path, report_path: Path, split: str = "test") -> dict:
    cmd = [
        OWS_CLI,
        "eval",
        "--pred-dir",
        str(pred_dir),
        "--dataset",
        str(dataset_dir),
        "--split",
        split,
        "--out-report",
        str(report_path),
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"pipeline eval failed ({proc.returncode}): {proc.stdout}{proc.stderr}")
    return json.loads(report_path.read_text(encoding="utf-8"))


def ablation(
    dataset_root: str | Path,
    t_values: list[int],
    seeds: list[int],
    base_config: ToyModelConfig | None = None,
    out_dir: str | Path = "ablation",
) -> Path:
    """Train matched shuffle-on/off pairs; returns the CSV of per-run IoU."""
    dataset_root = Path(dataset_root)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for t in sorted(t_values):
        dataset_dir = dataset_root / f"T{t:02d}"
        if not dataset_dir.exists():
            raise DatasetFormatError(f"no sub-dataset for depth {t}: {dataset_dir} missing")
        depth = dataset_depth(dataset_dir)
        if depth != t:
            raise DatasetFormatError(f"{dataset_dir} has T={depth}, expected {t}")
        for seed in seeds:
            for shuffle in (True, False):
                tag = f"T{t:02d}_seed{seed}_shuffle{int(shuffle)}"
                run_dir = out_dir / tag
                config = (
                    replace(base_config, in_channels=t, seed=seed)
                    if base_config is not None
                    else ToyModelConfig(in_channels=t, seed=seed)
                )
                record = train(dataset_dir, config, shuffle_augmentation=shuffle, out_dir=run_dir)
                _, model = load_weights(record.weights_path)
                pred_dir = run_dir / "pred_test"
                write_patch_masks(model, dataset_dir, pred_dir, split="test")
                report = _run_pipeline_eval(pred_dir, dataset_dir, run_dir / "report.json")
                rows.append(
                    {
                        "T": t,
                        "shuffle": int(shuffle),
                        "seed": seed,
                        "iou": f"{report['pixel']['iou']:.6f}",
                        "fscore": f"{report['pixel']['fscore']:.6f}",
                        "selected_epoch": record.selected_epoch,
                    }
                )

    csv_path = out_dir / "ablation.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return csv_path
