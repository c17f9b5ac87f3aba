"""Acceptance gate for the training harness.

Two criteria: the shuffle-augmentation ablation shows its directional effect
on order-biased data, and scene predictions replayed through the detection
pipeline score identically to local binarization of the same raster.
Run with `pytest trainer/tests/test_trainer_acceptance.py -v -s`.
"""

from __future__ import annotations

import csv
import json
import shutil
import subprocess
import time

import numpy as np

from ows_trainer.ablation import ablation
from ows_trainer.predict import binarize_raster, predict_scene
from ows_trainer.train import ToyModelConfig, load_weights, train


def _report(name: str) -> None:
    print(f"ACCEPTANCE {name}: PASS")


def _ows(*argv: object) -> None:
    cmd = [shutil.which("ows")] + [str(a) for a in argv]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, f"{cmd}: {proc.stdout}{proc.stderr}"


def test_augmentation_ablation_directional(workspace, tmp_path):
    """Shuffle-on beats shuffle-off at T=5 for every seed; arms tie at T=1."""
    started = time.monotonic()
    base = ToyModelConfig(in_channels=5, depth=3, base_width=16, epochs=40)
    csv_path = ablation(
        workspace / "biased",
        t_values=[1, 5],
        seeds=[0, 1, 2],
        base_config=base,
        out_dir=tmp_path / "ablation",
    )
    with open(csv_path, newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    by_key = {(int(r["T"]), int(r["shuffle"]), int(r["seed"])): float(r["iou"]) for r in rows}

    for seed in (0, 1, 2):
        assert by_key[(1, 1, seed)] == by_key[(1, 0, seed)], f"T=1 arms differ for seed {seed}"

    on = [by_key[(5, 1, seed)] for seed in (0, 1, 2)]
    off = [by_key[(5, 0, seed)] for seed in (0, 1, 2)]
    wins = sum(1 for a, b in zip(on, off) if a > b)
    assert wins == 3, f"shuffle-on won only {wins}/3 seeds: on={on} off={off}"
    assert float(np.mean(on)) > float(np.mean(off))

    elapsed = time.monotonic() - started
    assert elapsed < 600.0, f"ablation took {elapsed:.0f}s"
    _report(f"augmentation-ablation-directional ({elapsed:.0f}s, on={np.mean(on):.3f} off={np.mean(off):.3f})")


def test_playback_interchange_exact(workspace, tmp_path):
    """Pipeline metrics via playback equal local binarization metrics, exactly."""
    record = train(
        workspace / "datasets" / "T05",
        ToyModelConfig(in_channels=5, depth=3, base_width=16, epochs=8, seed=1),
        shuffle_augmentation=True,
        out_dir=tmp_path / "model",
    )
    config, model = load_weights(record.weights_path)
    manifest = workspace / "scene" / "manifest.json"
    gt_mask = workspace / "scene" / "gt_mask.tif"

    prob_path = predict_scene(
        model, config.in_channels, manifest, tmp_path / "prob.tif", window=128, stride=64
    )

    _ows(
        "predict",
        "--manifest",
        manifest,
        "--segmenter",
        "playback",
        "--pred-raster",
        prob_path,
        "--stride",
        32,
        "--out-prob",
        tmp_path / "pb_prob.tif",
        "--out-mask",
        tmp_path / "pb_mask.tif",
    )
    _ows(
        "eval",
        "--pred-mask",
        tmp_path / "pb_mask.tif",
        "--gt-mask",
        gt_mask,
        "--out-report",
        tmp_path / "report_playback.json",
    )

    binarize_raster(prob_path, tmp_path / "local_mask.tif", binarize_at=0.5)
    _ows(
        "eval",
        "--pred-mask",
        tmp_path / "local_mask.tif",
        "--gt-mask",
        gt_mask,
        "--out-report",
        tmp_path / "report_local.json",
    )

    playback = json.loads((tmp_path / "report_playback.json").read_text())
    local = json.loads((tmp_path / "report_local.json").read_text())
    assert playback["pixel"] == local["pixel"]
    assert playback["object"] == local["object"]
    _report("playback-interchange-exact")
