from __future__ import annotations

import json
import shutil
import subprocess
from pathlib import Path

import pytest

OWS = shutil.which("ows")

pytestmark = pytest.mark.skipif(OWS is None, reason="ows CLI not installed")


def run_ows(*argv: object) -> None:
    cmd = [OWS] + [str(a) for a in argv]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, f"{cmd} failed ({proc.returncode}):\n{proc.stdout}\n{proc.stderr}"


def subset_manifest(manifest_path: Path, n_recent: int, out_name: str) -> Path:
    """Manifest referencing only the n most recent frames (file-level subsetting)."""
    doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    frames = sorted(doc["frames"], key=lambda e: e["date"])[-n_recent:]
    out_path = manifest_path.parent / out_name
    out_path.write_text(json.dumps({"crs": doc["crs"], "frames": frames}, indent=2) + "\n")
    return out_path


@pytest.fixture(scope="session")
def workspace(tmp_path_factory) -> Path:
    """Synthetic scene + per-depth patch datasets built via the pipeline CLI.

    Layout:
      scene/                synthetic stack, gt mask, centers, ships
      datasets/T05, T01     unbiased patch datasets (64px, fixed eval shuffle)
      biased/T05, T01       same datasets with the order-bias ramp injected
    """
    root = tmp_path_factory.mktemp("trainer_ws")
    scene = root / "scene"
    spec = {
        "width": 192,
        "height": 192,
        "T": 5,
        "n_turbines": 15,
        "n_ships": 5,
        "turbine_radius_px": 2,
        "seed": 424242,
    }
    (root / "scene_spec.json").write_text(json.dumps(spec))
    run_ows("synth", "--spec", root / "scene_spec.json", "--out", scene, "--locations", 5)

    splits = {"loc00": "train", "loc01": "train", "loc02": "train", "loc03": "val", "loc04": "test"}
    (root / "splits.json").write_text(json.dumps(splits))

    manifests = {
        5: scene / "manifest.json",
        1: subset_manifest(scene / "manifest.json", 1, "manifest_T01.json"),
    }
    datasets = root / "datasets"
    for t, manifest in manifests.items():
        run_ows(
            "patches",
            "--manifest",
            manifest,
            "--mask",
            scene / "gt_mask.tif",
            "--centers",
            scene / "centers.geojson",
            "--splits",
            root / "splits.json",
            "--out",
            datasets / f"T{t:02d}",
            "--patch-size",
            64,
            "--clamp",
            "--seed",
            909,
        )

    biased = root / "biased"
    biased.mkdir()
    for t in manifests:
        shutil.copytree(datasets / f"T{t:02d}", biased / f"T{t:02d}")

    from ows_trainer.data import inject_order_bias

    for t in manifests:
        inject_order_bias(biased / f"T{t:02d}", slope_db=2.0)

    return root
