"""Full-scene prediction with a sliding window, and per-patch mask emission.

The scene path mirrors the pipeline's stitcher: windows at stride intervals
with the trailing origin snapped to the scene edge, overlaps blended by
arithmetic mean in float64. The written probability GeoTIFF sits on the
stack's grid so the pipeline's playback segmenter can serve it bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from . import tiffio
from .data import DatasetFormatError, ShapeError, load_patches


class ChannelMismatchError(Exception):
    """Stack depth differs from the model's input channels."""


def _origins(extent: int, window: int, stride: int) -> list[int]:
    if window > extent:
        raise ShapeError(f"window {window} exceeds extent {extent}")
    origins = list(range(0, extent - window + 1, stride))
    if origins[-1] != extent - window:
        origins.append(extent - window)
    return origins


def load_manifest_stack(manifest_path: str | Path) -> tuple[np.ndarray, tuple[float, float, float, float, str]]:
    """(T, H, W) float32 stack plus its grid, frames ordered by date."""
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
        entries = sorted(doc["frames"], key=lambda e: e["date"])
        crs = str(doc["crs"])
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DatasetFormatError(f"{manifest_path}: {exc}") from exc
    frames = []
    grid = None
    for entry in entries:
        values, ox, oy, pw, ph, _, _ = tiffio.read_geotiff(manifest_path.parent / entry["path"])
        frames.append(values.astype(np.float32))
        grid = (ox, oy, pw, ph, crs)
    assert grid is not None
    return np.stack(frames), grid


def predict_scene(
    model: torch.nn.Module,
    in_channels: int,
    manifest_path: str | Path,
    out_path: str | Path,
    window: int = 128,
    stride: int = 64,
) -> Path:
    stack, (ox, oy, pw, ph, crs) = load_manifest_stack(manifest_path)
    if stack.shape[0] != in_channels:
        raise ChannelMismatchError(f"stack T={stack.shape[0]}, model expects {in_channels}")
    _, h, w = stack.shape
    acc = np.zeros((h, w), dtype=np.float64)
    count = np.zeros((h, w), dtype=np.int64)
    model.eval()
    with torch.no_grad():
        for r0 in _origins(h, window, stride):
            for c0 in _origins(w, window, stride):
                tile = stack[:, r0 : r0 + window, c0 : c0 + window]
                logits = model(torch.from_numpy(tile).unsqueeze(0))
                prob = torch.sigmoid(logits)[0, 0].numpy().astype(np.float64)
                acc[r0 : r0 + window, c0 : c0 + window] += prob
                count[r0 : r0 + window, c0 : c0 + window] += 1
    prob = (acc / count).astype(np.float32)
    out_path = Path(out_path)
    tiffio.write_geotiff(out_path, prob, ox, oy, pw, ph, crs)
    return out_path


def write_patch_masks(
    model: torch.nn.Module,
    dataset_dir: str | Path,
    out_dir: str | Path,
    split: str = "test",
    binarize_at: float = 0.5,
) -> list[Path]:
    """Binarized per-patch predictions named for the pipeline's eval CLI."""
    from .train import predict_patch_probabilities

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for patch in load_patches(dataset_dir, split=split):
        prob = predict_patch_probabilities(model, patch)
        mask = (prob > binarize_at).astype(np.uint8)
        ox, oy, pw, ph, crs = patch.grid
        path = out_dir / f"sample_{patch.index:05d}.tif"
        tiffio.write_geotiff(path, mask, ox, oy, pw, ph, crs)
        written.append(path)
    return written


def binarize_raster(prob_path: str | Path, out_path: str | Path, binarize_at: float = 0.5) -> Path:
    values, ox, oy, pw, ph, crs, _ = tiffio.read_geotiff(prob_path)
    mask = (values > binarize_at).astype(np.uint8)
    out_path = Path(out_path)
    tiffio.write_geotiff(out_path, mask, ox, oy, pw, ph, crs)
    return out_path
