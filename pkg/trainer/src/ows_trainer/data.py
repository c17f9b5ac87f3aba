"""Patch-dataset access and augmentation plumbing.

Reads the detection pipeline's dataset directory layout verbatim
(dataset.json index, one sample_XXXXX/ dir with image.tif, mask.tif,
meta.json each) and reproduces its shuffle-seed derivation so per-epoch
channel permutations match what the dataset builder would produce:
seed = first 8 bytes (big-endian) of
sha256(b"ows.shuffle.v1" + pack(">QQQ", global_seed, sample_index, epoch)).
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tiffio

_SHUFFLE_DOMAIN = b"ows.shuffle.v1"


class DatasetFormatError(Exception):
    """Dataset directory does not follow the pipeline layout."""


class ShapeError(Exception):
    """Tensor shapes inconsistent with the model configuration."""


@dataclass
class Patch:
    index: int
    image: np.ndarray  # (T, H, W) float32
    mask: np.ndarray  # (H, W) bool
    split: str
    permutation: list[int]
    grid: tuple[float, float, float, float, str]  # origin_x, origin_y, pixel_w, pixel_h, crs


def derive_shuffle_seed(global_seed: int, sample_index: int, epoch: int) -> int:
    payload = _SHUFFLE_DOMAIN + struct.pack(
        ">QQQ",
        global_seed & 0xFFFFFFFFFFFFFFFF,
        sample_index & 0xFFFFFFFFFFFFFFFF,
        epoch & 0xFFFFFFFFFFFFFFFF,
    )
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def epoch_permutation(global_seed: int, sample_index: int, epoch: int, depth: int) -> np.ndarray:
    return np.random.default_rng(derive_shuffle_seed(global_seed, sample_index, epoch)).permutation(depth)


def load_patches(dataset_dir: str | Path, split: str | None = None) -> list[Patch]:
    dataset_dir = Path(dataset_dir)
    index_path = dataset_dir / "dataset.json"
    if not index_path.exists():
        raise DatasetFormatError(f"no dataset.json under {dataset_dir}")
    try:
        index = json.loads(index_path.read_text(encoding="utf-8"))
        entries = index["samples"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise DatasetFormatError(f"{index_path}: {exc}") from exc

    patches = []
    for entry in entries:
        if split is not None and entry.get("split") != split:
            continue
        sample_dir = dataset_dir / entry["dir"]
        try:
            meta = json.loads((sample_dir / "meta.json").read_text(encoding="utf-8"))
            image, ox, oy, pw, ph, crs, _ = tiffio.read_geotiff(sample_dir / "image.tif")
            mask_vals, *_ = tiffio.read_geotiff(sample_dir / "mask.tif")
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise DatasetFormatError(f"{sample_dir}: {exc}") from exc
        if image.ndim == 2:
            image = image[np.newaxis]
        if image.shape[1:] != mask_vals.shape:
            raise ShapeError(f"{sample_dir}: image {image.shape} vs mask {mask_vals.shape}")
        patches.append(
            Patch(
                index=int(meta["index"]),
                image=image.astype(np.float32),
                mask=mask_vals != 0,
                split=str(meta.get("split")),
                permutation=list(meta["permutation"]),
                grid=(ox, oy, pw, ph, crs),
            )
        )
    return patches


def dataset_depth(dataset_dir: str | Path) -> int:
    index_path = Path(dataset_dir) / "dataset.json"
    if not index_path.exists():
        raise DatasetFormatError(f"no dataset.json under {dataset_dir}")
    return int(json.loads(index_path.read_text(encoding="utf-8")).get("T", 0))


def inject_order_bias(dataset_dir: str | Path, slope_db: float = 2.0) -> int:
    """Add a frame-index-correlated brightness ramp to every patch in place.

    Stored channel k corresponds to original frame permutation[k]; the ramp
    follows the original frame index, centered to keep the temporal mean
    unchanged: offset = slope_db * (frame - (T-1)/2). A synthetic device for
    the augmentation ablation (it gives a non-shuffled model an exploitable
    channel-order cue), not part of the detection pipeline itself.
    """
    dataset_dir = Path(dataset_dir)
    patches = load_patches(dataset_dir)
    if not patches:
        raise DatasetFormatError(f"no samples under {dataset_dir}")
    changed = 0
    for patch in patches:
        depth = patch.image.shape[0]
        offsets = np.array(
            [slope_db * (frame - (depth - 1) / 2.0) for frame in patch.permutation],
            dtype=np.float32,
        )
        biased = patch.image + offsets[:, np.newaxis, np.newaxis]
        ox, oy, pw, ph, crs = patch.grid
        tiffio.write_geotiff(
            dataset_dir / f"sample_{patch.index:05d}" / "image.tif", biased, ox, oy, pw, ph, crs
        )
        changed += 1
    index_path = dataset_dir / "dataset.json"
    index = json.loads(index_path.read_text(encoding="utf-8"))
    index["order_bias_slope_db"] = slope_db
    index_path.write_text(json.dumps(index, indent=2) + "\n", encoding="utf-8")
    return changed
