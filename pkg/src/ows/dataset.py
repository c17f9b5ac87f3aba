"""Patch dataset construction, split assignment, temporal shuffling, COCO export.

Patches are cut around user-supplied center points (one fixed-size window per
point), tagged with location-based train/val/test splits, and optionally
re-ordered along the time axis. Shuffling only ever permutes image channels;
the mask is time-invariant by definition and never touched.

Seed discipline: every permutation comes from a per-sample PRNG seeded by
derive_shuffle_seed(global_seed, sample_index, epoch), a SHA-256 mix that any
consumer of the on-disk dataset can reproduce independently (see README for
the byte-level definition). Training-time augmentation varies the epoch;
validation/test sets are frozen with a single epoch-0 shuffle.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path

import numpy as np

from . import geotiff
from .errors import (
    ArtifactIOError,
    GridMismatchError,
    ManifestParseError,
    MissingFileError,
    OutOfBoundsError,
    UnknownLocationError,
)
from .instances import LabeledMask, connected_components, polygonize
from .raster import BinaryMask, GeoTransform, SarStack, map_to_pixel, stack_values

SPLITS = ("train", "val", "test")

_SHUFFLE_DOMAIN = b"ows.shuffle.v1"


@dataclass(frozen=True)
class CenterPoint:
    map_x: float
    map_y: float
    location_id: str

    def __post_init__(self) -> None:
        if not self.location_id:
            raise ValueError("location_id must be non-empty")


@dataclass
class PatchSample:
    """One training unit: (T, size, size) image window + (size, size) mask."""

    image: np.ndarray
    mask: np.ndarray
    center: CenterPoint
    index: int
    window_origin: tuple[int, int]  # (row0, col0) in the source grid
    transform: GeoTransform  # window-local transform
    dates: tuple[date, ...]
    split: str | None = None
    permutation: list[int] = field(default_factory=list)  # channel k holds frame permutation[k]

    def __post_init__(self) -> None:
        if not self.permutation:
            self.permutation = list(range(self.image.shape[0]))


def read_centers_geojson(path: str | os.PathLike) -> list[CenterPoint]:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"centers file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        features = doc["features"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ManifestParseError(f"{path}: not a GeoJSON FeatureCollection: {exc}") from exc
    centers = []
    for feature in features:
        try:
            if feature["geometry"]["type"] != "Point":
                raise ManifestParseError(f"{path}: only Point features are supported")
            x, y = feature["geometry"]["coordinates"][:2]
            location_id = str(feature["properties"]["location_id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestParseError(f"{path}: bad feature {feature!r}") from exc
        centers.append(CenterPoint(map_x=float(x), map_y=float(y), location_id=location_id))
    return centers


def read_splits_json(path: str | os.PathLike) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"splits file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestParseError(f"{path}: expected an object of location_id -> split")
    for loc, split in doc.items():
        if split not in SPLITS:
            raise ManifestParseError(f"{path}: location {loc!r} has unknown split {split!r}")
    return {str(k): str(v) for k, v in doc.items()}


def extract_patches(
    stack: SarStack,
    mask: BinaryMask,
    centers: list[CenterPoint],
    patch_size: int = 128,
    clamp: bool = False,
) -> list[PatchSample]:
    """Cut one window per center, origin at center pixel minus patch_size/2.

    With clamp on, windows that would cross the scene border are shifted
    inward; with clamp off they raise OutOfBoundsError.
    """
    if mask.bits.shape != (stack.height, stack.width) or not mask.transform.approx_equal(
        stack.transform
    ):
        raise GridMismatchError("stack and ground-truth mask must share a grid")
    h, w = stack.height, stack.width
    if patch_size > h or patch_size > w:
        raise OutOfBoundsError(f"patch_size {patch_size} exceeds scene dims {h}x{w}")

    values = stack_values(stack).astype(np.float32)
    half = patch_size // 2
    t = stack.transform
    samples = []
    for index, center in enumerate(centers):
        row, col = map_to_pixel(t, center.map_x, center.map_y)
        r0, c0 = row - half, col - half
        if clamp:
            r0 = min(max(r0, 0), h - patch_size)
            c0 = min(max(c0, 0), w - patch_size)
        elif not (0 <= r0 and r0 + patch_size <= h and 0 <= c0 and c0 + patch_size <= w):
            raise OutOfBoundsError(
                f"center {index} at pixel ({row},{col}): window origin ({r0},{c0}) leaves the raster"
            )
        window_transform = GeoTransform(
            origin_x=t.origin_x + c0 * t.pixel_w,
            origin_y=t.origin_y - r0 * t.pixel_h,
            pixel_w=t.pixel_w,
            pixel_h=t.pixel_h,
            crs=t.crs,
        )
        samples.append(
            PatchSample(
                image=values[:, r0 : r0 + patch_size, c0 : c0 + patch_size].copy(),
                mask=mask.bits[r0 : r0 + patch_size, c0 : c0 + patch_size].copy(),
                center=center,
                index=index,
                window_origin=(r0, c0),
                transform=window_transform,
                dates=stack.dates,
            )
        )
    return samples


def assign_splits(
    samples: list[PatchSample], assignment: dict[str, str]
) -> dict[str, tuple[int, float]]:
    """Tag each sample with its location's split; returns {split: (n, fraction)}."""
    for sample in samples:
        split = assignment.get(sample.center.location_id)
        if split is None:
            raise UnknownLocationError(f"location {sample.center.location_id!r} has no split")
        sample.split = split
    total = len(samples)
    summary = {}
    for split in SPLITS:
        n = sum(1 for s in samples if s.split == split)
        summary[split] = (n, n / total if total else 0.0)
    return summary


def derive_shuffle_seed(global_seed: int, sample_index: int, epoch: int) -> int:
    """Stable 64-bit seed for one sample's permutation in one epoch.

    SHA-256 over a domain tag plus the three values as unsigned big-endian
    64-bit words; the first 8 digest bytes, big-endian, are the seed. This is
    an on-disk-dataset interchange contract: external trainers must derive
    identical permutations.
    """
    payload = _SHUFFLE_DOMAIN + struct.pack(
        ">QQQ",
        global_seed & 0xFFFFFFFFFFFFFFFF,
        sample_index & 0xFFFFFFFFFFFFFFFF,
        epoch & 0xFFFFFFFFFFFFFFFF,
    )
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def shuffle_temporal(sample: PatchSample, seed: int) -> PatchSample:
    """Reorder image channels by a seeded uniform permutation; mask untouched.

    Output channel k holds input channel perm[k]; the permutation field keeps
    the composition back to original frame indices.
    """
    T = sample.image.shape[0]
    perm = np.random.default_rng(seed).permutation(T)
    return replace(
        sample,
        image=sample.image[perm].copy(),
        permutation=[sample.permutation[p] for p in perm],
    )


def fixed_eval_shuffle(samples: list[PatchSample], seed: int) -> list[PatchSample]:
    """One frozen shuffle per val/test sample, reproducible across runs."""
    for sample in samples:
        if sample.split == "train":
            raise ValueError(f"sample {sample.index} is a train sample; eval shuffle is for val/test")
    return [
        shuffle_temporal(sample, derive_shuffle_seed(seed, sample.index, 0)) for sample in samples
    ]


def _write_sample(out_dir: Path, sample: PatchSample) -> None:
    sample_dir = out_dir / f"sample_{sample.index:05d}"
    sample_dir.mkdir(exist_ok=True)
    t = sample.transform
    geotiff.write_geotiff(
        sample_dir / "image.tif",
        sample.image,
        t.origin_x,
        t.origin_y,
        t.pixel_w,
        t.pixel_h,
        t.crs,
    )
    geotiff.write_geotiff(
        sample_dir / "mask.tif",
        sample.mask.astype(np.uint8),
        t.origin_x,
        t.origin_y,
        t.pixel_w,
        t.pixel_h,
        t.crs,
    )
    meta = {
        "index": sample.index,
        "location_id": sample.center.location_id,
        "center_map": [sample.center.map_x, sample.center.map_y],
        "window_origin": list(sample.window_origin),
        "split": sample.split,
        "permutation": sample.permutation,
        "dates": [d.isoformat() for d in sample.dates],
    }
    geotiff.write_json_atomic(sample_dir / "meta.json", json.dumps(meta, indent=2) + "\n")


def save_dataset(
    samples: list[PatchSample],
    out_dir: str | os.PathLike,
    global_seed: int = 0,
    threads: int = 1,
) -> Path:
    """One directory per sample (multi-band image + mask + metadata) plus index.

    Sample dirs are independent, so writing is safe to parallelize; the
    on-disk result does not depend on scheduling.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if threads > 1 and len(samples) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda s: _write_sample(out_dir, s), samples))
    else:
        for sample in samples:
            _write_sample(out_dir, sample)
    index_entries = [
        {
            "dir": f"sample_{sample.index:05d}",
            "split": sample.split,
            "location_id": sample.center.location_id,
        }
        for sample in samples
    ]

    first = samples[0] if samples else None
    index = {
        "patch_size": int(first.image.shape[1]) if first else 0,
        "T": int(first.image.shape[0]) if first else 0,
        "crs": first.transform.crs if first else "",
        "global_seed": global_seed,
        "samples": index_entries,
    }
    index_path = out_dir / "dataset.json"
    geotiff.write_json_atomic(index_path, json.dumps(index, indent=2) + "\n")
    return index_path


def load_dataset(dataset_dir: str | os.PathLike, split: str | None = None) -> list[PatchSample]:
    dataset_dir = Path(dataset_dir)
    index_path = dataset_dir / "dataset.json"
    if not index_path.exists():
        raise MissingFileError(f"dataset index not found: {index_path}")
    try:
        index = json.loads(index_path.read_text(encoding="utf-8"))
        entries = index["samples"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise ManifestParseError(f"{index_path}: bad dataset index: {exc}") from exc

    samples = []
    for entry in entries:
        if split is not None and entry.get("split") != split:
            continue
        sample_dir = dataset_dir / entry["dir"]
        try:
            meta = json.loads((sample_dir / "meta.json").read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ArtifactIOError(f"{sample_dir}: bad sample metadata: {exc}") from exc
        image, ox, oy, pw, ph, crs, _ = geotiff.read_geotiff(sample_dir / "image.tif")
        mask_vals, *_ = geotiff.read_geotiff(sample_dir / "mask.tif")
        if image.ndim == 2:
            image = image[np.newaxis]
        samples.append(
            PatchSample(
                image=image,
                mask=mask_vals != 0,
                center=CenterPoint(
                    map_x=meta["center_map"][0],
                    map_y=meta["center_map"][1],
                    location_id=meta["location_id"],
                ),
                index=int(meta["index"]),
                window_origin=tuple(meta["window_origin"]),
                transform=GeoTransform(ox, oy, pw, ph, crs),
                dates=tuple(date.fromisoformat(d) for d in meta["dates"]),
                split=meta.get("split"),
                permutation=list(meta["permutation"]),
            )
        )
    return samples


def coco_from_labeled(items: list[tuple[str, LabeledMask]]) -> dict:
    """COCO instance document from (name, labeled mask) pairs.

    Segmentation polygons are pixel-corner rings in pixel coordinates
    (x right, y down), area is the exact component pixel count, and bbox is
    the tight pixel bounding box.
    """
    images = []
    annotations = []
    ann_id = 1
    for image_id, (name, labeled) in enumerate(items, start=1):
        images.append(
            {
                "id": image_id,
                "file_name": name,
                "width": labeled.width,
                "height": labeled.height,
            }
        )
        polyset = polygonize(labeled)
        for polygon in polyset.polygons:
            cells = np.argwhere(labeled.labels == polygon.instance_id)
            r_min, c_min = cells.min(axis=0)
            r_max, c_max = cells.max(axis=0)
            segmentation = [
                [float(coord) for vertex in ring for coord in vertex]
                for ring in polygon.pixel_rings
            ]
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": image_id,
                    "category_id": 1,
                    "segmentation": segmentation,
                    "bbox": [int(c_min), int(r_min), int(c_max - c_min + 1), int(r_max - r_min + 1)],
                    "area": polygon.pixel_area,
                    "iscrowd": 0,
                }
            )
            ann_id += 1
    return {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": 1, "name": "wind_plant", "supercategory": "infrastructure"}],
    }


def export_coco(
    items: list[PatchSample] | list[tuple[str, LabeledMask]],
    out_path: str | os.PathLike,
    connectivity: int = 8,
) -> dict:
    """Write COCO annotations for patch samples or pre-labeled scenes."""
    labeled_items: list[tuple[str, LabeledMask]] = []
    for item in items:
        if isinstance(item, PatchSample):
            mask = BinaryMask(bits=item.mask, transform=item.transform)
            labeled_items.append(
                (f"sample_{item.index:05d}/image.tif", connected_components(mask, connectivity))
            )
        else:
            labeled_items.append(item)
    doc = coco_from_labeled(labeled_items)
    geotiff.write_json_atomic(out_path, json.dumps(doc, indent=2) + "\n")
    return doc
