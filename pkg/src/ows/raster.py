"""Core raster/stack data model, manifest-driven I/O, and grid alignment.

A stack is a JSON manifest listing one single-band float32 GeoTIFF per
acquisition date. All frames of a stack must sit on the same grid; the
tolerance on transform components is 1e-6 map units, enough to absorb float
round-trip noise while rejecting real misregistration.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from . import geotiff
from .errors import (
    BoundsError,
    GridMismatchError,
    ManifestParseError,
    MissingFileError,
)

GRID_TOLERANCE = 1e-6


@dataclass(frozen=True)
class GeoTransform:
    """North-up affine pixel<->map mapping.

    map_x = origin_x + col * pixel_w
    map_y = origin_y - row * pixel_h   (rows increase southward)
    """

    origin_x: float
    origin_y: float
    pixel_w: float
    pixel_h: float
    crs: str

    def __post_init__(self) -> None:
        if self.pixel_w <= 0 or self.pixel_h <= 0:
            raise ValueError("pixel sizes must be positive")

    def approx_equal(self, other: "GeoTransform", tol: float = GRID_TOLERANCE) -> bool:
        return (
            abs(self.origin_x - other.origin_x) <= tol
            and abs(self.origin_y - other.origin_y) <= tol
            and abs(self.pixel_w - other.pixel_w) <= tol
            and abs(self.pixel_h - other.pixel_h) <= tol
            and self.crs == other.crs
        )


def pixel_to_map(transform: GeoTransform, row: float, col: float) -> tuple[float, float]:
    """Map coordinates of the pixel's upper-left corner."""
    return (
        transform.origin_x + col * transform.pixel_w,
        transform.origin_y - row * transform.pixel_h,
    )


def map_to_pixel(transform: GeoTransform, map_x: float, map_y: float) -> tuple[int, int]:
    """(row, col) of the cell containing the map point (floor convention)."""
    col = math.floor((map_x - transform.origin_x) / transform.pixel_w)
    row = math.floor((transform.origin_y - map_y) / transform.pixel_h)
    return row, col


@dataclass(frozen=True)
class Raster:
    """Single-band float raster with optional nodata sentinel."""

    values: np.ndarray
    transform: GeoTransform
    nodata: float | None = None

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError(f"raster values must be 2D, got shape {self.values.shape}")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def valid_mask(self) -> np.ndarray:
        """True where the cell holds data (not NaN, not the nodata sentinel)."""
        valid = ~np.isnan(self.values)
        if self.nodata is not None and not math.isnan(self.nodata):
            valid &= self.values != self.nodata
        return valid


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel 0/1 raster sharing a stack's grid."""

    bits: np.ndarray
    transform: GeoTransform

    def __post_init__(self) -> None:
        if self.bits.ndim != 2:
            raise ValueError(f"mask bits must be 2D, got shape {self.bits.shape}")
        if self.bits.dtype != np.bool_:
            object.__setattr__(self, "bits", self.bits.astype(bool))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


@dataclass(frozen=True)
class SarStack:
    """Co-registered dB rasters ordered by strictly increasing date."""

    frames: tuple[Raster, ...]
    dates: tuple[date, ...]

    def __post_init__(self) -> None:
        if len(self.frames) == 0:
            raise ManifestParseError("a stack needs at least one frame")
        if len(self.frames) != len(self.dates):
            raise ManifestParseError("frame and date counts differ")
        for earlier, later in zip(self.dates, self.dates[1:]):
            if later <= earlier:
                raise ManifestParseError("dates must be strictly increasing")
        first = self.frames[0]
        for i, frame in enumerate(self.frames[1:], start=1):
            if frame.values.shape != first.values.shape:
                raise GridMismatchError(
                    f"frame {i} has dims {frame.values.shape[::-1]}, expected {first.values.shape[::-1]}"
                )
            if not frame.transform.approx_equal(first.transform):
                raise GridMismatchError(f"frame {i} transform differs beyond tolerance")

    @property
    def T(self) -> int:
        return len(self.frames)

    @property
    def transform(self) -> GeoTransform:
        return self.frames[0].transform

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width


@dataclass(frozen=True)
class StackManifest:
    crs: str
    frames: tuple[tuple[str, date], ...] = field(default_factory=tuple)  # (path, date)


def stack_values(stack: SarStack) -> np.ndarray:
    """(T, H, W) float64 tensor with NaN in nodata cells."""
    out = np.empty((stack.T, stack.height, stack.width), dtype=np.float64)
    for i, frame in enumerate(stack.frames):
        values = frame.values.astype(np.float64)
        invalid = ~frame.valid_mask()
        if invalid.any():
            values = np.where(invalid, np.nan, values)
        out[i] = values
    return out


def temporal_mean(values: np.ndarray) -> np.ndarray:
    """Per-pixel mean over axis 0, ignoring NaN; NaN where no frame is valid.

    The values are sorted along the time axis before summation so the result
    is bit-identical under any permutation of the frames.
    """
    if values.ndim != 3:
        raise ValueError(f"expected (T, H, W), got shape {values.shape}")
    ordered = np.sort(values, axis=0)  # NaNs sort to the end
    count = np.sum(~np.isnan(values), axis=0)
    total = np.nansum(ordered, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = total / count
    return np.where(count > 0, mean, np.nan)


def _parse_manifest(manifest_path: Path) -> tuple[str, list[tuple[Path, date]]]:
    if not manifest_path.exists():
        raise MissingFileError(f"manifest not found: {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestParseError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "crs" not in doc or "frames" not in doc:
        raise ManifestParseError(f"{manifest_path}: expected object with 'crs' and 'frames'")
    entries = doc["frames"]
    if not isinstance(entries, list) or not entries:
        raise ManifestParseError(f"{manifest_path}: 'frames' must be a non-empty list")

    frames: list[tuple[Path, date]] = []
    seen: set[date] = set()
    for entry in entries:
        try:
            frame_path = manifest_path.parent / entry["path"]
            frame_date = date.fromisoformat(entry["date"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestParseError(f"{manifest_path}: bad frame entry {entry!r}") from exc
        if frame_date in seen:
            raise ManifestParseError(f"{manifest_path}: duplicate date {frame_date}")
        seen.add(frame_date)
        frames.append((frame_path, frame_date))
    return str(doc["crs"]), frames


def load_stack(manifest_path: str | os.PathLike) -> SarStack:
    """Load and alignment-check a stack; frames come back sorted by date."""
    manifest_path = Path(manifest_path)
    crs, entries = _parse_manifest(manifest_path)
    entries.sort(key=lambda item: item[1])

    rasters: list[Raster] = []
    for frame_path, _ in entries:
        values, ox, oy, pw, ph, frame_crs, nodata = geotiff.read_geotiff(frame_path)
        if values.ndim != 2:
            raise GridMismatchError(f"{frame_path}: stack frames must be single-band")
        if frame_crs and frame_crs != crs:
            raise GridMismatchError(f"{frame_path}: CRS {frame_crs!r} != manifest CRS {crs!r}")
        transform = GeoTransform(ox, oy, pw, ph, crs)
        rasters.append(Raster(values=values, transform=transform, nodata=nodata))

    return SarStack(frames=tuple(rasters), dates=tuple(d for _, d in entries))


def save_stack(stack: SarStack, out_dir: str | os.PathLike, manifest_name: str = "manifest.json") -> Path:
    """Write frames + manifest under out_dir; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for frame, frame_date in zip(stack.frames, stack.dates):
        name = f"frame_{frame_date.isoformat()}.tif"
        t = frame.transform
        geotiff.write_geotiff(
            out_dir / name,
            frame.values,
            t.origin_x,
            t.origin_y,
            t.pixel_w,
            t.pixel_h,
            t.crs,
            nodata=frame.nodata,
        )
        entries.append({"path": name, "date": frame_date.isoformat()})
    manifest_path = out_dir / manifest_name
    doc = {"crs": stack.transform.crs, "frames": entries}
    geotiff.write_json_atomic(manifest_path, json.dumps(doc, indent=2) + "\n")
    return manifest_path


def subset_recent(stack: SarStack, n: int) -> SarStack:
    """The n most recent frames, date order preserved."""
    if not 1 <= n <= stack.T:
        raise BoundsError(f"n={n} outside [1, {stack.T}]")
    return SarStack(frames=stack.frames[-n:], dates=stack.dates[-n:])


def write_raster(path: str | os.PathLike, raster: Raster) -> None:
    t = raster.transform
    geotiff.write_geotiff(
        path, raster.values, t.origin_x, t.origin_y, t.pixel_w, t.pixel_h, t.crs, nodata=raster.nodata
    )


def read_raster(path: str | os.PathLike) -> Raster:
    values, ox, oy, pw, ph, crs, nodata = geotiff.read_geotiff(path)
    if values.ndim != 2:
        raise GridMismatchError(f"{path}: expected a single-band raster")
    return Raster(values=values, transform=GeoTransform(ox, oy, pw, ph, crs), nodata=nodata)


def write_mask(path: str | os.PathLike, mask: BinaryMask) -> None:
    """Persist a binary mask as 0/1 uint8 GeoTIFF."""
    t = mask.transform
    geotiff.write_geotiff(
        path, mask.bits.astype(np.uint8), t.origin_x, t.origin_y, t.pixel_w, t.pixel_h, t.crs
    )


def read_mask(path: str | os.PathLike) -> BinaryMask:
    values, ox, oy, pw, ph, crs, _ = geotiff.read_geotiff(path)
    if values.ndim != 2:
        raise GridMismatchError(f"{path}: expected a single-band mask")
    return BinaryMask(bits=values != 0, transform=GeoTransform(ox, oy, pw, ph, crs))
