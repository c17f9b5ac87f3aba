"""Minimal GeoTIFF I/O on top of tifffile.

Writes single- or multi-band rasters with the standard georeferencing tags
(ModelPixelScale, ModelTiepoint, GeoKeyDirectory with a citation pointing at
the CRS string, and GDAL's ASCII nodata tag), and reads them back. Covers
exactly what this pipeline needs: north-up affine grids, no rotation terms.

Writes are atomic (temp file in the target directory + rename) and
byte-deterministic for identical inputs, which the experiment runner relies on.
"""

from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np
import tifffile

from .errors import ArtifactIOError, MissingFileError

TAG_MODEL_PIXEL_SCALE = 33550
TAG_MODEL_TIEPOINT = 33922
TAG_GEO_KEY_DIRECTORY = 34735
TAG_GEO_ASCII_PARAMS = 34737
TAG_GDAL_NODATA = 42113

# GeoKey ids: model type, raster type (PixelIsArea), citation.
_GT_MODEL_TYPE_KEY = 1024
_GT_RASTER_TYPE_KEY = 1025
_GT_CITATION_KEY = 1026


def write_geotiff(
    path: str | os.PathLike,
    values: np.ndarray,
    origin_x: float,
    origin_y: float,
    pixel_w: float,
    pixel_h: float,
    crs: str,
    nodata: float | None = None,
) -> None:
    """Write `values` (2D, or 3D band-first) as a GeoTIFF.

    The array dtype is preserved (float32 imagery, uint8 masks, int32 labels).
    """
    path = Path(path)
    if values.ndim not in (2, 3):
        raise ArtifactIOError(f"expected 2D or 3D array, got shape {values.shape}")

    ascii_params = crs + "|"
    keydir = (
        1, 1, 0, 3,
        _GT_MODEL_TYPE_KEY, 0, 1, 1,
        _GT_RASTER_TYPE_KEY, 0, 1, 1,
        _GT_CITATION_KEY, TAG_GEO_ASCII_PARAMS, len(ascii_params), 0,
    )
    extratags = [
        (TAG_MODEL_PIXEL_SCALE, "d", 3, (float(pixel_w), float(pixel_h), 0.0)),
        (TAG_MODEL_TIEPOINT, "d", 6, (0.0, 0.0, 0.0, float(origin_x), float(origin_y), 0.0)),
        (TAG_GEO_KEY_DIRECTORY, "H", len(keydir), keydir),
        (TAG_GEO_ASCII_PARAMS, "s", None, ascii_params),
    ]
    if nodata is not None:
        nodata_str = "nan" if math.isnan(nodata) else repr(float(nodata))
        extratags.append((TAG_GDAL_NODATA, "s", None, nodata_str))

    if values.ndim == 3 and values.shape[0] == 1:
        values = values[0]  # tifffile rejects separate-planar single-band stacks
    planar = {"planarconfig": "separate"} if values.ndim == 3 else {}
    tmp = path.with_name(path.name + ".tmp")
    try:
        tifffile.imwrite(tmp, values, photometric="minisblack", extratags=extratags, **planar)
        os.replace(tmp, path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc


def read_geotiff(path: str | os.PathLike) -> tuple[np.ndarray, float, float, float, float, str, float | None]:
    """Read a GeoTIFF written by this module (or any north-up affine GeoTIFF).

    Returns (values, origin_x, origin_y, pixel_w, pixel_h, crs, nodata).
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"raster file not found: {path}")
    try:
        with tifffile.TiffFile(path) as tif:
            values = tif.asarray()
            tags = {tag.code: tag.value for tag in tif.pages[0].tags}
    except (tifffile.TiffFileError, OSError) as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc

    try:
        scale = tags[TAG_MODEL_PIXEL_SCALE]
        tiepoint = tags[TAG_MODEL_TIEPOINT]
    except KeyError as exc:
        raise ArtifactIOError(f"{path} lacks georeferencing tags") from exc
    pixel_w, pixel_h = float(scale[0]), float(scale[1])
    # Tiepoint maps raster (col, row) = (I, J) to map (X, Y); we require the
    # anchor at the raster origin, which is how this pipeline writes files.
    if tuple(tiepoint[:3]) != (0.0, 0.0, 0.0):
        raise ArtifactIOError(f"{path}: only origin-anchored tiepoints are supported")
    origin_x, origin_y = float(tiepoint[3]), float(tiepoint[4])

    crs = ""
    ascii_params = tags.get(TAG_GEO_ASCII_PARAMS)
    if ascii_params:
        crs = str(ascii_params).rstrip("|")

    nodata: float | None = None
    nodata_tag = tags.get(TAG_GDAL_NODATA)
    if nodata_tag is not None:
        try:
            nodata = float(str(nodata_tag).strip())
        except ValueError:
            nodata = None

    return values, origin_x, origin_y, pixel_w, pixel_h, crs, nodata


def write_json_atomic(path: str | os.PathLike, text: str) -> None:
    """Write pre-serialized JSON text atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc
