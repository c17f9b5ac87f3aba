"""GeoTIFF I/O for the interchange formats of the detection pipeline.

Independent implementation of the same on-disk convention the pipeline uses:
north-up affine grids via ModelPixelScale/ModelTiepoint, the CRS string in
GeoAsciiParams referenced from the GeoKeyDirectory citation key, and GDAL's
ASCII nodata tag. Files written here must be readable by the pipeline
bit-exactly and vice versa.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import tifffile

TAG_MODEL_PIXEL_SCALE = 33550
TAG_MODEL_TIEPOINT = 33922
TAG_GEO_KEY_DIRECTORY = 34735
TAG_GEO_ASCII_PARAMS = 34737
TAG_GDAL_NODATA = 42113


def write_geotiff(
    path: str | os.PathLike,
    values: np.ndarray,
    origin_x: float,
    origin_y: float,
    pixel_w: float,
    pixel_h: float,
    crs: str,
) -> None:
    path = Path(path)
    ascii_params = crs + "|"
    keydir = (
        1, 1, 0, 3,
        1024, 0, 1, 1,
        1025, 0, 1, 1,
        1026, TAG_GEO_ASCII_PARAMS, len(ascii_params), 0,
    )
    extratags = [
        (TAG_MODEL_PIXEL_SCALE, "d", 3, (float(pixel_w), float(pixel_h), 0.0)),
        (TAG_MODEL_TIEPOINT, "d", 6, (0.0, 0.0, 0.0, float(origin_x), float(origin_y), 0.0)),
        (TAG_GEO_KEY_DIRECTORY, "H", len(keydir), keydir),
        (TAG_GEO_ASCII_PARAMS, "s", None, ascii_params),
    ]
    if values.ndim == 3 and values.shape[0] == 1:
        values = values[0]  # tifffile rejects separate-planar single-band stacks
    planar = {"planarconfig": "separate"} if values.ndim == 3 else {}
    tmp = path.with_name(path.name + ".tmp")
    tifffile.imwrite(tmp, values, photometric="minisblack", extratags=extratags, **planar)
    os.replace(tmp, path)


def read_geotiff(path: str | os.PathLike) -> tuple[np.ndarray, float, float, float, float, str, float | None]:
    with tifffile.TiffFile(path) as tif:
        values = tif.asarray()
        tags = {tag.code: tag.value for tag in tif.pages[0].tags}
    scale = tags[TAG_MODEL_PIXEL_SCALE]
    tiepoint = tags[TAG_MODEL_TIEPOINT]
    crs = str(tags.get(TAG_GEO_ASCII_PARAMS, "")).rstrip("|")
    nodata_tag = tags.get(TAG_GDAL_NODATA)
    nodata = None
    if nodata_tag is not None:
        try:
            nodata = float(str(nodata_tag).strip())
        except ValueError:
            nodata = None
    return (
        values,
        float(tiepoint[3]),
        float(tiepoint[4]),
        float(scale[0]),
        float(scale[1]),
        crs,
        nodata,
    )
