from __future__ import annotations

from datetime import date, timedelta

import numpy as np
import pytest

from ows.raster import BinaryMask, GeoTransform, Raster, SarStack

DEFAULT_TRANSFORM = GeoTransform(
    origin_x=400_000.0, origin_y=6_000_000.0, pixel_w=10.0, pixel_h=10.0, crs="EPSG:32630"
)


def make_stack(
    frames: list[np.ndarray],
    transform: GeoTransform = DEFAULT_TRANSFORM,
    nodata: float | None = None,
    start: date = date(2022, 8, 2),
) -> SarStack:
    rasters = tuple(
        Raster(values=np.asarray(f, dtype=np.float32), transform=transform, nodata=nodata)
        for f in frames
    )
    dates = tuple(start + timedelta(days=12 * i) for i in range(len(frames)))
    return SarStack(frames=rasters, dates=dates)


def make_mask(bits: np.ndarray, transform: GeoTransform = DEFAULT_TRANSFORM) -> BinaryMask:
    return BinaryMask(bits=np.asarray(bits, dtype=bool), transform=transform)


def flood_fill_components(bits: np.ndarray, connectivity: int = 8) -> list[set[tuple[int, int]]]:
    """Independent brute-force component oracle over coordinate sets."""
    bits = np.asarray(bits, dtype=bool)
    h, w = bits.shape
    if connectivity == 8:
        offsets = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        offsets = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    remaining = {(r, c) for r in range(h) for c in range(w) if bits[r, c]}
    components = []
    while remaining:
        seed = min(remaining)  # top-left-most pixel first, like raster order
        queue = [seed]
        remaining.discard(seed)
        comp = {seed}
        while queue:
            r, c = queue.pop()
            for dr, dc in offsets:
                nb = (r + dr, c + dc)
                if nb in remaining:
                    remaining.discard(nb)
                    comp.add(nb)
                    queue.append(nb)
        components.append(comp)
    return components


def confusion_by_double_loop(pred: np.ndarray, gt: np.ndarray) -> tuple[int, int, int, int]:
    """Naive per-pixel enumeration oracle: (tp, tn, fp, fn)."""
    tp = tn = fp = fn = 0
    for r in range(pred.shape[0]):
        for c in range(pred.shape[1]):
            p, g = bool(pred[r, c]), bool(gt[r, c])
            if p and g:
                tp += 1
            elif p and not g:
                fp += 1
            elif not p and g:
                fn += 1
            else:
                tn += 1
    return tp, tn, fp, fn


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20_240_817)
