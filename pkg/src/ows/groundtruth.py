"""Binary wind-plant masks from temporal-mean composites.

Pixels whose dB values average above the threshold across the time series are
foreground; mobile bright targets (ships) average out, static ones persist.
Averaging happens in the dB domain on already-converted imagery. The optional
small-component cleanup stands in for interactive noise removal.
"""

from __future__ import annotations

import numpy as np

from .instances import connected_components
from .raster import BinaryMask, Raster, SarStack, stack_values, temporal_mean


def composite_mean(stack: SarStack) -> Raster:
    """Per-pixel temporal mean; a cell is nodata only if invalid in every frame.

    Bit-identical under any permutation of the frames (values are sorted
    along time before summing).
    """
    mean = temporal_mean(stack_values(stack))
    any_invalid = bool(np.isnan(mean).any())
    return Raster(
        values=mean.astype(np.float32),
        transform=stack.transform,
        nodata=float("nan") if any_invalid else None,
    )


def threshold_mask(composite: Raster, threshold_db: float = 0.0) -> BinaryMask:
    """Foreground where the composite strictly exceeds threshold_db; nodata -> 0."""
    values = composite.values
    bits = composite.valid_mask() & (values > threshold_db)
    return BinaryMask(bits=bits, transform=composite.transform)


def clean_mask(mask: BinaryMask, min_area_px: int = 2) -> BinaryMask:
    """Drop 8-connected foreground components smaller than min_area_px pixels."""
    if min_area_px < 0:
        raise ValueError("min_area_px must be >= 0")
    if min_area_px <= 1:
        return mask
    labeled = connected_components(mask, connectivity=8)
    if labeled.n_instances == 0:
        return mask
    areas = np.bincount(labeled.labels.ravel(), minlength=labeled.n_instances + 1)
    keep = areas >= min_area_px
    keep[0] = False
    bits = keep[labeled.labels]
    return BinaryMask(bits=bits, transform=mask.transform)
