"""Pluggable segmenters and sliding-window full-scene prediction.

A segmenter maps a (T, h, w) dB window to an (h, w) probability map. The
stitcher slides model-sized windows across the scene with a configurable
stride, snapping the final origin to the scene edge so every pixel is
covered, and blends overlapping predictions by arithmetic mean. Accumulation
runs in float64 over origins sorted canonically, so the result is independent
of window evaluation order and reproduces a played-back source raster
bit-exactly at any stride.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import BoundsError, ChannelMismatchError, GridMismatchError
from .raster import BinaryMask, Raster, SarStack, stack_values, temporal_mean


@runtime_checkable
class SegmenterContract(Protocol):
    """Window-level prediction contract.

    predict receives the window tensor (nodata cells as NaN) plus the window
    origin in scene pixel coordinates; origin-aware implementations (playback)
    need it, pixel-local ones ignore it. required_T of None accepts any depth.
    """

    required_T: int | None

    def predict(self, window: np.ndarray, row0: int, col0: int) -> np.ndarray: ...


class BaselineTemporalSegmenter:
    """Reference segmenter: hard 0/1 on the temporal mean vs a dB threshold.

    The same rule that builds ground truth, repurposed as a model stand-in;
    on a synthetic scene its stitched mask equals the ground-truth mask.
    """

    def __init__(self, threshold_db: float = 0.0, required_T: int | None = None):
        self.threshold_db = threshold_db
        self.required_T = required_T

    def predict(self, window: np.ndarray, row0: int, col0: int) -> np.ndarray:
        mean = temporal_mean(window.astype(np.float64))
        return (~np.isnan(mean) & (mean > self.threshold_db)).astype(np.float32)


class PlaybackSegmenter:
    """Serves co-located crops of a precomputed full-scene probability raster."""

    def __init__(self, source: Raster, required_T: int | None = None):
        values = source.values
        finite = values[~np.isnan(values)]
        if finite.size and (finite.min() < 0.0 or finite.max() > 1.0):
            raise ValueError("playback source must hold probabilities in [0, 1]")
        self.source = source
        self.required_T = required_T

    def predict(self, window: np.ndarray, row0: int, col0: int) -> np.ndarray:
        h, w = window.shape[1], window.shape[2]
        if row0 < 0 or col0 < 0 or row0 + h > self.source.height or col0 + w > self.source.width:
            raise BoundsError(f"window ({row0},{col0})+{h}x{w} outside playback source")
        return self.source.values[row0 : row0 + h, col0 : col0 + w].astype(np.float32)


@dataclass(frozen=True)
class StitchConfig:
    window: int = 128
    stride: int = 64
    binarize_at: float = 0.5

    def __post_init__(self) -> None:
        if not 1 <= self.stride <= self.window:
            raise ValueError(f"stride {self.stride} outside [1, window={self.window}]")


def window_origins(extent: int, window: int, stride: int) -> list[int]:
    """Origins 0, stride, 2*stride, ... with the last snapped to extent-window."""
    if window > extent:
        raise BoundsError(f"window {window} exceeds extent {extent}")
    origins = list(range(0, extent - window + 1, stride))
    if origins[-1] != extent - window:
        origins.append(extent - window)
    return origins


def coverage_counts(height: int, width: int, cfg: StitchConfig) -> np.ndarray:
    """How many windows cover each pixel under this stitch configuration."""
    counts = np.zeros((height, width), dtype=np.int64)
    for r0 in window_origins(height, cfg.window, cfg.stride):
        for c0 in window_origins(width, cfg.window, cfg.stride):
            counts[r0 : r0 + cfg.window, c0 : c0 + cfg.window] += 1
    return counts


def stitch_predict(
    stack: SarStack, segmenter: SegmenterContract, cfg: StitchConfig = StitchConfig()
) -> tuple[Raster, BinaryMask]:
    """Full-scene probability raster + binarized mask via sliding windows."""
    if segmenter.required_T is not None and segmenter.required_T != stack.T:
        raise ChannelMismatchError(f"segmenter expects T={segmenter.required_T}, stack has T={stack.T}")
    h, w = stack.height, stack.width
    if cfg.window > h or cfg.window > w:
        raise BoundsError(f"window {cfg.window} exceeds scene dims {h}x{w}")

    values = stack_values(stack)
    acc = np.zeros((h, w), dtype=np.float64)
    count = np.zeros((h, w), dtype=np.int64)
    # canonical row-major origin order keeps the reduction deterministic
    for r0 in window_origins(h, cfg.window, cfg.stride):
        for c0 in window_origins(w, cfg.window, cfg.stride):
            window = values[:, r0 : r0 + cfg.window, c0 : c0 + cfg.window]
            pred = segmenter.predict(window, r0, c0)
            if pred.shape != (cfg.window, cfg.window):
                raise GridMismatchError(
                    f"segmenter returned {pred.shape}, expected {(cfg.window, cfg.window)}"
                )
            acc[r0 : r0 + cfg.window, c0 : c0 + cfg.window] += pred.astype(np.float64)
            count[r0 : r0 + cfg.window, c0 : c0 + cfg.window] += 1

    prob = (acc / count).astype(np.float32)
    prob_raster = Raster(values=prob, transform=stack.transform)
    mask = BinaryMask(bits=prob > cfg.binarize_at, transform=stack.transform)
    return prob_raster, mask
