from __future__ import annotations

import numpy as np
import pytest

from conftest import make_stack
from ows.errors import BoundsError, ChannelMismatchError
from ows.groundtruth import composite_mean, threshold_mask
from ows.inference import (
    BaselineTemporalSegmenter,
    PlaybackSegmenter,
    StitchConfig,
    coverage_counts,
    stitch_predict,
    window_origins,
)
from ows.raster import Raster
from ows.synth import SyntheticSceneSpec, generate


class ConstantSegmenter:
    required_T = None

    def __init__(self, value: float = 0.7):
        self.value = value

    def predict(self, window, row0, col0):
        return np.full(window.shape[1:], self.value, dtype=np.float32)


def test_window_origins_exact_tiling():
    assert window_origins(256, 128, 128) == [0, 128]


def test_window_origins_edge_snap():
    # enumerate 0, 64, 128 then snap the remainder to 300-128=172
    assert window_origins(300, 128, 64) == [0, 64, 128, 172]


def test_window_origins_single_window():
    for stride in (1, 17, 128):
        assert window_origins(128, 128, stride) == [0]


def test_window_origins_rejects_oversized_window():
    with pytest.raises(BoundsError):
        window_origins(100, 128, 64)


def test_window_origins_strictly_increasing_no_duplicates():
    for extent in (128, 129, 200, 255, 256, 300, 301):
        for stride in (1, 32, 64, 100, 128):
            origins = window_origins(extent, 128, stride)
            assert origins[0] == 0 and origins[-1] == extent - 128
            assert all(b > a for a, b in zip(origins, origins[1:]))


def test_coverage_has_no_holes():
    for extent in (128, 150, 256, 300):
        for stride in (32, 64, 128):
            counts = coverage_counts(extent, extent, StitchConfig(window=128, stride=stride))
            assert counts.min() >= 1


def test_constant_segmenter_uniform_at_any_stride(rng):
    stack = make_stack([rng.normal(-15, 3, (150, 170)) for _ in range(3)])
    for stride in (32, 64, 128):
        prob, mask = stitch_predict(stack, ConstantSegmenter(0.7), StitchConfig(window=128, stride=stride))
        assert np.all(prob.values == np.float32(0.7))
        assert mask.bits.all()


def test_stride_equals_window_is_independent_tiles(rng):
    frames = [rng.normal(-15, 3, (256, 256)).astype(np.float32) for _ in range(4)]
    stack = make_stack(frames)
    seg = BaselineTemporalSegmenter()
    prob, _ = stitch_predict(stack, seg, StitchConfig(window=128, stride=128))
    values = np.stack(frames).astype(np.float64)
    for r0 in (0, 128):
        for c0 in (0, 128):
            tile = seg.predict(values[:, r0 : r0 + 128, c0 : c0 + 128], r0, c0)
            assert np.array_equal(prob.values[r0 : r0 + 128, c0 : c0 + 128], tile)


def test_baseline_stitch_equals_groundtruth_rule():
    scene = generate(SyntheticSceneSpec(width=200, height=180, T=10, n_turbines=7, n_ships=4, seed=5))
    expected = threshold_mask(composite_mean(scene.stack)).bits
    for stride in (32, 64, 128):
        _, mask = stitch_predict(
            scene.stack, BaselineTemporalSegmenter(), StitchConfig(window=128, stride=stride)
        )
        assert np.array_equal(mask.bits, expected)


def test_baseline_stride_invariance_bit_exact(rng):
    stack = make_stack([rng.normal(-10, 6, (150, 140)) for _ in range(5)])
    reference = None
    for stride in (16, 50, 64, 128):
        prob, _ = stitch_predict(stack, BaselineTemporalSegmenter(), StitchConfig(window=128, stride=stride))
        if reference is None:
            reference = prob.values
        else:
            assert np.array_equal(prob.values, reference)


def test_playback_reproduces_source_exactly(rng):
    stack = make_stack([rng.normal(-15, 3, (180, 200)) for _ in range(2)])
    source = Raster(
        values=rng.random((180, 200)).astype(np.float32), transform=stack.transform
    )
    for stride in (32, 64, 128):
        prob, _ = stitch_predict(
            stack, PlaybackSegmenter(source), StitchConfig(window=128, stride=stride)
        )
        assert np.array_equal(prob.values, source.values)


def test_playback_rejects_out_of_range_source(rng):
    stack = make_stack([rng.normal(size=(130, 130))])
    bad = Raster(values=np.full((130, 130), 1.5, dtype=np.float32), transform=stack.transform)
    with pytest.raises(ValueError):
        PlaybackSegmenter(bad)


def test_channel_mismatch_detected(rng):
    stack = make_stack([rng.normal(size=(130, 130)) for _ in range(3)])
    with pytest.raises(ChannelMismatchError):
        stitch_predict(stack, BaselineTemporalSegmenter(required_T=5), StitchConfig())


def test_window_larger_than_scene_rejected(rng):
    stack = make_stack([rng.normal(size=(100, 100))])
    with pytest.raises(BoundsError):
        stitch_predict(stack, BaselineTemporalSegmenter(), StitchConfig(window=128, stride=64))


def test_stitch_config_validates_stride():
    with pytest.raises(ValueError):
        StitchConfig(window=128, stride=0)
    with pytest.raises(ValueError):
        StitchConfig(window=128, stride=129)


def test_order_independence_via_canonical_reduction(rng):
    # two stitches of the same scene are bit-identical run to run; the
    # accumulation order is canonical regardless of how origins are produced
    stack = make_stack([rng.normal(-12, 4, (150, 150)) for _ in range(3)])
    a, _ = stitch_predict(stack, BaselineTemporalSegmenter(), StitchConfig(window=128, stride=40))
    b, _ = stitch_predict(stack, BaselineTemporalSegmenter(), StitchConfig(window=128, stride=40))
    assert np.array_equal(a.values, b.values)
