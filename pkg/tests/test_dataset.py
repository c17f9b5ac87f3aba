from __future__ import annotations

import numpy as np
import pytest

from conftest import DEFAULT_TRANSFORM, flood_fill_components, make_mask, make_stack
from ows.dataset import (
    CenterPoint,
    assign_splits,
    derive_shuffle_seed,
    export_coco,
    extract_patches,
    fixed_eval_shuffle,
    load_dataset,
    read_centers_geojson,
    save_dataset,
    shuffle_temporal,
)
from ows.errors import OutOfBoundsError, UnknownLocationError
from ows.groundtruth import composite_mean
from ows.instances import connected_components, rasterize, polygonize
from ows.raster import BinaryMask, pixel_to_map
from ows.synth import SyntheticSceneSpec, generate, write_scene


def center_at_pixel(row: float, col: float, location_id: str = "locA") -> CenterPoint:
    x, y = pixel_to_map(DEFAULT_TRANSFORM, row + 0.5, col + 0.5)
    return CenterPoint(map_x=x, map_y=y, location_id=location_id)


def scene_fixture(rng, size=128, T=4):
    frames = [rng.normal(-15, 3, (size, size)) for _ in range(T)]
    stack = make_stack(frames)
    mask = make_mask(rng.random((size, size)) > 0.9)
    return stack, mask


def test_extract_exact_fit(rng):
    stack, mask = scene_fixture(rng)
    samples = extract_patches(stack, mask, [center_at_pixel(64, 64)], patch_size=128)
    assert len(samples) == 1
    sample = samples[0]
    assert sample.window_origin == (0, 0)
    assert sample.image.shape == (4, 128, 128)
    assert np.array_equal(sample.mask, mask.bits)
    assert sample.permutation == [0, 1, 2, 3]


def test_extract_out_of_bounds_without_clamp(rng):
    stack, mask = scene_fixture(rng)
    with pytest.raises(OutOfBoundsError):
        extract_patches(stack, mask, [center_at_pixel(10, 10)], patch_size=128, clamp=False)


def test_extract_clamps_inward(rng):
    stack, mask = scene_fixture(rng)
    samples = extract_patches(stack, mask, [center_at_pixel(10, 10)], patch_size=128, clamp=True)
    assert samples[0].window_origin == (0, 0)


def test_extract_count_matches_centers(rng):
    stack, mask = scene_fixture(rng, size=160)
    centers = [center_at_pixel(r, c) for r, c in [(70, 70), (80, 80), (64, 90)]]
    samples = extract_patches(stack, mask, centers, patch_size=128)
    assert len(samples) == len(centers)


def test_extract_window_transform_is_colocated(rng):
    stack, mask = scene_fixture(rng, size=160)
    sample = extract_patches(stack, mask, [center_at_pixel(80, 90)], patch_size=128)[0]
    r0, c0 = sample.window_origin
    assert sample.transform.origin_x == DEFAULT_TRANSFORM.origin_x + c0 * 10.0
    assert sample.transform.origin_y == DEFAULT_TRANSFORM.origin_y - r0 * 10.0


def test_assign_splits_reference_fractions(rng):
    # Reference dataset composition: 2395 train / 1319 val / 1233 test patches
    # (4947 total). Exact fractions are 48.41% / 26.66% / 24.92%; note the
    # originally reported validation share (26.27%) does not match its own
    # counts, so we assert the arithmetic, not the misprint.
    from dataclasses import replace

    stack, mask = scene_fixture(rng, size=160)
    template = extract_patches(stack, mask, [center_at_pixel(80, 80)], 128)[0]
    counts = {"train": 2395, "val": 1319, "test": 1233}
    samples = []
    for split, n in counts.items():
        center = CenterPoint(template.center.map_x, template.center.map_y, f"loc_{split}")
        for _ in range(n):
            samples.append(replace(template, center=center, index=len(samples)))
    summary = assign_splits(
        samples, {"loc_train": "train", "loc_val": "val", "loc_test": "test"}
    )
    assert summary["train"][0] == 2395
    assert round(100 * summary["train"][1], 2) == 48.41
    assert round(100 * summary["val"][1], 2) == 26.66
    assert round(100 * summary["test"][1], 2) == 24.92
    assert sum(fraction for _, fraction in summary.values()) == pytest.approx(1.0)


def test_assign_splits_single_location(rng):
    stack, mask = scene_fixture(rng)
    samples = extract_patches(stack, mask, [center_at_pixel(64, 64)], 128)
    summary = assign_splits(samples, {"locA": "train"})
    assert summary["train"] == (1, 1.0)


def test_assign_splits_unknown_location(rng):
    stack, mask = scene_fixture(rng)
    samples = extract_patches(stack, mask, [center_at_pixel(64, 64, "mystery")], 128)
    with pytest.raises(UnknownLocationError):
        assign_splits(samples, {"locA": "train"})


def test_shuffle_identity_when_single_frame(rng):
    stack, mask = scene_fixture(rng, T=1)
    sample = extract_patches(stack, mask, [center_at_pixel(64, 64)], 128)[0]
    shuffled = shuffle_temporal(sample, seed=123)
    assert np.array_equal(shuffled.image, sample.image)
    assert shuffled.permutation == [0]


def test_shuffle_applies_recorded_permutation(rng):
    stack, mask = scene_fixture(rng, T=5)
    sample = extract_patches(stack, mask, [center_at_pixel(64, 64)], 128)[0]
    shuffled = shuffle_temporal(sample, seed=9)
    for k, original_frame in enumerate(shuffled.permutation):
        assert np.array_equal(shuffled.image[k], sample.image[original_frame])
    assert np.array_equal(shuffled.mask, sample.mask)
    assert sorted(shuffled.permutation) == [0, 1, 2, 3, 4]


def test_shuffle_preserves_per_pixel_multiset(rng):
    stack, mask = scene_fixture(rng, T=6)
    sample = extract_patches(stack, mask, [center_at_pixel(64, 64)], 128)[0]
    shuffled = shuffle_temporal(sample, seed=77)
    assert np.array_equal(np.sort(sample.image, axis=0), np.sort(shuffled.image, axis=0))


def test_shuffle_keeps_composite_mean_bit_exact(rng):
    from ows.raster import temporal_mean

    stack, mask = scene_fixture(rng, T=7)
    sample = extract_patches(stack, mask, [center_at_pixel(64, 64)], 128)[0]
    shuffled = shuffle_temporal(sample, seed=5)
    before = temporal_mean(sample.image.astype(np.float64))
    after = temporal_mean(shuffled.image.astype(np.float64))
    assert np.array_equal(before, after)


def test_fixed_eval_shuffle_deterministic(rng):
    stack, mask = scene_fixture(rng, size=160, T=5)
    centers = [center_at_pixel(70 + i, 80, "locV") for i in range(8)]
    samples = extract_patches(stack, mask, centers, 128, clamp=True)
    assign_splits(samples, {"locV": "val"})
    once = fixed_eval_shuffle(samples, seed=42)
    twice = fixed_eval_shuffle(samples, seed=42)
    for a, b in zip(once, twice):
        assert np.array_equal(a.image, b.image)
        assert a.permutation == b.permutation


def test_fixed_eval_shuffle_seeds_differ(rng):
    # statistically: across 100 samples with T=5, two global seeds must
    # produce at least one differing permutation
    stack, mask = scene_fixture(rng, size=160, T=5)
    centers = [center_at_pixel(70, 80, "locV")] * 100
    samples = extract_patches(stack, mask, centers, 128, clamp=True)
    for i, sample in enumerate(samples):
        sample.index = i
    assign_splits(samples, {"locV": "test"})
    a = fixed_eval_shuffle(samples, seed=1)
    b = fixed_eval_shuffle(samples, seed=2)
    assert any(x.permutation != y.permutation for x, y in zip(a, b))


def test_fixed_eval_shuffle_rejects_train_samples(rng):
    stack, mask = scene_fixture(rng)
    samples = extract_patches(stack, mask, [center_at_pixel(64, 64)], 128)
    assign_splits(samples, {"locA": "train"})
    with pytest.raises(ValueError):
        fixed_eval_shuffle(samples, seed=3)


def test_derive_shuffle_seed_frozen_vectors():
    # frozen oracle values: sha256(b"ows.shuffle.v1" + pack(">QQQ", ...))[:8]
    import hashlib
    import struct

    for args in [(0, 0, 0), (1, 2, 3), (2**63, 7, 11)]:
        payload = b"ows.shuffle.v1" + struct.pack(">QQQ", *[a & (2**64 - 1) for a in args])
        expected = int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")
        assert derive_shuffle_seed(*args) == expected
    assert derive_shuffle_seed(0, 0, 0) == 5299900042015608766


def test_dataset_save_load_roundtrip(rng, tmp_path):
    stack, mask = scene_fixture(rng, size=160, T=3)
    centers = [center_at_pixel(70, 70, "locA"), center_at_pixel(85, 85, "locB")]
    samples = extract_patches(stack, mask, centers, 128, clamp=True)
    assign_splits(samples, {"locA": "train", "locB": "val"})
    save_dataset(samples, tmp_path / "ds", global_seed=5)
    loaded = load_dataset(tmp_path / "ds")
    assert len(loaded) == 2
    for orig, back in zip(samples, loaded):
        assert np.array_equal(orig.image, back.image)
        assert np.array_equal(orig.mask, back.mask)
        assert orig.split == back.split
        assert orig.permutation == back.permutation
        assert orig.dates == back.dates
    assert [s.split for s in load_dataset(tmp_path / "ds", split="val")] == ["val"]


def test_read_centers_geojson(tmp_path):
    scene = generate(SyntheticSceneSpec(width=64, height=64, T=2, n_turbines=3, n_ships=0, seed=3))
    write_scene(scene, tmp_path / "scene", n_locations=2)
    centers = read_centers_geojson(tmp_path / "scene" / "centers.geojson")
    assert len(centers) == 3
    assert {c.location_id for c in centers} == {"loc00", "loc01"}


def test_export_coco_two_instances(rng, tmp_path):
    bits = np.zeros((32, 32), dtype=bool)
    bits[2:5, 2:5] = True  # area 9
    bits[20:22, 20:26] = True  # area 12
    labeled = connected_components(make_mask(bits))
    doc = export_coco([("scene.tif", labeled)], tmp_path / "coco.json")
    assert len(doc["images"]) == 1
    assert len(doc["annotations"]) == 2
    oracle_areas = sorted(len(c) for c in flood_fill_components(bits))
    assert sorted(a["area"] for a in doc["annotations"]) == oracle_areas
    assert doc["categories"] == [
        {"id": 1, "name": "wind_plant", "supercategory": "infrastructure"}
    ]
    ann = doc["annotations"][0]
    assert ann["bbox"] == [2, 2, 3, 3]


def test_export_coco_empty_mask(tmp_path):
    labeled = connected_components(make_mask(np.zeros((8, 8), dtype=bool)))
    doc = export_coco([("empty.tif", labeled)], tmp_path / "coco.json")
    assert len(doc["images"]) == 1
    assert doc["annotations"] == []


def test_export_coco_polygons_rasterize_back_exactly(rng, tmp_path):
    # roundtrip oracle: polygon segmentations must reproduce instance pixels
    bits = rng.random((24, 24)) > 0.6
    labeled = connected_components(make_mask(bits))
    export_coco([("x.tif", labeled)], tmp_path / "coco.json")
    polyset = polygonize(labeled)
    assert np.array_equal(rasterize(polyset).labels, labeled.labels)


def test_export_coco_from_patches(rng, tmp_path):
    stack, _ = scene_fixture(rng, size=160, T=2)
    bits = np.zeros((160, 160), dtype=bool)
    bits[70:74, 70:74] = True
    mask = make_mask(bits)
    samples = extract_patches(stack, mask, [center_at_pixel(72, 72)], 128, clamp=True)
    doc = export_coco(samples, tmp_path / "coco.json")
    assert len(doc["annotations"]) == 1
    assert doc["annotations"][0]["area"] == 16
