"""Deterministic synthetic SAR-like scenes for desk-scale experiments.

Static bright targets (turbines) persist across every frame; transient
bright targets (ships) appear in a handful of frames and average out of the
temporal composite; the sea background is gaussian noise in dB clamped to
stay below the detection threshold. Shapes are identical between turbines
and ships on purpose: temporal behavior, not morphology, is what separates
the classes here.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from . import geotiff
from .errors import BoundsError, PlacementError
from .instances import LabeledMask, connected_components
from .raster import (
    BinaryMask,
    GeoTransform,
    Raster,
    SarStack,
    pixel_to_map,
    save_stack,
    write_mask,
)

# Sea samples are capped here so no single frame crosses the 0 dB threshold;
# with the default sigma the unclamped tail above 0 dB would be ~3e-7 anyway.
SEA_CLAMP_DB = -0.5

_REVISIT_DAYS = 12  # Sentinel-1-like repeat cycle, purely cosmetic


@dataclass(frozen=True)
class SyntheticSceneSpec:
    width: int = 256
    height: int = 256
    T: int = 15
    n_turbines: int = 12
    turbine_db: float = 5.0
    turbine_radius_px: int = 1
    sea_mean_db: float = -15.0
    noise_sigma_db: float = 3.0
    n_ships: int = 6
    ship_db: float = 5.0
    ship_frames_each: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.turbine_db > 0 > self.sea_mean_db):
            raise ValueError("need turbine_db > 0 > sea_mean_db")
        if self.T < 1 or self.width < 1 or self.height < 1:
            raise ValueError("scene dims and T must be positive")
        if self.ship_frames_each > self.T:
            raise ValueError("ship_frames_each exceeds T")


@dataclass(frozen=True)
class SyntheticScene:
    spec: SyntheticSceneSpec
    stack: SarStack
    gt_mask: BinaryMask
    gt_labeled: LabeledMask
    turbine_centers: tuple[tuple[int, int], ...]  # (row, col)
    ship_log: tuple[tuple[int, tuple[int, int]], ...] = field(default_factory=tuple)  # (frame, (row, col))


def _footprint(radius: int) -> list[tuple[int, int]]:
    return [
        (dr, dc)
        for dr in range(-radius, radius + 1)
        for dc in range(-radius, radius + 1)
        if dr * dr + dc * dc <= radius * radius
    ]


def _place_targets(rng: np.random.Generator, spec: SyntheticSceneSpec, n: int) -> list[tuple[int, int]]:
    """Random centers with footprints inside the scene and pairwise center
    separation > 2*(radius+1) px so instances can never merge."""
    min_sep = 2 * (spec.turbine_radius_px + 1)
    margin = spec.turbine_radius_px
    lo_r, hi_r = margin, spec.height - 1 - margin
    lo_c, hi_c = margin, spec.width - 1 - margin
    if lo_r > hi_r or lo_c > hi_c:
        raise PlacementError("scene too small for the target footprint")
    placed: list[tuple[int, int]] = []
    attempts = 0
    max_attempts = 10_000 * max(n, 1)
    while len(placed) < n:
        if attempts >= max_attempts:
            raise PlacementError(
                f"could not place {n} targets with separation {min_sep}px after {attempts} tries"
            )
        attempts += 1
        r = int(rng.integers(lo_r, hi_r + 1))
        c = int(rng.integers(lo_c, hi_c + 1))
        if all(math.hypot(r - pr, c - pc) > min_sep for pr, pc in placed):
            placed.append((r, c))
    return placed


def generate(spec: SyntheticSceneSpec) -> SyntheticScene:
    """Build a fully seed-deterministic scene (same spec + seed => same bits)."""
    rng = np.random.default_rng(spec.seed)
    positions = _place_targets(rng, spec, spec.n_turbines + spec.n_ships)
    turbines = positions[: spec.n_turbines]
    ships = positions[spec.n_turbines :]
    footprint = _footprint(spec.turbine_radius_px)

    frames_values = []
    for _ in range(spec.T):
        noise = rng.normal(spec.sea_mean_db, spec.noise_sigma_db, size=(spec.height, spec.width))
        frames_values.append(np.minimum(noise, SEA_CLAMP_DB))

    gt_bits = np.zeros((spec.height, spec.width), dtype=bool)
    for r, c in turbines:
        for dr, dc in footprint:
            gt_bits[r + dr, c + dc] = True
    for values in frames_values:
        values[gt_bits] = spec.turbine_db

    ship_log: list[tuple[int, tuple[int, int]]] = []
    for r, c in ships:
        frame_ids = sorted(int(i) for i in rng.choice(spec.T, size=spec.ship_frames_each, replace=False))
        for frame_id in frame_ids:
            for dr, dc in footprint:
                frames_values[frame_id][r + dr, c + dc] = spec.ship_db
            ship_log.append((frame_id, (r, c)))

    transform = GeoTransform(
        origin_x=400_000.0, origin_y=6_000_000.0, pixel_w=10.0, pixel_h=10.0, crs="EPSG:32630"
    )
    start = date(2022, 8, 2)
    dates = tuple(start + timedelta(days=_REVISIT_DAYS * i) for i in range(spec.T))
    frames = tuple(
        Raster(values=values.astype(np.float32), transform=transform) for values in frames_values
    )
    stack = SarStack(frames=frames, dates=dates)
    gt_mask = BinaryMask(bits=gt_bits, transform=transform)
    gt_labeled = connected_components(gt_mask, connectivity=8)
    return SyntheticScene(
        spec=spec,
        stack=stack,
        gt_mask=gt_mask,
        gt_labeled=gt_labeled,
        turbine_centers=tuple(turbines),
        ship_log=tuple(ship_log),
    )


def degrade_to_single_frame(scene: SyntheticScene, frame_index: int) -> SarStack:
    """One-frame stack keeping georeferencing and that frame's ships."""
    if not 0 <= frame_index < scene.stack.T:
        raise BoundsError(f"frame_index {frame_index} outside [0, {scene.stack.T})")
    return SarStack(
        frames=(scene.stack.frames[frame_index],), dates=(scene.stack.dates[frame_index],)
    )


def ship_frame_indices(scene: SyntheticScene) -> list[int]:
    """Frame indices that contain at least one ship, busiest first.

    Ties break toward the lower index so the choice is deterministic.
    """
    counts: dict[int, int] = {}
    for frame_id, _ in scene.ship_log:
        counts[frame_id] = counts.get(frame_id, 0) + 1
    return sorted(counts, key=lambda f: (-counts[f], f))


def write_scene(scene: SyntheticScene, out_dir: str | os.PathLike, n_locations: int = 1) -> Path:
    """Persist manifest + frames + ground truth + turbine centers + ship log.

    Turbine centers become the GeoJSON center-point file consumed by the
    dataset builder, with location_id assigned round-robin over n_locations
    pseudo-sites so location-disjoint splits are possible downstream.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = save_stack(scene.stack, out_dir)
    write_mask(out_dir / "gt_mask.tif", scene.gt_mask)

    t = scene.stack.transform
    features = []
    for i, (r, c) in enumerate(scene.turbine_centers):
        # center of the footprint pixel, not its corner
        x, y = pixel_to_map(t, r + 0.5, c + 0.5)
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [x, y]},
                "properties": {"location_id": f"loc{i % max(n_locations, 1):02d}"},
            }
        )
    centers = {
        "type": "FeatureCollection",
        "crs": {"type": "name", "properties": {"name": t.crs}},
        "features": features,
    }
    geotiff.write_json_atomic(out_dir / "centers.geojson", json.dumps(centers, indent=2) + "\n")

    ships_doc = {"ship_log": [{"frame": f, "row": r, "col": c} for f, (r, c) in scene.ship_log]}
    geotiff.write_json_atomic(out_dir / "ships.json", json.dumps(ships_doc, indent=2) + "\n")
    return manifest_path
