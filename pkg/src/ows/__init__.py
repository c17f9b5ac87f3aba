"""Offshore wind plant detection from SAR backscatter time series.

Pipeline stages: ground-truth masks from temporal composites, patch dataset
construction with temporal-shuffle augmentation, sliding-window full-scene
inference, semantic-to-instance conversion, and pixel/object evaluation,
plus a deterministic synthetic scene generator for desk-scale experiments.
"""

from .dataset import (
    CenterPoint,
    PatchSample,
    assign_splits,
    derive_shuffle_seed,
    export_coco,
    extract_patches,
    fixed_eval_shuffle,
    load_dataset,
    save_dataset,
    shuffle_temporal,
)
from .evaluation import (
    EvalReport,
    ObjectCounts,
    ObjectMetrics,
    PixelConfusion,
    PixelMetrics,
    evaluate_patchset,
    match_objects,
    object_metrics,
    pixel_confusion,
    pixel_metrics,
)
from .groundtruth import clean_mask, composite_mean, threshold_mask
from .inference import (
    BaselineTemporalSegmenter,
    PlaybackSegmenter,
    SegmenterContract,
    StitchConfig,
    stitch_predict,
    window_origins,
)
from .instances import (
    InstancePolygonSet,
    LabeledMask,
    connected_components,
    polygonize,
    rasterize,
)
from .raster import (
    BinaryMask,
    GeoTransform,
    Raster,
    SarStack,
    load_stack,
    map_to_pixel,
    pixel_to_map,
    save_stack,
    subset_recent,
)
from .synth import SyntheticScene, SyntheticSceneSpec, degrade_to_single_frame, generate

__version__ = "0.1.0"

__all__ = [
    "BaselineTemporalSegmenter",
    "BinaryMask",
    "CenterPoint",
    "EvalReport",
    "GeoTransform",
    "InstancePolygonSet",
    "LabeledMask",
    "ObjectCounts",
    "ObjectMetrics",
    "PatchSample",
    "PixelConfusion",
    "PixelMetrics",
    "PlaybackSegmenter",
    "Raster",
    "SarStack",
    "SegmenterContract",
    "StitchConfig",
    "SyntheticScene",
    "SyntheticSceneSpec",
    "assign_splits",
    "clean_mask",
    "composite_mean",
    "connected_components",
    "degrade_to_single_frame",
    "derive_shuffle_seed",
    "evaluate_patchset",
    "export_coco",
    "extract_patches",
    "fixed_eval_shuffle",
    "generate",
    "load_dataset",
    "load_stack",
    "map_to_pixel",
    "match_objects",
    "object_metrics",
    "pixel_confusion",
    "pixel_metrics",
    "pixel_to_map",
    "polygonize",
    "rasterize",
    "save_dataset",
    "save_stack",
    "shuffle_temporal",
    "stitch_predict",
    "subset_recent",
    "threshold_mask",
    "window_origins",
]
