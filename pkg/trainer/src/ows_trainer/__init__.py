"""Toy-scale training harness for the offshore wind detection pipeline.

Interoperates with the pipeline strictly through its external interfaces:
the patch dataset directory layout, GeoTIFF probability/mask rasters, the
stack manifest, and the `ows` CLI for evaluation.
"""

from .data import (
    DatasetFormatError,
    Patch,
    ShapeError,
    derive_shuffle_seed,
    epoch_permutation,
    inject_order_bias,
    load_patches,
)
from .models import TinyEncoderDecoder, build_model, parameter_count
from .predict import ChannelMismatchError, binarize_raster, predict_scene, write_patch_masks
from .train import ToyModelConfig, TrainRunRecord, load_weights, train

__version__ = "0.1.0"

__all__ = [
    "ChannelMismatchError",
    "DatasetFormatError",
    "Patch",
    "ShapeError",
    "TinyEncoderDecoder",
    "ToyModelConfig",
    "TrainRunRecord",
    "binarize_raster",
    "build_model",
    "derive_shuffle_seed",
    "epoch_permutation",
    "inject_order_bias",
    "load_patches",
    "load_weights",
    "parameter_count",
    "predict_scene",
    "train",
    "write_patch_masks",
]
