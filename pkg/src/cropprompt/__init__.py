"""cropprompt: land-cover rasters turned into point prompts for
prompt-conditioned cropland segmentation."""

from .backend import BackendInterface, OracleBackend, binarize, oracle_decode, run_iterative
from .geotiff import read_raster, write_raster
from .metrics import AggregateReport, ConfusionMatrix, MetricsReport, aggregate, compute_metrics, confusion
from .prelabel import ClassMap, PreLabel, compute_proportions, make_prelabel, remap_to_binary
from .raster import CrsId, GeoRaster, GeoTransform, GridSpec, extract_window_resampled, pixel_to_world, world_to_pixel
from .sampler import (NEGATIVE, POSITIVE, PromptPlan, PromptPoint, SamplerConfig,
                      flip_labels, jitter_points, partition_batches, sample_prompts)

__version__ = "0.1.0"

__all__ = [
    "BackendInterface", "OracleBackend", "binarize", "oracle_decode", "run_iterative",
    "read_raster", "write_raster",
    "AggregateReport", "ConfusionMatrix", "MetricsReport", "aggregate",
    "compute_metrics", "confusion",
    "ClassMap", "PreLabel", "compute_proportions", "make_prelabel", "remap_to_binary",
    "CrsId", "GeoRaster", "GeoTransform", "GridSpec", "extract_window_resampled",
    "pixel_to_world", "world_to_pixel",
    "NEGATIVE", "POSITIVE", "PromptPlan", "PromptPoint", "SamplerConfig",
    "flip_labels", "jitter_points", "partition_batches", "sample_prompts",
    "__version__",
]
