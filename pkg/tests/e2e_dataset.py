"""Deterministic synthetic dataset for end-to-end pipeline checks.

Eight RGB tiles with smooth-blob cropland ground truth; the land-cover
mosaic is the ground truth majority-coarsened by `factor` (0.5 m -> 10 m
for factor 20) with a fixed fraction of cells flipped, mimicking a coarse,
partly wrong land-cover product over sub-meter imagery.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy import ndimage

from cropprompt.geotiff import write_raster
from cropprompt.raster import CrsId, GeoRaster, GeoTransform

EPSG = CrsId(32650)
CROP_CODE = 40
NONCROP_CODE = 10
GLC_NODATA = 0

DATASET_SPEC = {
    "seed": 20240811,
    "n_tiles": 8,
    "tile_size": 320,
    "pixel_size": 0.5,
    "coarsen_factor": 20,
    "corrupt_fraction": 0.1,
    "grid_cols": 4,
    "origin_x": 500000.0,
    "origin_y": 3100000.0,
}


def tile_ids(spec=None):
    spec = spec or DATASET_SPEC
    return [f"tile_{i:02d}" for i in range(spec["n_tiles"])]


def tile_origin(i, spec=None):
    spec = spec or DATASET_SPEC
    size_m = spec["tile_size"] * spec["pixel_size"]
    row, col = divmod(i, spec["grid_cols"])
    return (spec["origin_x"] + col * size_m, spec["origin_y"] - row * size_m)


def _ground_truth(rng, size):
    """Smooth random blobs with both classes guaranteed present."""
    noise = rng.normal(size=(size, size))
    smooth = ndimage.gaussian_filter(noise, sigma=size / 14)
    quantile = rng.uniform(0.35, 0.65)
    mask = (smooth > np.quantile(smooth, quantile)).astype(np.uint8)
    if mask.all() or not mask.any():  # extremely unlikely; keep both classes
        mask[0, 0] = 1 - mask[0, 0]
    return mask


def _majority_coarsen(mask, factor):
    h, w = mask.shape
    blocks = mask.reshape(h // factor, factor, w // factor, factor)
    return (blocks.mean(axis=(1, 3)) > 0.5).astype(np.uint8)


def build_dataset(root, spec=None) -> dict:
    """Write images/, gt/ and glc.tif under root; fully deterministic."""
    spec = dict(spec or DATASET_SPEC)
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "gt").mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(spec["seed"])
    size = spec["tile_size"]
    px = spec["pixel_size"]
    factor = spec["coarsen_factor"]
    cells_per_tile = size // factor
    grid_cols = spec["grid_cols"]
    grid_rows = math.ceil(spec["n_tiles"] / grid_cols)

    glc_cells = np.full((grid_rows * cells_per_tile, grid_cols * cells_per_tile),
                        NONCROP_CODE, np.int32)
    gts = {}
    for i, tile_id in enumerate(tile_ids(spec)):
        gt_mask = _ground_truth(rng, size)
        gts[tile_id] = gt_mask
        ox, oy = tile_origin(i, spec)
        transform = GeoTransform(ox, px, 0.0, oy, 0.0, -px)
        image = rng.integers(0, 256, (3, size, size)).astype(np.uint8)
        write_raster(root / "images" / f"{tile_id}.tif",
                     GeoRaster(image, transform, EPSG))
        write_raster(root / "gt" / f"{tile_id}.tif",
                     GeoRaster(gt_mask[np.newaxis], transform, EPSG, nodata=255))
        coarse = _majority_coarsen(gt_mask, factor)
        row, col = divmod(i, grid_cols)
        r0, c0 = row * cells_per_tile, col * cells_per_tile
        glc_cells[r0:r0 + cells_per_tile, c0:c0 + cells_per_tile] = \
            np.where(coarse == 1, CROP_CODE, NONCROP_CODE)

    n_corrupt = math.floor(spec["corrupt_fraction"] * glc_cells.size)
    flat = rng.choice(glc_cells.size, size=n_corrupt, replace=False)
    rr, cc = np.unravel_index(flat, glc_cells.shape)
    flipped = np.where(glc_cells[rr, cc] == CROP_CODE, NONCROP_CODE, CROP_CODE)
    glc_cells[rr, cc] = flipped

    glc_transform = GeoTransform(spec["origin_x"], px * factor, 0.0,
                                 spec["origin_y"], 0.0, -px * factor)
    write_raster(root / "glc.tif",
                 GeoRaster(glc_cells[np.newaxis], glc_transform, EPSG,
                           nodata=GLC_NODATA))
    return {"spec": spec, "gts": gts}


def write_config(root, seed=1234, workers=1, extra="") -> Path:
    """Standard YAML config pointing at a built dataset."""
    root = Path(root)
    text = f"""image_dir: images
glc_path: glc.tif
gt_dir: gt
output_dir: out
backend: oracle
seed: {seed}
coverage_threshold: 0.5
workers: {workers}
class_map:
  cropland_codes: [{CROP_CODE}]
sampler:
  n_pos: 30
  n_neg: 30
  n_batches: 3
{extra}"""
    path = root / "config.yaml"
    path.write_text(text)
    return path
