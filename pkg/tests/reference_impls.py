"""Slow, loop-based reference implementations used as independent oracles.

Everything here is deliberately written with plain Python loops and scalar
arithmetic, sharing no code with the library's vectorized paths. Tests and
the end-to-end fixture generator compare the library against these.
"""

from __future__ import annotations

import math

import numpy as np

from cropprompt.raster import GeoRaster, GridSpec
from cropprompt.sampler import POSITIVE


def ref_pixel_to_world(gt, col, row):
    cc, rr = col + 0.5, row + 0.5
    return (gt.origin_x + cc * gt.pixel_w + rr * gt.shear_x,
            gt.origin_y + cc * gt.shear_y + rr * gt.pixel_h)


def ref_world_to_pixel(gt, x, y):
    det = gt.pixel_w * gt.pixel_h - gt.shear_x * gt.shear_y
    dx, dy = x - gt.origin_x, y - gt.origin_y
    cc = (gt.pixel_h * dx - gt.shear_x * dy) / det
    rr = (-gt.shear_y * dx + gt.pixel_w * dy) / det
    return cc - 0.5, rr - 0.5


def ref_resample(src: GeoRaster, target: GridSpec):
    """Per-pixel nearest-source-center loop; same tie and boundary rules
    as the library contract (round half up in index space)."""
    fill = src.nodata if src.nodata is not None else 0
    band = src.band(0)
    out = np.full((target.height, target.width), fill, dtype=band.dtype)
    n_valid = 0
    for r in range(target.height):
        for c in range(target.width):
            x, y = ref_pixel_to_world(target.geotransform, c, r)
            scol, srow = ref_world_to_pixel(src.geotransform, x, y)
            ci = math.floor(scol + 0.5)
            ri = math.floor(srow + 0.5)
            if 0 <= ci < src.width and 0 <= ri < src.height:
                out[r, c] = band[ri, ci]
                n_valid += 1
    coverage = n_valid / (target.height * target.width)
    return out, coverage


def ref_prelabel_mask(image_grid: GridSpec, glc: GeoRaster, cropland_codes):
    """Map every image pixel center into the land-cover grid and test
    membership directly."""
    mask = np.zeros((image_grid.height, image_grid.width), dtype=np.uint8)
    valid = np.zeros_like(mask)
    nodata = glc.nodata
    band = glc.band(0)
    for r in range(image_grid.height):
        for c in range(image_grid.width):
            x, y = ref_pixel_to_world(image_grid.geotransform, c, r)
            scol, srow = ref_world_to_pixel(glc.geotransform, x, y)
            ci = math.floor(scol + 0.5)
            ri = math.floor(srow + 0.5)
            if not (0 <= ci < glc.width and 0 <= ri < glc.height):
                continue
            value = band[ri, ci]
            if nodata is not None and value == nodata:
                continue
            valid[r, c] = 1
            if int(value) in cropland_codes:
                mask[r, c] = 1
    return mask, valid


def ref_oracle_mask(points, shape):
    """Per-pixel nearest-prompt classification, scalar loops only."""
    height, width = shape
    pts = sorted(points, key=lambda p: p.index)
    out = np.zeros((height, width), dtype=np.uint8)
    for r in range(height):
        for c in range(width):
            best_d2 = None
            best_pos = False
            for p in pts:
                d2 = (c - p.col) ** 2 + (r - p.row) ** 2
                if best_d2 is None or d2 < best_d2:
                    best_d2 = d2
                    best_pos = p.label == POSITIVE
            out[r, c] = 1 if best_pos else 0
    return out


def ref_confusion(pred, gt, ignore=None):
    """Scalar per-pixel confusion tally. Returns (tp, fp, fn, tn)."""
    tp = fp = fn = tn = 0
    h, w = np.asarray(pred).shape
    for r in range(h):
        for c in range(w):
            if ignore is not None and ignore[r][c]:
                continue
            p = bool(pred[r][c])
            g = bool(gt[r][c])
            if p and g:
                tp += 1
            elif p and not g:
                fp += 1
            elif not p and g:
                fn += 1
            else:
                tn += 1
    return tp, fp, fn, tn


def ref_metrics(tp, fp, fn, tn):
    """Scalar metric arithmetic; None where the denominator vanishes."""
    n = tp + fp + fn + tn
    oa = (tp + tn) / n if n else None
    iou_crop = tp / (tp + fp + fn) if (tp + fp + fn) else None
    iou_noncrop = tn / (tn + fn + fp) if (tn + fn + fp) else None
    defined = [v for v in (iou_crop, iou_noncrop) if v is not None]
    miou = sum(defined) / len(defined) if defined else None
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else None
    return oa, miou, f1, iou_crop, iou_noncrop
