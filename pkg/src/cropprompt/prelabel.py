"""Binary cropland pre-labels derived from a global land-cover raster.

The land-cover window is resampled onto the image grid (nearest neighbor)
and remapped to a binary mask: 1 where the source class is in the cropland
code set, 0 elsewhere. Pixels without source coverage are tracked in a
separate validity grid and excluded from the class proportions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NoCoverage
from .raster import GeoRaster, GridSpec, extract_window_resampled

# ESA WorldCover legend: class 40 is cropland. Overridable per run.
DEFAULT_CROPLAND_CODES = frozenset({40})

PRELABEL_NODATA = 255


@dataclass(frozen=True)
class ClassMap:
    """Source land-cover codes counted as cropland."""

    cropland_codes: frozenset[int] = DEFAULT_CROPLAND_CODES

    def __post_init__(self):
        codes = frozenset(int(c) for c in self.cropland_codes)
        if not codes:
            raise ValueError("cropland_codes must be non-empty")
        object.__setattr__(self, "cropland_codes", codes)


@dataclass(frozen=True)
class PreLabel:
    """Binary cropland mask on the image grid plus coverage statistics.

    ``mask`` is 1 on cropland, ``valid`` is 1 where the land-cover source
    had coverage; proportions are computed over valid pixels only and are
    None when there is no coverage at all.
    """

    mask: np.ndarray
    valid: np.ndarray
    p_crop: Optional[float]
    p_noncrop: Optional[float]
    coverage: float

    def __post_init__(self):
        if self.mask.shape != self.valid.shape:
            raise ValueError("mask and valid grids must have identical shape")
        for name in ("mask", "valid"):
            arr = getattr(self, name)
            if arr.flags.writeable:
                arr = arr.copy()
                arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]


def _from_grids(mask: np.ndarray, valid: np.ndarray) -> PreLabel:
    coverage = float(valid.mean())
    if coverage > 0:
        p_crop = float(mask[valid.astype(bool)].mean())
        return PreLabel(mask, valid, p_crop, 1.0 - p_crop, coverage)
    return PreLabel(mask, valid, None, None, 0.0)


def remap_to_binary(glc_window: GeoRaster, class_map: ClassMap) -> PreLabel:
    """Remap a single-band land-cover window to a binary cropland mask."""
    if glc_window.bands != 1:
        raise ValueError("remap_to_binary expects a single-band raster")
    values = glc_window.band(0)
    if glc_window.nodata is not None:
        valid = values != glc_window.nodata
    else:
        valid = np.ones(values.shape, dtype=bool)
    codes = np.asarray(sorted(class_map.cropland_codes))
    mask = np.isin(values, codes) & valid
    return _from_grids(mask.astype(np.uint8), valid.astype(np.uint8))


def compute_proportions(prelabel: PreLabel) -> tuple[float, float]:
    """Cropland / non-cropland area shares over valid pixels."""
    if prelabel.coverage == 0:
        raise NoCoverage("pre-label has no valid source pixels")
    return prelabel.p_crop, prelabel.p_noncrop


def make_prelabel(image: GeoRaster, glc: GeoRaster, class_map: ClassMap) -> PreLabel:
    """Window the land-cover raster onto the image grid and remap it.

    The result is aligned pixel-for-pixel with the image. Raises CrsMismatch
    when the rasters disagree on CRS; zero overlap is not an error and shows
    up as coverage 0.
    """
    window, _ = extract_window_resampled(glc, image.grid)
    return remap_to_binary(window, class_map)


def prelabel_to_raster(prelabel: PreLabel, grid: GridSpec) -> GeoRaster:
    """Debug view of a pre-label: 0/1 mask with nodata 255 where invalid."""
    out = np.where(prelabel.valid.astype(bool), prelabel.mask,
                   np.uint8(PRELABEL_NODATA)).astype(np.uint8)
    return GeoRaster(out[np.newaxis], grid.geotransform, grid.crs,
                     nodata=PRELABEL_NODATA)


def prelabel_from_raster(raster: GeoRaster) -> PreLabel:
    """Rebuild a PreLabel from the debug raster written by prelabel_to_raster."""
    values = raster.band(0)
    valid = (values != PRELABEL_NODATA).astype(np.uint8)
    mask = ((values == 1) & valid.astype(bool)).astype(np.uint8)
    return _from_grids(mask, valid)
