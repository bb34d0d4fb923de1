"""Georeferenced raster grids and the affine pixel/world math.

Conventions
-----------
* Geotransform coefficients follow the GDAL ordering
  ``(origin_x, pixel_w, shear_x, origin_y, shear_y, pixel_h)`` with the
  origin at the outer corner of the top-left pixel.
* All coordinate math uses pixel centers: integer pixel ``(col, row)``
  sits at fractional offsets ``(col + 0.5, row + 0.5)`` from the origin.
* Raster data is band-major: a ``(bands, height, width)`` numpy array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CrsMismatch, SingularTransform


@dataclass(frozen=True)
class GeoTransform:
    """Affine map between pixel indices and world coordinates."""

    origin_x: float
    pixel_w: float
    shear_x: float
    origin_y: float
    shear_y: float
    pixel_h: float

    @property
    def det(self) -> float:
        return self.pixel_w * self.pixel_h - self.shear_x * self.shear_y

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.origin_x, self.pixel_w, self.shear_x,
                self.origin_y, self.shear_y, self.pixel_h)

    @classmethod
    def from_tuple(cls, coeffs) -> "GeoTransform":
        return cls(*(float(c) for c in coeffs))


@dataclass(frozen=True)
class CrsId:
    """Coordinate reference system as an EPSG code."""

    code: int

    def __post_init__(self):
        if self.code <= 0:
            raise ValueError(f"EPSG code must be positive, got {self.code}")


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a raster grid without pixel data."""

    width: int
    height: int
    geotransform: GeoTransform
    crs: CrsId

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be >= 1")


@dataclass(frozen=True)
class GeoRaster:
    """Pixel grid plus geotransform and CRS.

    ``data`` is a band-major ``(bands, height, width)`` array and is frozen
    after construction so rasters can be shared across workers.
    """

    data: np.ndarray
    geotransform: GeoTransform
    crs: CrsId
    nodata: Optional[float] = None
    _frozen: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[np.newaxis, :, :]
        if arr.ndim != 3:
            raise ValueError(f"data must be 2-D or 3-D, got ndim={arr.ndim}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError("raster dimensions must be >= 1")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.width, self.height, self.geotransform, self.crs)

    def band(self, i: int = 0) -> np.ndarray:
        return self.data[i]


def pixel_to_world(gt: GeoTransform, col, row):
    """Map fractional pixel indices to world coordinates (pixel centers).

    Accepts scalars or numpy arrays; returns ``(x, y)`` of the same shape.
    """
    cc = np.asarray(col, dtype=float) + 0.5
    rr = np.asarray(row, dtype=float) + 0.5
    x = gt.origin_x + cc * gt.pixel_w + rr * gt.shear_x
    y = gt.origin_y + cc * gt.shear_y + rr * gt.pixel_h
    if np.isscalar(col) or (isinstance(col, (int, float)) and isinstance(row, (int, float))):
        return float(x), float(y)
    return x, y


def world_to_pixel(gt: GeoTransform, x, y):
    """Invert :func:`pixel_to_world`; returns fractional ``(col, row)``.

    Raises SingularTransform when the geotransform is not invertible.
    """
    det = gt.det
    if det == 0.0:
        raise SingularTransform(f"geotransform {gt.as_tuple()} has zero determinant")
    dx = np.asarray(x, dtype=float) - gt.origin_x
    dy = np.asarray(y, dtype=float) - gt.origin_y
    cc = (gt.pixel_h * dx - gt.shear_x * dy) / det
    rr = (-gt.shear_y * dx + gt.pixel_w * dy) / det
    col = cc - 0.5
    row = rr - 0.5
    if np.isscalar(x) or (isinstance(x, (int, float)) and isinstance(y, (int, float))):
        return float(col), float(row)
    return col, row


def extract_window_resampled(src: GeoRaster, target: GridSpec,
                             fill: Optional[float] = None) -> tuple[GeoRaster, float]:
    """Resample a single-band categorical raster onto a target grid.

    Every output pixel takes the value of the source pixel whose center is
    nearest to the output pixel's center mapped into source pixel space
    (nearest neighbor; exact half-pixel ties round to the higher index).
    Output pixels whose centers fall outside the source extent receive the
    source nodata value, or ``fill`` (default 0) when the source has none.

    Returns the resampled raster and the coverage fraction: the share of
    output pixels whose centers landed inside the source extent. An empty
    overlap is not an error; it yields an all-fill raster with coverage 0.
    """
    if src.crs != target.crs:
        raise CrsMismatch(f"source EPSG:{src.crs.code} != target EPSG:{target.crs.code}")
    if src.bands != 1:
        raise ValueError("extract_window_resampled expects a single-band source")

    fill_value = src.nodata if src.nodata is not None else (0 if fill is None else fill)
    if np.issubdtype(np.asarray(src.data).dtype, np.integer):
        fill_value = int(fill_value)
    else:
        fill_value = float(fill_value)

    cgrid, rgrid = np.meshgrid(np.arange(target.width), np.arange(target.height))
    x, y = pixel_to_world(target.geotransform, cgrid, rgrid)
    scol, srow = world_to_pixel(src.geotransform, x, y)
    ci = np.floor(scol + 0.5).astype(np.int64)
    ri = np.floor(srow + 0.5).astype(np.int64)
    valid = (ci >= 0) & (ci < src.width) & (ri >= 0) & (ri < src.height)

    out = np.full((target.height, target.width), fill_value, dtype=src.data.dtype)
    out[valid] = src.band(0)[ri[valid], ci[valid]]
    coverage = float(valid.mean())

    raster = GeoRaster(out[np.newaxis], target.geotransform, target.crs,
                       nodata=fill_value)
    return raster, coverage
