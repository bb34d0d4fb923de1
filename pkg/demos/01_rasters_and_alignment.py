"""Walk through the raster layer: geotransforms, GeoTIFF round trips, and
nearest-neighbor windowing of a coarse categorical grid onto a fine one.

Run from the repository root:  python demos/01_rasters_and_alignment.py
"""

import tempfile
from pathlib import Path

import numpy as np

from cropprompt import (CrsId, GeoRaster, GeoTransform, GridSpec,
                        extract_window_resampled, pixel_to_world, read_raster,
                        world_to_pixel, write_raster)

# A geotransform is the GDAL six-tuple: corner origin, pixel sizes, shears.
# Pixel (0, 0) sits half a pixel inside the origin corner.
gt = GeoTransform(origin_x=500000.0, pixel_w=0.5, shear_x=0.0,
                  origin_y=3100000.0, shear_y=0.0, pixel_h=-0.5)

x, y = pixel_to_world(gt, 0, 0)
print(f"pixel (0,0) center -> world ({x:.2f}, {y:.2f})")

col, row = world_to_pixel(gt, x, y)
print(f"back through the inverse -> pixel ({col:.9f}, {row:.9f})")

# GeoTIFF round trip: geometry exact, integer pixels bit-exact.
rng = np.random.default_rng(0)
tile = GeoRaster(rng.integers(0, 256, (3, 64, 64)).astype(np.uint8),
                 gt, CrsId(32650))
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "tile.tif"
    write_raster(path, tile)
    back = read_raster(path)
    print(f"round trip ok: {np.array_equal(back.data, tile.data)}, "
          f"crs=EPSG:{back.crs.code}")

# Resampling: a 10 m categorical grid windowed onto the 0.5 m image grid
# becomes 20x20 blocks of repeated values -- nearest neighbor only, since
# interpolating class codes would invent classes.
coarse = GeoRaster(np.array([[[40, 10], [10, 40]]], np.int32),
                   GeoTransform(500000.0, 10, 0, 3100000.0, 0, -10),
                   CrsId(32650), nodata=0)
fine_grid = GridSpec(40, 40, gt, CrsId(32650))
window, coverage = extract_window_resampled(coarse, fine_grid)
print(f"windowed {coarse.width}x{coarse.height} cells onto "
      f"{fine_grid.width}x{fine_grid.height} pixels, coverage {coverage:.2f}")
print("top-left 4x4 corner (code 40 block):")
print(window.band(0)[:4, :4])

# Partial overlap is not an error; it is surfaced as coverage < 1 so the
# pipeline can skip tiles by policy.
shifted = GridSpec(40, 40,
                   GeoTransform(500000.0 + 10, 0.5, 0, 3100000.0, 0, -0.5),
                   CrsId(32650))
_, partial = extract_window_resampled(coarse, shifted)
print(f"shifted window coverage: {partial:.3f}")
