"""Step 1 of the workflow: turn the land-cover window into a binary
cropland pre-label aligned with an image tile, with area proportions.

Run from the repository root:  python demos/02_prelabel_from_landcover.py
"""

import numpy as np

from cropprompt import (ClassMap, CrsId, GeoRaster, GeoTransform,
                        compute_proportions, make_prelabel)

EPSG = CrsId(32650)

# Synthetic 10 m land-cover mosaic: code 40 = cropland (the default class
# map), 10 = trees, 50 = built-up, 0 = nodata hole.
rng = np.random.default_rng(3)
cells = rng.choice([40, 40, 10, 50], size=(12, 12)).astype(np.int32)
cells[4:6, 4:6] = 0
glc = GeoRaster(cells[np.newaxis],
                GeoTransform(500000.0, 10, 0, 3100000.0, 0, -10),
                EPSG, nodata=0)

# A 0.5 m image tile sitting inside the mosaic.
image = GeoRaster(rng.integers(0, 256, (3, 160, 160)).astype(np.uint8),
                  GeoTransform(500010.0, 0.5, 0, 3099990.0, 0, -0.5), EPSG)

prelabel = make_prelabel(image, glc, ClassMap())
print(f"pre-label grid: {prelabel.width}x{prelabel.height}")
print(f"coverage: {prelabel.coverage:.3f} (nodata cells punch holes)")

p_crop, p_noncrop = compute_proportions(prelabel)
print(f"area proportions: cropland {p_crop:.3f}, non-cropland {p_noncrop:.3f}")

# The pre-label is block-structured: every 10 m cell stamps a 20x20 block.
block = prelabel.mask[:20, :20]
print(f"first block uniform: {block.min() == block.max()}")

# Other land-cover codes are interchangeable: only membership in the
# cropland set matters.
relabeled = np.where(cells == 10, np.int32(95), cells)
glc2 = GeoRaster(relabeled[np.newaxis], glc.geotransform, EPSG, nodata=0)
prelabel2 = make_prelabel(image, glc2, ClassMap())
print(f"mask invariant to non-cropland relabeling: "
      f"{np.array_equal(prelabel.mask, prelabel2.mask)}")
