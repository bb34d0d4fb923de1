"""Step 2 of the workflow: balanced, spatially uniform point prompts from a
pre-label, partitioned into iteration batches, plus the noise operators
used by the robustness ablation.

Run from the repository root:  python demos/03_prompt_sampling.py
"""

import json

import numpy as np

from cropprompt import (CrsId, GeoTransform, GridSpec, POSITIVE, SamplerConfig,
                        flip_labels, jitter_points, sample_prompts)
from cropprompt.prelabel import PreLabel
from cropprompt.sampler import plan_to_geojson

# Pre-label: cropland fills the left half of a 120x120 tile.
mask = np.zeros((120, 120), np.uint8)
mask[:, :60] = 1
prelabel = PreLabel(mask=mask, valid=np.ones_like(mask),
                    p_crop=0.5, p_noncrop=0.5, coverage=1.0)

# Defaults: 30 positive + 30 negative points dealt into 3 batches.
config = SamplerConfig(seed=42)
plan = sample_prompts(prelabel, config)
print(f"{plan.n_points} points in {len(plan.batches)} batches")
for i, batch in enumerate(plan.batches):
    pos = sum(1 for p in batch if p.label == POSITIVE)
    print(f"  batch {i}: {pos} positive + {len(batch) - pos} negative")

# Every positive sits on cropland, every negative off it.
ok = all(mask[p.row, p.col] == (1 if p.label == POSITIVE else 0)
         for p in plan.points)
print(f"membership holds: {ok}")

# Stratified sampling spreads points over the class region instead of
# clumping: count points per 30-pixel band of the cropland half.
bands = np.zeros(4, int)
for p in plan.points:
    if p.label == POSITIVE:
        bands[p.row // 30] += 1
print(f"positives per horizontal band: {bands.tolist()} (ideal 7.5 each)")

# Same seed, same plan -- sampling is deterministic.
print(f"deterministic: {sample_prompts(prelabel, config) == plan}")

# Plans serialize as GeoJSON with world coordinates for GIS tools.
grid = GridSpec(120, 120, GeoTransform(500000, 0.5, 0, 3100000, 0, -0.5),
                CrsId(32650))
feature = plan_to_geojson(plan, grid)["features"][0]
print("first feature:", json.dumps(feature, sort_keys=True))

# Noise operators for the robustness study: label flips and jitter.
noisy = flip_labels(plan, 0.2, seed=7)
changed = sum(1 for a, b in zip(plan.points, noisy.points) if a.label != b.label)
print(f"flip_labels(0.2): exactly {changed} of {plan.n_points} labels inverted")
moved = jitter_points(plan, radius=2, seed=7)
max_shift = max(max(abs(a.col - b.col), abs(a.row - b.row))
                for a, b in zip(plan.points, moved.points))
print(f"jitter radius 2: max displacement {max_shift} pixels")
