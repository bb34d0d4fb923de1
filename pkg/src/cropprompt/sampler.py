"""Balanced, spatially uniform prompt points from a cropland pre-label.

Positive points are drawn on pre-label cropland pixels and negative points
on valid non-cropland pixels, one class at a time, using stratified grid
sampling: a ceil(sqrt(n)) x ceil(sqrt(n)) lattice of strata is laid over
the image and occupied strata are visited in row-major order, drawing one
uniformly random class pixel per visit without replacement, cycling until
n points exist. Plain uniform sampling clumps; strata give testable
uniformity. Everything is deterministic under the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np
from scipy import ndimage

from .errors import AbsentClass, NoCoverage
from .prelabel import PreLabel
from .raster import GridSpec, pixel_to_world, world_to_pixel

POSITIVE = 1
NEGATIVE = 0

_LABEL_NAMES = {POSITIVE: "positive", NEGATIVE: "negative"}
_LABEL_CODES = {v: k for k, v in _LABEL_NAMES.items()}


@dataclass(frozen=True)
class PromptPoint:
    """One point prompt: integer pixel position, class label, plan ordinal."""

    col: int
    row: int
    label: int
    index: int

    def __post_init__(self):
        if self.label not in (POSITIVE, NEGATIVE):
            raise ValueError(f"label must be {POSITIVE} or {NEGATIVE}")


@dataclass(frozen=True)
class SamplerConfig:
    n_pos: int = 30
    n_neg: int = 30
    n_batches: int = 3
    seed: int = 0
    edge_margin: int = 0
    min_class_pixels: int = 1
    absent_class_policy: str = "skip_class"  # or "error"

    def __post_init__(self):
        if self.n_batches < 1:
            raise ValueError("n_batches must be >= 1")
        if self.n_pos < 0 or self.n_neg < 0:
            raise ValueError("point counts must be >= 0")
        if self.absent_class_policy not in ("skip_class", "error"):
            raise ValueError(f"unknown absent_class_policy {self.absent_class_policy!r}")


@dataclass(frozen=True)
class PromptPlan:
    """Ordered prompt points partitioned into iteration batches."""

    batches: tuple[tuple[PromptPoint, ...], ...]
    seed: int
    config: SamplerConfig
    width: int
    height: int
    warnings: tuple[str, ...] = ()

    @property
    def points(self) -> list[PromptPoint]:
        return [p for batch in self.batches for p in batch]

    @property
    def n_points(self) -> int:
        return sum(len(b) for b in self.batches)

    def count(self, label: int) -> int:
        return sum(1 for p in self.points if p.label == label)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)


def _class_pixels(mask: np.ndarray, edge_margin: int) -> np.ndarray:
    """(row, col) pairs of candidate pixels, eroded by edge_margin when
    that leaves anything."""
    work = mask.astype(bool)
    if edge_margin > 0:
        eroded = ndimage.binary_erosion(work, structure=np.ones((3, 3), bool),
                                        iterations=edge_margin)
        if eroded.any():
            work = eroded
    return np.argwhere(work)


def _stratified_draw(pixels: np.ndarray, n: int, shape: tuple[int, int],
                     rng: np.random.Generator) -> list[tuple[int, int]]:
    """Draw up to n distinct (col, row) pixels, spread over grid strata."""
    if n == 0 or len(pixels) == 0:
        return []
    height, width = shape
    g = math.ceil(math.sqrt(n))
    strata_of = (pixels[:, 0] * g // height) * g + (pixels[:, 1] * g // width)

    queues = []
    for stratum in np.unique(strata_of):  # ascending == row-major visit order
        members = pixels[strata_of == stratum]
        order = rng.permutation(len(members))
        queues.append([tuple(members[i]) for i in order])

    drawn: list[tuple[int, int]] = []
    while len(drawn) < n and any(queues):
        for queue in queues:
            if len(drawn) >= n:
                break
            if queue:
                drawn.append(queue.pop())
    # All strata exhausted <=> every class pixel drawn; nothing left for a
    # global fallback draw, so the class simply comes up short.
    return [(int(c), int(r)) for r, c in drawn]


def sample_prompts(prelabel: PreLabel, config: SamplerConfig) -> PromptPlan:
    """Generate the prompt plan for one tile.

    Positives come first, then negatives; plan indices follow that order.
    A class with fewer than min_class_pixels candidates is skipped with a
    warning (or raises AbsentClass under the error policy). Fully
    deterministic given (prelabel, config).
    """
    if prelabel.coverage == 0:
        raise NoCoverage("cannot sample prompts without source coverage")

    shape = prelabel.mask.shape
    rng = _rng(config.seed)
    warnings: list[str] = []

    pos_mask = prelabel.mask.astype(bool)
    neg_mask = (~pos_mask) & prelabel.valid.astype(bool)

    coords: list[tuple[int, int, int]] = []
    for label, mask, n in ((POSITIVE, pos_mask, config.n_pos),
                           (NEGATIVE, neg_mask, config.n_neg)):
        name = _LABEL_NAMES[label]
        pixels = _class_pixels(mask, config.edge_margin)
        if len(pixels) < max(config.min_class_pixels, 1):
            if config.absent_class_policy == "error":
                raise AbsentClass(f"{name} class has {len(pixels)} pixels")
            if n > 0:
                warnings.append(f"{name} class absent; emitted 0 of {n} points")
            continue
        drawn = _stratified_draw(pixels, n, shape, rng)
        if len(drawn) < n:
            warnings.append(f"{name} class exhausted; emitted {len(drawn)} of {n} points")
        coords.extend((c, r, label) for c, r in drawn)

    points = [PromptPoint(col=c, row=r, label=lab, index=i)
              for i, (c, r, lab) in enumerate(coords)]
    batches = partition_batches(points, config.n_batches)
    return PromptPlan(batches=batches, seed=config.seed, config=config,
                      width=shape[1], height=shape[0], warnings=tuple(warnings))


def partition_batches(points: Iterable[PromptPoint], n_batches: int
                      ) -> tuple[tuple[PromptPoint, ...], ...]:
    """Deal positives then negatives round-robin into n_batches batches.

    Intra-class order is preserved; inside a batch positives precede
    negatives. The concatenation of all batches is a permutation of the
    input, and per-batch label counts stay within +-1 for equal inputs.
    """
    if n_batches < 1:
        raise ValueError("n_batches must be >= 1")
    points = list(points)
    pos = [p for p in points if p.label == POSITIVE]
    neg = [p for p in points if p.label == NEGATIVE]
    buckets: list[list[PromptPoint]] = [[] for _ in range(n_batches)]
    for i, p in enumerate(pos):
        buckets[i % n_batches].append(p)
    for i, p in enumerate(neg):
        buckets[i % n_batches].append(p)
    return tuple(tuple(b) for b in buckets)


def flip_labels(plan: PromptPlan, p: float, seed: int) -> PromptPlan:
    """Invert the labels of exactly floor(p * N) points chosen under seed.

    Positions and batch structure are untouched; applying the same flip
    twice restores the original plan.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("flip fraction must be in [0, 1]")
    n = plan.n_points
    k = math.floor(p * n)
    if k == 0:
        return plan
    chosen = set(_rng(seed).choice(n, size=k, replace=False).tolist())
    flat_pos = 0
    new_batches = []
    for batch in plan.batches:
        out = []
        for point in batch:
            if flat_pos in chosen:
                out.append(replace(point, label=POSITIVE if point.label == NEGATIVE
                                   else NEGATIVE))
            else:
                out.append(point)
            flat_pos += 1
        new_batches.append(tuple(out))
    return replace(plan, batches=tuple(new_batches))


def jitter_points(plan: PromptPlan, radius: int, seed: int) -> PromptPlan:
    """Displace every point by a uniform integer offset in [-radius, radius]^2,
    clamped to the grid. Labels unchanged; deterministic under seed."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return plan
    rng = _rng(seed)
    offsets = rng.integers(-radius, radius + 1, size=(plan.n_points, 2))
    flat_pos = 0
    new_batches = []
    for batch in plan.batches:
        out = []
        for point in batch:
            dc, dr = offsets[flat_pos]
            col = int(np.clip(point.col + dc, 0, plan.width - 1))
            row = int(np.clip(point.row + dr, 0, plan.height - 1))
            out.append(replace(point, col=col, row=row))
            flat_pos += 1
        new_batches.append(tuple(out))
    return replace(plan, batches=tuple(new_batches))


def plan_to_geojson(plan: PromptPlan, grid: GridSpec) -> dict:
    """Serialize a plan as a GeoJSON FeatureCollection.

    Point coordinates are world positions of the pixel centers; pixel
    indices ride along in feature properties so the plan reloads losslessly.
    """
    features = []
    for b, batch in enumerate(plan.batches):
        for point in batch:
            x, y = pixel_to_world(grid.geotransform, point.col, point.row)
            features.append({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [x, y]},
                "properties": {
                    "label": _LABEL_NAMES[point.label],
                    "batch": b,
                    "index": point.index,
                    "col": point.col,
                    "row": point.row,
                },
            })
    return {
        "type": "FeatureCollection",
        "properties": {
            "seed": plan.seed,
            "width": plan.width,
            "height": plan.height,
            "crs_epsg": grid.crs.code,
            "warnings": list(plan.warnings),
            "config": {
                "n_pos": plan.config.n_pos,
                "n_neg": plan.config.n_neg,
                "n_batches": plan.config.n_batches,
                "seed": plan.config.seed,
                "edge_margin": plan.config.edge_margin,
                "min_class_pixels": plan.config.min_class_pixels,
                "absent_class_policy": plan.config.absent_class_policy,
            },
        },
        "features": features,
    }


def plan_from_geojson(obj: dict, grid: Optional[GridSpec] = None) -> PromptPlan:
    """Rebuild a PromptPlan from plan_to_geojson output.

    Pixel indices are taken from feature properties when present, else
    recovered from world coordinates through the grid geotransform.
    """
    meta = obj.get("properties", {})
    config = SamplerConfig(**meta.get("config", {}))
    n_batches = config.n_batches
    staging: dict[int, list[PromptPoint]] = {}
    for feature in obj.get("features", []):
        props = feature["properties"]
        if "col" in props and "row" in props:
            col, row = int(props["col"]), int(props["row"])
        else:
            if grid is None:
                raise ValueError("grid required to recover pixel indices")
            x, y = feature["geometry"]["coordinates"]
            fc, fr = world_to_pixel(grid.geotransform, x, y)
            col, row = round(fc), round(fr)
        point = PromptPoint(col=col, row=row,
                            label=_LABEL_CODES[props["label"]],
                            index=int(props["index"]))
        staging.setdefault(int(props["batch"]), []).append(point)
    n_batches = max([n_batches] + [b + 1 for b in staging])
    batches = tuple(tuple(staging.get(b, ())) for b in range(n_batches))
    return PromptPlan(batches=batches, seed=int(meta.get("seed", config.seed)),
                      config=config,
                      width=int(meta["width"]), height=int(meta["height"]),
                      warnings=tuple(meta.get("warnings", ())))
