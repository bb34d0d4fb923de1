"""Prompt-conditioned segmentation backends and the iterative driver.

A backend encodes an image once and decodes the accumulated prompt set
(plus the previous iteration's logits) into per-pixel cropland logits.
The oracle backend classifies every pixel by its nearest prompt and ignores
image content entirely, which makes every pipeline-level expectation
analytically checkable; it is the default backend for tests and CI.
"""

from __future__ import annotations

import abc
from typing import Any, Optional, Sequence

import numpy as np

from .errors import BackendFailure, EmptyPlan, NoPoints
from .raster import GeoRaster
from .sampler import POSITIVE, PromptPlan, PromptPoint

MaskLogits = np.ndarray  # (height, width) float array, finite values


class BackendInterface(abc.ABC):
    """encode once per image, decode per accumulated prompt set."""

    @abc.abstractmethod
    def encode(self, image: GeoRaster) -> Any:
        """Produce the reusable per-image state."""

    @abc.abstractmethod
    def decode(self, embedding: Any, points: Sequence[PromptPoint],
               prev: Optional[MaskLogits]) -> MaskLogits:
        """Map accumulated prompts (and previous logits) to cropland logits.

        Must be a pure function of its arguments."""


def oracle_decode(points: Sequence[PromptPoint], shape: tuple[int, int]) -> MaskLogits:
    """Nearest-prompt classification of every pixel on a (height, width) grid.

    A pixel gets logit +1 when its nearest prompt (squared Euclidean
    distance in pixel coordinates, ties broken by smallest point index)
    is positive, -1 otherwise. Distances are integer math, so ties are
    exact and the tie-break is reproducible.
    """
    if not points:
        raise NoPoints("oracle decode needs at least one prompt")
    height, width = shape
    cols = np.arange(width, dtype=np.int64)[np.newaxis, :]
    rows = np.arange(height, dtype=np.int64)[:, np.newaxis]
    best_d2 = np.full((height, width), np.iinfo(np.int64).max, dtype=np.int64)
    best_positive = np.zeros((height, width), dtype=bool)
    for point in sorted(points, key=lambda p: p.index):
        d2 = (cols - point.col) ** 2 + (rows - point.row) ** 2
        closer = d2 < best_d2
        best_d2[closer] = d2[closer]
        best_positive[closer] = point.label == POSITIVE
    return np.where(best_positive, 1.0, -1.0)


class OracleBackend(BackendInterface):
    """Deterministic geometric stand-in for a foundation model.

    encode is the identity; decode ignores the previous logits because the
    full accumulated prompt set already determines the answer.
    """

    def encode(self, image: GeoRaster) -> GeoRaster:
        return image

    def decode(self, embedding: GeoRaster, points: Sequence[PromptPoint],
               prev: Optional[MaskLogits]) -> MaskLogits:
        return oracle_decode(points, (embedding.height, embedding.width))


def run_iterative(backend: BackendInterface, image: GeoRaster,
                  plan: PromptPlan) -> MaskLogits:
    """Feed prompt batches cumulatively through the backend.

    encode runs exactly once; decode runs once per batch with the union of
    all batches so far and the previous logits. Returns the final logits.
    """
    if plan.n_points == 0:
        raise EmptyPlan("prompt plan is empty")
    try:
        embedding = backend.encode(image)
    except Exception as e:
        raise BackendFailure(f"encode failed: {e}") from e
    accumulated: list[PromptPoint] = []
    logits: Optional[MaskLogits] = None
    for batch in plan.batches:
        accumulated.extend(batch)
        try:
            logits = backend.decode(embedding, list(accumulated), logits)
        except Exception as e:
            raise BackendFailure(f"decode failed: {e}") from e
    return logits


def binarize(logits: MaskLogits, threshold: float = 0.0) -> np.ndarray:
    """Threshold logits into a uint8 mask; strictly greater-than."""
    return (np.asarray(logits) > threshold).astype(np.uint8)
