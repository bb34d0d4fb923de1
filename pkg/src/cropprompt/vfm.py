"""Adapter that runs exported promptable-segmentation graphs.

The backend consumes two serialized TorchScript graphs plus a sidecar JSON
config (produced by the companion export tool):

* encoder: (1, 3, S, S) normalized image -> image embedding, with S the
  configured input long side (image resized so its longest side is S,
  then zero-padded bottom/right to square);
* decoder: (embedding, point_coords (1,N,2), point_labels (1,N),
  mask_input (1,1,M,M), has_mask_input (1,)) -> low-res logits (1,1,M,M),
  with point coordinates already scaled into resized-image pixels.

Decoded logits are bilinearly upsampled back to the original grid, so the
output always matches the input raster's dimensions. torch is imported
lazily; nothing else in the package needs it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .backend import BackendInterface, MaskLogits
from .errors import GraphLoadError, InferenceFailure, ShapeMismatch
from .raster import GeoRaster
from .sampler import PromptPoint

# ImageNet statistics in 0..255 scale, the usual default for RGB encoders.
DEFAULT_MEAN = (123.675, 116.28, 103.53)
DEFAULT_STD = (58.395, 57.12, 57.375)


@dataclass(frozen=True)
class VfmBackendConfig:
    encoder_graph_path: str
    decoder_graph_path: str
    input_long_side: int = 1024
    channel_mean: tuple[float, float, float] = DEFAULT_MEAN
    channel_std: tuple[float, float, float] = DEFAULT_STD
    logit_threshold: float = 0.0
    mask_feedback: bool = False
    mask_input_size: int = 0  # 0 -> input_long_side // 4

    def __post_init__(self):
        if self.input_long_side <= 0:
            raise ValueError("input_long_side must be positive")
        if any(s <= 0 for s in self.channel_std):
            raise ValueError("channel_std components must be positive")

    @property
    def mask_size(self) -> int:
        return self.mask_input_size or self.input_long_side // 4

    @classmethod
    def from_json(cls, path) -> "VfmBackendConfig":
        path = Path(path)
        spec = json.loads(path.read_text())
        base = path.parent
        return cls(
            encoder_graph_path=str(base / spec["encoder_graph"]),
            decoder_graph_path=str(base / spec["decoder_graph"]),
            input_long_side=int(spec.get("input_long_side", 1024)),
            channel_mean=tuple(spec.get("channel_mean", DEFAULT_MEAN)),
            channel_std=tuple(spec.get("channel_std", DEFAULT_STD)),
            logit_threshold=float(spec.get("logit_threshold", 0.0)),
            mask_feedback=bool(spec.get("mask_feedback", False)),
            mask_input_size=int(spec.get("mask_input_size", 0)),
        )


@dataclass(frozen=True)
class VfmEmbedding:
    """Opaque per-image state: encoder output plus the resize bookkeeping."""

    features: object
    orig_size: tuple[int, int]
    resized_size: tuple[int, int]
    scale: float


def _torch():
    try:
        import torch
        return torch
    except ImportError as e:
        raise GraphLoadError("torch is required for the vfm backend") from e


class VfmBackend(BackendInterface):
    """Runs exported encoder/decoder graphs behind the backend interface."""

    def __init__(self, config: VfmBackendConfig):
        torch = _torch()
        self.config = config
        for name in ("encoder_graph_path", "decoder_graph_path"):
            if not Path(getattr(config, name)).is_file():
                raise GraphLoadError(f"graph file missing: {getattr(config, name)}")
        try:
            self._encoder = torch.jit.load(config.encoder_graph_path, map_location="cpu")
            self._decoder = torch.jit.load(config.decoder_graph_path, map_location="cpu")
        except Exception as e:
            raise GraphLoadError(f"cannot load graph: {e}") from e
        self._encoder.eval()
        self._decoder.eval()

    def encode(self, image: GeoRaster) -> VfmEmbedding:
        torch = _torch()
        if image.bands != 3:
            raise ShapeMismatch(f"vfm backend expects 3 bands, got {image.bands}")
        cfg = self.config
        h, w = image.height, image.width
        scale = cfg.input_long_side / max(h, w)
        new_h, new_w = int(h * scale + 0.5), int(w * scale + 0.5)

        arr = image.data.astype(np.float32)
        with torch.no_grad():
            t = torch.from_numpy(arr)[None]
            t = torch.nn.functional.interpolate(
                t, size=(new_h, new_w), mode="bilinear", align_corners=False)
            mean = torch.tensor(cfg.channel_mean).view(1, 3, 1, 1)
            std = torch.tensor(cfg.channel_std).view(1, 3, 1, 1)
            t = (t - mean) / std
            side = cfg.input_long_side
            padded = torch.zeros((1, 3, side, side))
            padded[:, :, :new_h, :new_w] = t
            try:
                features = self._encoder(padded)
            except Exception as e:
                raise InferenceFailure(f"encoder graph failed: {e}") from e
        return VfmEmbedding(features=features, orig_size=(h, w),
                            resized_size=(new_h, new_w), scale=scale)

    def decode(self, embedding: VfmEmbedding, points: Sequence[PromptPoint],
               prev: Optional[MaskLogits]) -> MaskLogits:
        torch = _torch()
        cfg = self.config
        h, w = embedding.orig_size
        new_h, new_w = embedding.resized_size
        m = cfg.mask_size

        coords = torch.tensor(
            [[p.col * embedding.scale, p.row * embedding.scale] for p in points],
            dtype=torch.float32)[None]
        labels = torch.tensor([float(p.label) for p in points],
                              dtype=torch.float32)[None]

        if cfg.mask_feedback and prev is not None:
            mask_input = self._to_low_res(prev, embedding)
            has_mask = torch.ones(1)
        else:
            mask_input = torch.zeros((1, 1, m, m))
            has_mask = torch.zeros(1)

        with torch.no_grad():
            try:
                low_res = self._decoder(embedding.features, coords, labels,
                                        mask_input, has_mask)
            except Exception as e:
                raise InferenceFailure(f"decoder graph failed: {e}") from e
            side = cfg.input_long_side
            up = torch.nn.functional.interpolate(
                low_res, size=(side, side), mode="bilinear", align_corners=False)
            up = up[:, :, :new_h, :new_w]
            full = torch.nn.functional.interpolate(
                up, size=(h, w), mode="bilinear", align_corners=False)
        logits = full[0, 0].numpy().astype(np.float64)
        if not np.all(np.isfinite(logits)):
            raise InferenceFailure("decoder produced non-finite logits")
        return logits

    def _to_low_res(self, prev: MaskLogits, embedding: VfmEmbedding):
        """Re-embed full-resolution logits into the decoder's mask input grid."""
        torch = _torch()
        cfg = self.config
        new_h, new_w = embedding.resized_size
        side = cfg.input_long_side
        t = torch.from_numpy(np.asarray(prev, dtype=np.float32))[None, None]
        t = torch.nn.functional.interpolate(
            t, size=(new_h, new_w), mode="bilinear", align_corners=False)
        padded = torch.zeros((1, 1, side, side))
        padded[:, :, :new_h, :new_w] = t
        return torch.nn.functional.interpolate(
            padded, size=(cfg.mask_size, cfg.mask_size),
            mode="bilinear", align_corners=False)
