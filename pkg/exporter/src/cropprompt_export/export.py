"""Checkpoint -> TorchScript graph pair + sidecar manifest.

The manifest is the JSON the cropprompt vfm backend reads: graph file
names, preprocessing constants, logit threshold, mask-feedback flag. Extra
keys record provenance (source checkpoint, tool and torch versions, smoke
comparison results).

Export always ends with a paired-forward smoke comparison between the
source modules and the freshly reloaded graphs on a random input; any
divergence beyond tolerance raises ExportMismatch instead of leaving a
silently wrong artifact on disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch

from .errors import ExportMismatch, UnsupportedCheckpoint
from .model import (ARCHITECTURES, DEFAULT_ARCH, DEFAULT_PREPROCESS,
                    FORMAT_NAME, build_modules)

TOOL_VERSION = "0.1.0"
ENCODER_FILE = "encoder.pt"
DECODER_FILE = "decoder.pt"
MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class ExportManifest:
    source_checkpoint: str
    encoder_path: str
    decoder_path: str
    manifest_path: str
    input_long_side: int
    mask_size: int
    channel_mean: tuple
    channel_std: tuple
    mask_feedback: bool
    max_abs_diff_encoder: float
    max_abs_diff_decoder: float


def init_checkpoint(path, seed: int = 0, arch: dict | None = None,
                    preprocess: dict | None = None) -> Path:
    """Create a checkpoint of the bundled architecture with seeded weights."""
    arch = dict(DEFAULT_ARCH, **(arch or {}))
    preprocess = dict(DEFAULT_PREPROCESS, **(preprocess or {}))
    torch.manual_seed(seed)
    encoder, decoder = build_modules(arch)
    payload = {
        "format": FORMAT_NAME,
        "arch": arch,
        "preprocess": preprocess,
        "encoder_state": encoder.state_dict(),
        "decoder_state": decoder.state_dict(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)
    return path


def _load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise UnsupportedCheckpoint(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise UnsupportedCheckpoint(f"cannot read checkpoint: {e}") from e
    if not isinstance(payload, dict) or "format" not in payload:
        raise UnsupportedCheckpoint("checkpoint carries no format marker")
    if payload["format"] not in ARCHITECTURES:
        raise UnsupportedCheckpoint(f"unknown checkpoint format {payload['format']!r}")
    for key in ("arch", "encoder_state", "decoder_state"):
        if key not in payload:
            raise UnsupportedCheckpoint(f"checkpoint is missing {key!r}")
    return payload


def _smoke_compare(encoder, decoder, enc_graph, dec_graph, arch: dict,
                   preprocess: dict, smoke_size: int, n_points: int,
                   seed: int) -> tuple[float, float]:
    """Max absolute output difference, source modules vs reloaded graphs,
    on one random image pushed through the real preprocessing path."""
    side = int(arch["input_long_side"])
    mask_size = int(arch["mask_size"])
    gen = torch.Generator().manual_seed(seed)
    image = torch.randint(0, 256, (1, 3, smoke_size, smoke_size),
                          generator=gen).float()
    scale = side / smoke_size
    resized = torch.nn.functional.interpolate(
        image, size=(int(smoke_size * scale + 0.5),) * 2,
        mode="bilinear", align_corners=False)
    mean = torch.tensor(preprocess["channel_mean"]).view(1, 3, 1, 1)
    std = torch.tensor(preprocess["channel_std"]).view(1, 3, 1, 1)
    batch = torch.zeros((1, 3, side, side))
    batch[:, :, :resized.shape[2], :resized.shape[3]] = (resized - mean) / std

    coords = torch.rand((1, n_points, 2), generator=gen) * side
    labels = (torch.rand((1, n_points), generator=gen) > 0.5).float()
    mask_input = torch.randn((1, 1, mask_size, mask_size), generator=gen)
    has_mask = torch.ones(1)

    with torch.no_grad():
        emb_src = encoder(batch)
        emb_new = enc_graph(batch)
        enc_diff = (emb_src - emb_new).abs().max().item()
        out_src = decoder(emb_src, coords, labels, mask_input, has_mask)
        out_new = dec_graph(emb_src, coords, labels, mask_input, has_mask)
        dec_diff = (out_src - out_new).abs().max().item()
    return enc_diff, dec_diff


def export(checkpoint, out_dir, tolerance: float = 1e-3,
           smoke_size: int = 512, smoke_points: int = 16,
           smoke_seed: int = 0) -> ExportManifest:
    """Convert a checkpoint into the graph pair + manifest under out_dir."""
    payload = _load_checkpoint(checkpoint)
    arch = payload["arch"]
    preprocess = dict(DEFAULT_PREPROCESS, **payload.get("preprocess", {}))

    encoder, decoder = ARCHITECTURES[payload["format"]](arch)
    try:
        encoder.load_state_dict(payload["encoder_state"])
        decoder.load_state_dict(payload["decoder_state"])
    except (RuntimeError, KeyError) as e:
        raise UnsupportedCheckpoint(f"state dict does not fit architecture: {e}") from e
    encoder.eval()
    decoder.eval()

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    enc_path = out_dir / ENCODER_FILE
    dec_path = out_dir / DECODER_FILE
    torch.jit.script(encoder).save(str(enc_path))
    torch.jit.script(decoder).save(str(dec_path))

    enc_graph = torch.jit.load(str(enc_path), map_location="cpu")
    dec_graph = torch.jit.load(str(dec_path), map_location="cpu")
    enc_diff, dec_diff = _smoke_compare(encoder, decoder, enc_graph, dec_graph,
                                        arch, preprocess, smoke_size,
                                        smoke_points, smoke_seed)
    if enc_diff > tolerance or dec_diff > tolerance:
        enc_path.unlink(missing_ok=True)
        dec_path.unlink(missing_ok=True)
        raise ExportMismatch(
            f"graph outputs diverge from source: encoder {enc_diff:.2e}, "
            f"decoder {dec_diff:.2e} (tolerance {tolerance:.2e})")

    manifest = {
        "encoder_graph": ENCODER_FILE,
        "decoder_graph": DECODER_FILE,
        "input_long_side": int(arch["input_long_side"]),
        "mask_input_size": int(arch["mask_size"]),
        "channel_mean": list(preprocess["channel_mean"]),
        "channel_std": list(preprocess["channel_std"]),
        "logit_threshold": float(preprocess.get("logit_threshold", 0.0)),
        "mask_feedback": bool(preprocess.get("mask_feedback", False)),
        "source_checkpoint": str(checkpoint),
        "format": payload["format"],
        "export": {
            "tool_version": TOOL_VERSION,
            "torch_version": torch.__version__,
            "tolerance": tolerance,
            "smoke_input": smoke_size,
            "smoke_points": smoke_points,
            "max_abs_diff_encoder": enc_diff,
            "max_abs_diff_decoder": dec_diff,
        },
    }
    manifest_path = out_dir / MANIFEST_FILE
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    return ExportManifest(
        source_checkpoint=str(checkpoint),
        encoder_path=str(enc_path), decoder_path=str(dec_path),
        manifest_path=str(manifest_path),
        input_long_side=int(arch["input_long_side"]),
        mask_size=int(arch["mask_size"]),
        channel_mean=tuple(preprocess["channel_mean"]),
        channel_std=tuple(preprocess["channel_std"]),
        mask_feedback=bool(preprocess.get("mask_feedback", False)),
        max_abs_diff_encoder=enc_diff, max_abs_diff_decoder=dec_diff)
