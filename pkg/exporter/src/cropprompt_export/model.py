"""Compact promptable segmentation architecture with the graph interface
the cropprompt vfm backend executes.

Encoder: patchify convolution plus a residual conv block; (1, 3, S, S)
normalized image -> (1, C, S/patch, S/patch) embedding.

Decoder: Fourier-encoded point prompts with label embeddings attend over
the (optionally mask-conditioned) image embedding and gate it into a
low-resolution logit grid. Signature matches the exported-graph contract:

    decoder(embedding, point_coords (1,N,2), point_labels (1,N),
            mask_input (1,1,M,M), has_mask_input (1,)) -> (1,1,M,M)

Point coordinates arrive in resized-image pixels; N is dynamic (the
modules are TorchScript-scripted, not traced). The architecture is small
enough to export and run on CPU; register a different one in
ARCHITECTURES to export other checkpoint families.
"""

from __future__ import annotations

import math

import torch
from torch import nn

FORMAT_NAME = "mini-promptable-v1"

DEFAULT_ARCH = {
    "channels": 32,
    "patch": 16,
    "input_long_side": 1024,
    "mask_size": 256,
}

DEFAULT_PREPROCESS = {
    "channel_mean": [123.675, 116.28, 103.53],
    "channel_std": [58.395, 57.12, 57.375],
    "logit_threshold": 0.0,
    "mask_feedback": True,
}


class ImageEncoder(nn.Module):
    def __init__(self, channels: int = 32, patch: int = 16):
        super().__init__()
        self.patchify = nn.Conv2d(3, channels, kernel_size=patch, stride=patch)
        self.block = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.GELU(),
            nn.Conv2d(channels, channels, 3, padding=1),
        )
        self.norm = nn.GroupNorm(4, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        feats = self.patchify(x)
        feats = feats + self.block(feats)
        return self.norm(feats)


class PromptDecoder(nn.Module):
    def __init__(self, channels: int = 32, input_long_side: int = 1024,
                 mask_size: int = 256, patch: int = 16):
        super().__init__()
        if mask_size % (input_long_side // patch) != 0:
            raise ValueError("mask_size must be a multiple of the embedding side")
        self.input_long_side = float(input_long_side)
        self.mask_size = mask_size
        self.scale = channels ** -0.5
        down = mask_size // (input_long_side // patch)
        self.pos_freqs = nn.Parameter(torch.randn(2, channels // 2))
        self.label_embed = nn.Embedding(2, channels)
        self.point_mlp = nn.Sequential(
            nn.Linear(channels, channels), nn.GELU(),
            nn.Linear(channels, channels))
        self.mask_down = nn.Conv2d(1, channels, kernel_size=down, stride=down)
        self.head = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1), nn.GELU(),
            nn.Conv2d(channels, 1, 1))

    def forward(self, embedding: torch.Tensor, point_coords: torch.Tensor,
                point_labels: torch.Tensor, mask_input: torch.Tensor,
                has_mask_input: torch.Tensor) -> torch.Tensor:
        x = embedding + self.mask_down(mask_input) * has_mask_input.view(1, 1, 1, 1)

        normed = point_coords / self.input_long_side
        angles = 2.0 * math.pi * torch.matmul(normed, self.pos_freqs)
        encoded = torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)
        feats = self.point_mlp(encoded + self.label_embed(point_labels.long()))

        attention = torch.einsum("bnc,bchw->bnhw", feats, x) * self.scale
        b, n, h, w = attention.shape
        attention = attention.view(b, n, h * w).softmax(dim=-1).view(b, n, h, w)
        pooled = torch.einsum("bnhw,bchw->bnc", attention, x)

        sign = (point_labels * 2.0 - 1.0).unsqueeze(-1)
        response = torch.einsum("bnc,bchw->bnhw", pooled * sign, x)
        gated = x * torch.tanh(response.mean(dim=1, keepdim=True))

        logits = self.head(gated)
        return nn.functional.interpolate(
            logits, size=(self.mask_size, self.mask_size),
            mode="bilinear", align_corners=False)


def build_modules(arch: dict) -> tuple[ImageEncoder, PromptDecoder]:
    channels = int(arch["channels"])
    patch = int(arch["patch"])
    return (ImageEncoder(channels=channels, patch=patch),
            PromptDecoder(channels=channels,
                          input_long_side=int(arch["input_long_side"]),
                          mask_size=int(arch["mask_size"]), patch=patch))


ARCHITECTURES = {FORMAT_NAME: build_modules}
