"""Lightweight encoder-decoder saliency detector.

Three stride-2 stages with residual blocks on the way down; the decoder is a
single fusion of all three stages nearest-resized back to the input size.
Deliberately tiny: its job is coarse region-level conspicuity to steer
routing, not benchmark-grade saliency.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import InputTooSmallError

MIN_INPUT = 8


class ResidualBlock(nn.Module):
    """Two conv -> LReLU -> GroupNorm sublayers plus a skip connection."""

    def __init__(self, channels: int, groups: int, slope: float):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.norm1 = nn.GroupNorm(groups, channels)
        self.norm2 = nn.GroupNorm(groups, channels)
        self.act = nn.LeakyReLU(slope)

    def forward(self, x):
        out = self.norm1(self.act(self.conv1(x)))
        out = self.norm2(self.act(self.conv2(out)))
        return out + x


class SaliencyDetector(nn.Module):
    """Maps a 3-channel image to a per-pixel saliency map in (0, 1)."""

    def __init__(self, widths=(8, 16, 24), groups: int = 4, m: int = 16, slope: float = 0.05):
        super().__init__()
        if len(widths) != 3:
            raise ValueError("exactly three encoder stages are supported")
        self.widths = tuple(widths)
        chans = [3, *widths]
        self.downs = nn.ModuleList(
            nn.Conv2d(chans[i], chans[i + 1], 3, stride=2, padding=1) for i in range(3)
        )
        self.blocks = nn.ModuleList(ResidualBlock(w, groups, slope) for w in widths)
        self.fuse = nn.Conv2d(sum(widths), m, 1)
        self.head = nn.Conv2d(m, 1, 3, padding=1)

    def encode(self, x: torch.Tensor) -> list[torch.Tensor]:
        feats = []
        out = x
        for down, block in zip(self.downs, self.blocks):
            out = block(down(out))
            feats.append(out)
        return feats

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2], x.shape[-1]
        if h < MIN_INPUT or w < MIN_INPUT:
            raise InputTooSmallError(f"saliency input must be >= {MIN_INPUT}px, got {h}x{w}")
        feats = self.encode(x)
        up = [F.interpolate(f, size=(h, w), mode="nearest") for f in feats]
        fused = self.fuse(torch.cat(up, dim=1))
        return torch.sigmoid(self.head(fused))
