"""Stepless upsampling: feature pyramid, implicit queries, scale-aware gating.

A cascade of channel splits, group convs, and pixel shuffles turns the C-wide
input into four C/4-wide maps at 1x/2x/4x/8x resolution.  Any continuous
output grid is then answered pointwise: each query coordinate bilinearly
interpolates the four nearest latent codes per level, the per-level vectors
are concatenated, and a small MLP conditioned on a sinusoidal encoding of the
scale factor gates the concatenation elementwise.  Two convs decode to RGB.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import ConfigError, InvalidScaleError
from .resize import round_half_up

MAX_SCALE = 8.0
ENCODING_DIM = 64


@dataclass
class FeaturePyramid:
    levels: tuple[torch.Tensor, ...]   # (B, C/4, t*H, t*W) for t in 1,2,4,8

    def __iter__(self):
        return iter(self.levels)

    def __getitem__(self, i):
        return self.levels[i]


class CFEB(nn.Module):
    """Cascaded split / group-conv / pixel-shuffle pyramid builder."""

    def __init__(self, channels: int):
        super().__init__()
        if channels % 4 != 0:
            raise ConfigError("pyramid channel count must be divisible by 4")
        c = channels
        self.quarter = c // 4
        self.conv_x2 = nn.Conv2d(3 * c // 4, 3 * c, 3, padding=1, groups=3)
        self.conv_x4 = nn.Conv2d(c // 2, 2 * c, 3, padding=1, groups=2)
        self.conv_x8 = nn.Conv2d(c // 4, c, 3, padding=1)
        self.shuffle = nn.PixelShuffle(2)

    def forward(self, x: torch.Tensor) -> FeaturePyramid:
        q = self.quarter
        m1, carry = torch.split(x, [q, 3 * q], dim=1)
        up2 = self.shuffle(self.conv_x2(carry))
        m2, carry = torch.split(up2, [q, 2 * q], dim=1)
        up4 = self.shuffle(self.conv_x4(carry))
        m3, carry = torch.split(up4, [q, q], dim=1)
        m4 = self.shuffle(self.conv_x8(carry))
        return FeaturePyramid(levels=(m1, m2, m3, m4))


def scale_encoding(r: float, freqs, dtype=torch.float64) -> torch.Tensor:
    """64-entry interleaved sin/cos embedding of a scale factor.

    Evaluated in float64 before casting: the default frequency ladder reaches
    ~1e14, where float32 argument reduction is meaningless.
    """
    if len(freqs) != ENCODING_DIM // 2:
        raise ConfigError(f"expected {ENCODING_DIM // 2} frequencies, got {len(freqs)}")
    w = torch.as_tensor(freqs, dtype=torch.float64) * float(r)
    enc = torch.stack([torch.sin(w), torch.cos(w)], dim=1).reshape(-1)
    return enc.to(dtype)


def bilinear_latent(a, b, z00, z01, z10, z11):
    """Bilinear blend of four latent codes; (a, b) in [0, 1]^2 from z00."""
    return ((1 - a) * (1 - b) * z00 + (1 - a) * b * z01
            + a * (1 - b) * z10 + a * b * z11)


def _interp_level(level: torch.Tensor, ys: torch.Tensor, xs: torch.Tensor) -> torch.Tensor:
    """Query one pyramid level at unit-square coordinates.

    ``level`` is (B, c, h, w); ``ys``/``xs`` are (Q,) float64 coordinates of
    pixel centers in [0, 1).  Neighbors are edge-clamped; the interpolation
    weights are constants of the grid, so gradients flow to the codes only.
    """
    bsz, c, h, w = level.shape
    gy = ys * h - 0.5
    gx = xs * w - 0.5
    i0 = gy.floor().clamp(0, max(h - 2, 0)).long()
    j0 = gx.floor().clamp(0, max(w - 2, 0)).long()
    a = (gy - i0).clamp(0.0, 1.0).to(level.dtype) if h > 1 else torch.zeros_like(gy, dtype=level.dtype)
    b = (gx - j0).clamp(0.0, 1.0).to(level.dtype) if w > 1 else torch.zeros_like(gx, dtype=level.dtype)
    i1 = (i0 + 1).clamp(max=h - 1)
    j1 = (j0 + 1).clamp(max=w - 1)
    flat = level.reshape(bsz, c, h * w)
    z00 = flat[:, :, i0 * w + j0]
    z01 = flat[:, :, i0 * w + j1]
    z10 = flat[:, :, i1 * w + j0]
    z11 = flat[:, :, i1 * w + j1]
    return bilinear_latent(a, b, z00, z01, z10, z11)


def interp_concat(pyramid: FeaturePyramid, ys: torch.Tensor, xs: torch.Tensor) -> torch.Tensor:
    """Concatenate the per-level query answers into (B, C, Q)."""
    return torch.cat([_interp_level(level, ys, xs) for level in pyramid], dim=1)


class SAPA(nn.Module):
    """Scale-aware pixel attention over the concatenated pyramid features."""

    def __init__(self, channels: int, slope: float = 0.05, sigmoid_alpha: bool = True):
        super().__init__()
        self.hidden = nn.Linear(ENCODING_DIM + channels, channels // 2)
        self.out = nn.Linear(channels // 2, channels)
        self.act = nn.LeakyReLU(slope)
        self.sigmoid_alpha = sigmoid_alpha

    def attention(self, feats: torch.Tensor, encoding: torch.Tensor) -> torch.Tensor:
        """feats: (B, Q, C); encoding: (64,) -> alpha (B, Q, C)."""
        enc = encoding.to(feats.dtype).expand(*feats.shape[:-1], ENCODING_DIM)
        alpha = self.out(self.act(self.hidden(torch.cat([enc, feats], dim=-1))))
        return torch.sigmoid(alpha) if self.sigmoid_alpha else alpha

    def forward(self, feats: torch.Tensor, encoding: torch.Tensor) -> torch.Tensor:
        return feats * self.attention(feats, encoding)


class ReconstructionHead(nn.Module):
    """Two convs from upsampled features to RGB; output left unclamped."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels // 4, 3, padding=1)
        self.proj = nn.Conv2d(channels // 4, 3, 1)

    def forward(self, x):
        return self.proj(torch.relu(self.conv(x)))


class StepslessUpsampler(nn.Module):
    """CFEB + implicit queries + SAPA + reconstruction head."""

    def __init__(self, channels: int, freqs=None, slope: float = 0.05,
                 sigmoid_alpha: bool = True, query_chunk: int = 16384):
        super().__init__()
        if freqs is None:
            freqs = [2.0 * math.exp(i) for i in range(1, ENCODING_DIM // 2 + 1)]
        self.channels = channels
        self.freqs = tuple(float(f) for f in freqs)
        self.cfeb = CFEB(channels)
        self.sapa = SAPA(channels, slope, sigmoid_alpha)
        self.head = ReconstructionHead(channels)
        self.query_chunk = query_chunk

    @staticmethod
    def output_size(h: int, w: int, r: float) -> tuple[int, int]:
        return round_half_up(r * h), round_half_up(r * w)

    @staticmethod
    def query_grid(out_h: int, out_w: int) -> tuple[torch.Tensor, torch.Tensor]:
        """Row-major pixel-center coordinates of the output grid in [0, 1)."""
        ys = (torch.arange(out_h, dtype=torch.float64) + 0.5) / out_h
        xs = (torch.arange(out_w, dtype=torch.float64) + 0.5) / out_w
        grid_y = ys.repeat_interleave(out_w)
        grid_x = xs.repeat(out_h)
        return grid_y, grid_x

    def upsample(self, features: torch.Tensor, r: float,
                 apply_attention: bool = True) -> torch.Tensor:
        """Map (B, C, H, W) features to (B, C, round(rH), round(rW)).

        Queries are evaluated in row-major chunks; results are independent of
        the chunk split.
        """
        if not 1.0 <= r <= MAX_SCALE:
            raise InvalidScaleError(f"scale factor {r} outside [1, {MAX_SCALE}]")
        if features.dim() != 4:
            raise ConfigError("upsample expects (B, C, H, W) features")
        bsz, c, h, w = features.shape
        out_h, out_w = self.output_size(h, w, r)
        pyramid = self.cfeb(features)
        ys, xs = self.query_grid(out_h, out_w)
        encoding = scale_encoding(r, self.freqs, dtype=features.dtype)
        chunks = []
        for start in range(0, ys.numel(), self.query_chunk):
            sl = slice(start, start + self.query_chunk)
            concat = interp_concat(pyramid, ys[sl], xs[sl])     # (B, C, q)
            if apply_attention:
                gated = self.sapa(concat.transpose(1, 2), encoding).transpose(1, 2)
            else:
                gated = concat
            chunks.append(gated)
        out = torch.cat(chunks, dim=2)
        return out.reshape(bsz, c, out_h, out_w)

    def reconstruct(self, hr_features: torch.Tensor) -> torch.Tensor:
        return self.head(hr_features)

    def forward(self, features: torch.Tensor, r: float) -> torch.Tensor:
        return self.reconstruct(self.upsample(features, r))
