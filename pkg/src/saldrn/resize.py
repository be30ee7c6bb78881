"""Bicubic resampling with the classic a = -0.5 kernel.

Separable filtering implemented as two dense matrix products, with the kernel
support widened by the scale factor when shrinking (antialias prefilter).
Tap weights for out-of-range source positions are folded onto the edge pixels,
so interpolating a constant image returns the same constant and resizing to
the identical size is an exact identity.
"""

import math
from functools import lru_cache

import numpy as np
import torch

from .errors import InvalidScaleError

KERNEL_A = -0.5


def round_half_up(x: float) -> int:
    """round() with ties away from zero, for positive sizes."""
    return int(math.floor(x + 0.5))


def cubic_kernel(t: np.ndarray, a: float = KERNEL_A) -> np.ndarray:
    t = np.abs(t)
    near = (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
    far = a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a
    out = np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))
    return out


@lru_cache(maxsize=256)
def _resize_matrix(n_in: int, n_out: int, antialias: bool) -> np.ndarray:
    """(n_out, n_in) float64 row-stochastic resampling matrix."""
    scale = n_in / n_out
    width = max(scale, 1.0) if (antialias and scale > 1.0) else 1.0
    support = 2.0 * width
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        center = (i + 0.5) * scale - 0.5
        lo = int(math.floor(center - support)) + 1
        hi = int(math.floor(center + support))
        taps = np.arange(lo, hi + 1)
        w = cubic_kernel((center - taps) / width) / width
        total = w.sum()
        if total == 0.0:
            continue
        w = w / total
        np.add.at(mat[i], np.clip(taps, 0, n_in - 1), w)
    return mat


def resize_bicubic(x: torch.Tensor, out_h: int, out_w: int, antialias: bool | str = "auto") -> torch.Tensor:
    """Resize the last two dims of ``x`` to (out_h, out_w).

    ``antialias="auto"`` widens the kernel only on axes that shrink.
    """
    if out_h < 1 or out_w < 1:
        raise InvalidScaleError(f"output size {out_h}x{out_w} must be positive")
    h, w = x.shape[-2], x.shape[-1]
    aa_h = (antialias == "auto" and out_h < h) or antialias is True
    aa_w = (antialias == "auto" and out_w < w) or antialias is True
    wh = torch.from_numpy(_resize_matrix(h, out_h, aa_h)).to(x.dtype)
    ww = torch.from_numpy(_resize_matrix(w, out_w, aa_w)).to(x.dtype)
    return torch.matmul(torch.matmul(wh, x), ww.T)


def degrade_bicubic(hr: torch.Tensor, r: float) -> torch.Tensor:
    """Bicubic downsample by a continuous factor r >= 1, clamped to [0, 1].

    Output spatial dims are round(dim / r); r = 1 is a bit-exact identity.
    """
    if r < 1.0:
        raise InvalidScaleError(f"degradation factor must be >= 1, got {r}")
    h, w = hr.shape[-2], hr.shape[-1]
    out_h, out_w = round_half_up(h / r), round_half_up(w / r)
    if out_h < 1 or out_w < 1:
        raise InvalidScaleError(f"factor {r} collapses a {h}x{w} image")
    return resize_bicubic(hr, out_h, out_w, antialias="auto").clamp(0.0, 1.0)


def upscale_bicubic(lr: torch.Tensor, out_h: int, out_w: int) -> torch.Tensor:
    """Bicubic enlargement baseline (no antialias needed when growing)."""
    return resize_bicubic(lr, out_h, out_w, antialias="auto").clamp(0.0, 1.0)
