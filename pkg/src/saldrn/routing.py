"""Patch decomposition and the saliency-gated dynamic feature extractor.

Images are cut into overlapping patches; each patch's mean saliency passes
through a ladder of threshold switches that decides how many feature
refinement units (FRUs) run on it.  FRUs stack information multi-distillation
blocks (IMDBs) with contrast-aware channel attention and by default share one
parameter set, so depth is bought with compute rather than parameters.
"""

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

from .errors import ConfigError, ContractViolation


# ---------------------------------------------------------------------------
# patch grid


@dataclass(frozen=True)
class PatchGrid:
    patch_size: int
    overlap: int
    offsets_y: tuple[int, ...]
    offsets_x: tuple[int, ...]
    source_hw: tuple[int, int]
    padded_hw: tuple[int, int]

    @property
    def n_patches(self) -> int:
        return len(self.offsets_y) * len(self.offsets_x)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.offsets_y), len(self.offsets_x)

    def offsets(self):
        for oy in self.offsets_y:
            for ox in self.offsets_x:
                yield oy, ox


def _axis_offsets(dim: int, patch: int, stride: int) -> tuple[int, ...]:
    offsets = list(range(0, dim - patch + 1, stride))
    if offsets[-1] != dim - patch:
        offsets.append(dim - patch)
    return tuple(offsets)


def build_grid(height: int, width: int, patch_size: int, overlap: int) -> PatchGrid:
    if not 0 <= overlap < patch_size:
        raise ConfigError(f"overlap must satisfy 0 <= overlap < patch_size, got {overlap}")
    stride = patch_size - overlap
    pad_h = max(patch_size - height, 0)
    pad_w = max(patch_size - width, 0)
    ph, pw = height + pad_h, width + pad_w
    return PatchGrid(
        patch_size=patch_size,
        overlap=overlap,
        offsets_y=_axis_offsets(ph, patch_size, stride),
        offsets_x=_axis_offsets(pw, patch_size, stride),
        source_hw=(height, width),
        padded_hw=(ph, pw),
    )


def _pad_reflect(image: torch.Tensor, pad_h: int, pad_w: int) -> torch.Tensor:
    if pad_h == 0 and pad_w == 0:
        return image
    arr = image.detach().cpu().numpy()
    pads = [(0, 0)] * (arr.ndim - 2) + [(0, pad_h), (0, pad_w)]
    return torch.from_numpy(np.pad(arr, pads, mode="reflect"))


def extract_patches(image: torch.Tensor, grid: PatchGrid) -> torch.Tensor:
    """Cut (C, H, W) into (N, C, p, p) following the grid (pads if needed)."""
    h, w = image.shape[-2], image.shape[-1]
    if (h, w) != grid.source_hw:
        raise ContractViolation(f"image {h}x{w} does not match grid source {grid.source_hw}")
    ph, pw = grid.padded_hw
    padded = _pad_reflect(image, ph - h, pw - w)
    p = grid.patch_size
    return torch.stack([padded[:, oy:oy + p, ox:ox + p] for oy, ox in grid.offsets()])


def decompose(image: torch.Tensor, patch_size: int, overlap: int):
    """Overlapping patch decomposition; returns (patches, grid)."""
    grid = build_grid(image.shape[-2], image.shape[-1], patch_size, overlap)
    return extract_patches(image, grid), grid


def recombine(patch_features: torch.Tensor, grid: PatchGrid) -> torch.Tensor:
    """Average overlapping patch contributions back into a full-size map."""
    if len(patch_features) != grid.n_patches:
        raise ContractViolation(
            f"got {len(patch_features)} patches for a grid of {grid.n_patches}"
        )
    p = grid.patch_size
    if patch_features.shape[-2:] != (p, p):
        raise ContractViolation(f"patch features must be {p}x{p}")
    channels = patch_features.shape[1]
    ph, pw = grid.padded_hw
    total = patch_features.new_zeros((channels, ph, pw))
    count = patch_features.new_zeros((1, ph, pw))
    for feat, (oy, ox) in zip(patch_features, grid.offsets()):
        total[:, oy:oy + p, ox:ox + p] += feat
        count[:, oy:oy + p, ox:ox + p] += 1.0
    out = total / count
    h, w = grid.source_hw
    return out[:, :h, :w]


# ---------------------------------------------------------------------------
# routing configuration and gate rule


@dataclass
class RoutingConfig:
    K: int = 3
    thresholds: tuple[float, ...] = (0.0, 0.25, 0.5)
    D: tuple[int, ...] = (4,)
    C: int = 64
    share_params: bool = True
    patch_size: int = 48
    overlap: int = 8

    def __post_init__(self):
        self.thresholds = tuple(float(t) for t in self.thresholds)
        self.D = (self.D,) if isinstance(self.D, int) else tuple(int(d) for d in self.D)
        if self.K < 1:
            raise ConfigError("route.K must be >= 1")
        if len(self.thresholds) != self.K:
            raise ConfigError(f"expected {self.K} thresholds, got {len(self.thresholds)}")
        if any(b < a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ConfigError("thresholds must be nondecreasing")
        if any(t < 0.0 or t > 1.0 for t in self.thresholds):
            raise ConfigError("thresholds must lie in [0, 1]")
        if self.C % 4 != 0:
            raise ConfigError("route.C must be divisible by 4")
        if self.share_params and len(self.D) != 1:
            raise ConfigError("shared FRUs take a single route.D value")
        if not self.share_params and len(self.D) == 1:
            self.D = self.D * self.K
        if not self.share_params and len(self.D) != self.K:
            raise ConfigError(f"expected {self.K} route.D entries, got {len(self.D)}")

    @classmethod
    def from_config(cls, cfg: dict) -> "RoutingConfig":
        return cls(
            K=cfg["route.K"],
            thresholds=tuple(cfg["route.thresholds"]),
            D=tuple(cfg["route.D"]),
            C=cfg["route.C"],
            share_params=cfg["route.share_params"],
            patch_size=cfg["route.patch_size"],
            overlap=cfg["route.overlap"],
        )

    def depth_of_fru(self, k: int) -> int:
        return self.D[0] if self.share_params else self.D[k]


def select_path(s: float, config: RoutingConfig) -> int:
    """Number of FRUs a patch with mean saliency s executes.

    Switch k opens only when s exceeds its threshold; equality stops there.
    """
    path = 0
    for theta in config.thresholds:
        if s <= theta:
            break
        path += 1
    return path


# ---------------------------------------------------------------------------
# network blocks


class CCALayer(nn.Module):
    """Contrast-aware channel attention: per-channel (std + mean) statistics
    squeezed through a small MLP into sigmoid gates."""

    def __init__(self, channels: int, reduction: int = 16):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.squeeze = nn.Conv2d(channels, hidden, 1)
        self.excite = nn.Conv2d(hidden, channels, 1)

    @staticmethod
    def contrast(x: torch.Tensor) -> torch.Tensor:
        """Per-channel population std + mean over the spatial dims."""
        mean = x.mean(dim=(-2, -1), keepdim=True)
        std = x.var(dim=(-2, -1), unbiased=False, keepdim=True).sqrt()
        return std + mean

    def forward(self, x):
        z = self.contrast(x)
        att = torch.sigmoid(self.excite(torch.relu(self.squeeze(z))))
        return x * att


class IMDB(nn.Module):
    """Information multi-distillation block: three conv+split stages keep a
    quarter of the channels each, a fourth conv distills the remainder, and
    the concatenated quarters are reweighted, fused, and added back."""

    def __init__(self, channels: int, slope: float = 0.05):
        super().__init__()
        if channels % 4 != 0:
            raise ConfigError("IMDB channel count must be divisible by 4")
        keep = channels // 4
        rest = channels - keep
        self.keep = keep
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(rest, channels, 3, padding=1)
        self.conv3 = nn.Conv2d(rest, channels, 3, padding=1)
        self.conv4 = nn.Conv2d(rest, keep, 3, padding=1)
        self.act = nn.LeakyReLU(slope)
        self.cca = CCALayer(channels)
        self.fuse = nn.Conv2d(channels, channels, 1)

    def forward(self, x):
        refined = []
        coarse = x
        for conv in (self.conv1, self.conv2, self.conv3):
            out = self.act(conv(coarse))
            r, coarse = torch.split(out, [self.keep, out.shape[1] - self.keep], dim=1)
            refined.append(r)
        refined.append(self.conv4(coarse))
        distilled = torch.cat(refined, dim=1)
        return self.fuse(self.cca(distilled)) + x


class FRU(nn.Module):
    """Feature refinement unit: fuse [deep, shallow] to the working width,
    run D IMDBs, aggregate every intermediate output, add the fused input."""

    def __init__(self, channels: int, depth: int, slope: float = 0.05):
        super().__init__()
        self.entry = nn.Conv2d(2 * channels, channels, 1)
        self.blocks = nn.ModuleList(IMDB(channels, slope) for _ in range(depth))
        self.fuse1 = nn.Conv2d(depth * channels, channels, 1)
        self.fuse3 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x, shallow):
        if x.shape != shallow.shape:
            raise ContractViolation(
                f"FRU inputs must match, got {tuple(x.shape)} vs {tuple(shallow.shape)}"
            )
        h0 = self.entry(torch.cat([x, shallow], dim=1))
        outs = []
        h = h0
        for block in self.blocks:
            h = block(h)
            outs.append(h)
        return self.fuse3(self.fuse1(torch.cat(outs, dim=1))) + h0


class DynamicRouter(nn.Module):
    """Shallow feature entry plus the gated FRU ladder."""

    def __init__(self, config: RoutingConfig, slope: float = 0.05):
        super().__init__()
        self.config = config
        self.shallow_conv = nn.Conv2d(3, config.C, 3, padding=1)
        n_units = 1 if config.share_params else config.K
        self.frus = nn.ModuleList(
            FRU(config.C, config.depth_of_fru(k), slope) for k in range(n_units)
        )

    def shallow_features(self, x: torch.Tensor) -> torch.Tensor:
        return self.shallow_conv(x)

    def _fru(self, k: int) -> FRU:
        return self.frus[0] if self.config.share_params else self.frus[k]

    def run_path(self, patch: torch.Tensor, path: int) -> torch.Tensor:
        """Execute the first ``path`` FRUs starting from shallow features."""
        shallow = self.shallow_features(patch)
        h = shallow
        for k in range(path):
            h = self._fru(k)(h, shallow)
        return h

    def all_paths(self, patch: torch.Tensor) -> list[torch.Tensor]:
        """Feature maps after 0, 1, ..., K FRUs (element 0 is shallow)."""
        shallow = self.shallow_features(patch)
        outs = [shallow]
        h = shallow
        for k in range(self.config.K):
            h = self._fru(k)(h, shallow)
            outs.append(h)
        return outs

    def forward(self, patch: torch.Tensor, sal_patch: torch.Tensor, mode: str = "route"):
        if mode == "route":
            s = float(sal_patch.mean())
            return self.run_path(patch, select_path(s, self.config))
        if mode == "all_paths":
            return self.all_paths(patch)
        raise ValueError(f"unknown mode {mode!r}")
