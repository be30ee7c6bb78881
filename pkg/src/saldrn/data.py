"""Training-pair synthesis: corpus indexing, continuous-scale bicubic
degradation, cropping, and augmentation.

Every sample is a pure function of (dataset index, seed, step counter), so the
emitted sequence is reproducible regardless of prefetch parallelism.  Batches
are scale-homogeneous: one factor r is drawn per batch and shared by all of
its samples.
"""

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import imgio
from .errors import ConfigError, EmptyDatasetError
from .resize import degrade_bicubic, resize_bicubic, round_half_up

AUGMENT_KINDS = ("identity", "hflip", "vflip", "rot90")
RETRY_BUDGET = 8


@dataclass(frozen=True)
class DatasetIndex:
    root: Path
    entries: tuple[str, ...]
    split: str
    sal_gt_dir: Path | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def path(self, i: int) -> Path:
        return self.root / self.entries[i]

    def sal_gt_path(self, i: int) -> Path | None:
        if self.sal_gt_dir is None:
            return None
        return self.sal_gt_dir / self.entries[i]


@dataclass
class TrainingSample:
    lr: torch.Tensor        # (3, p, p)
    hr: torch.Tensor        # (3, h, h), h = round(p * r)
    r_eff: float            # h / p
    sal_gt: torch.Tensor | None = None   # (1, p, p) when ground truth exists


def load_dataset(root, split: str, sal_gt_dir=None) -> DatasetIndex:
    """Index ``<root>/<split>`` lexicographically without decoding pixels."""
    if split not in ("train", "test"):
        raise ConfigError(f"split must be 'train' or 'test', got {split!r}")
    base = Path(root) / split
    if not base.is_dir():
        raise ConfigError(f"dataset directory not found: {base}")
    entries = sorted(
        name for name in os.listdir(base)
        if name.lower().endswith(imgio.IMAGE_EXTENSIONS) and imgio.probe_image(base / name)
    )
    if not entries:
        raise EmptyDatasetError(f"no decodable images in {base}")
    gt = Path(sal_gt_dir) if sal_gt_dir else None
    return DatasetIndex(root=base, entries=tuple(entries), split=split, sal_gt_dir=gt)


def apply_transform(t: torch.Tensor, kind: str) -> torch.Tensor:
    """Apply one geometric augmentation to the last two dims."""
    if kind == "identity":
        return t
    if kind == "hflip":
        return torch.flip(t, dims=(-1,))
    if kind == "vflip":
        return torch.flip(t, dims=(-2,))
    if kind == "rot90":
        return torch.rot90(t, 1, dims=(-2, -1))
    raise ValueError(f"unknown augmentation {kind!r}")


def augment(sample: TrainingSample, rng: np.random.Generator) -> TrainingSample:
    """Same draw applied to LR and HR; r_eff is untouched."""
    kind = AUGMENT_KINDS[int(rng.integers(0, len(AUGMENT_KINDS)))]
    return TrainingSample(
        lr=apply_transform(sample.lr, kind),
        hr=apply_transform(sample.hr, kind),
        r_eff=sample.r_eff,
        sal_gt=None if sample.sal_gt is None else apply_transform(sample.sal_gt, kind),
    )


def sample_training_pair(
    index: DatasetIndex,
    rng: np.random.Generator,
    r: float,
    patch_size: int = 32,
    image_cache: dict | None = None,
) -> TrainingSample:
    """Crop an HR window of h = round(patch_size * r) and degrade it back down.

    The effective factor h / patch_size replaces the drawn r so both tensors
    have exact integer shapes.  Undersized images are skipped and redrawn up
    to a bounded number of times.
    """
    h = round_half_up(patch_size * r)
    r_eff = h / patch_size
    for _ in range(RETRY_BUDGET):
        i = int(rng.integers(0, len(index)))
        img = _load(index, i, image_cache)
        _, height, width = img.shape
        if height < h or width < h:
            continue
        top = int(rng.integers(0, height - h + 1))
        left = int(rng.integers(0, width - h + 1))
        hr = img[:, top:top + h, left:left + h].clone()
        lr = degrade_bicubic(hr, r_eff)
        sal_gt = _load_sal_gt(index, i, top, left, h, patch_size)
        return TrainingSample(lr=lr, hr=hr, r_eff=r_eff, sal_gt=sal_gt)
    raise EmptyDatasetError(
        f"no image large enough for a {h}x{h} crop after {RETRY_BUDGET} draws"
    )


def _load(index: DatasetIndex, i: int, cache: dict | None) -> torch.Tensor:
    if cache is not None and i in cache:
        return cache[i]
    img = imgio.read_image(index.path(i))
    if cache is not None:
        cache[i] = img
    return img


def _load_sal_gt(index, i, top, left, h, patch_size):
    path = index.sal_gt_path(i)
    if path is None or not path.is_file():
        return None
    gt = imgio.read_map(path)
    crop = gt[:, top:top + h, left:left + h]
    if h != patch_size:
        crop = resize_bicubic(crop, patch_size, patch_size).clamp(0.0, 1.0)
    return crop


class PairSampler:
    """Stateless batch source: batch(step) depends only on (seed, step)."""

    def __init__(self, index: DatasetIndex, batch_size: int, patch_size: int,
                 scale_min: float, scale_max: float, seed: int, cache_images: bool = True):
        if scale_min < 1.0 or scale_max < scale_min:
            raise ConfigError(f"bad scale range [{scale_min}, {scale_max}]")
        self.index = index
        self.batch_size = batch_size
        self.patch_size = patch_size
        self.scale_min = scale_min
        self.scale_max = scale_max
        self.seed = seed
        self._cache = {} if cache_images else None

    def rng_for_step(self, step: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence((self.seed, step))))

    def batch(self, step: int) -> list[TrainingSample]:
        rng = self.rng_for_step(step)
        r = float(rng.uniform(self.scale_min, self.scale_max))
        samples = []
        for _ in range(self.batch_size):
            sample = sample_training_pair(self.index, rng, r, self.patch_size, self._cache)
            samples.append(augment(sample, rng))
        return samples


def collate(samples: list[TrainingSample]):
    """Stack a scale-homogeneous batch into (lr, hr, r_eff, sal_gt|None)."""
    r_eff = samples[0].r_eff
    lr = torch.stack([s.lr for s in samples])
    hr = torch.stack([s.hr for s in samples])
    sal = None
    if all(s.sal_gt is not None for s in samples):
        sal = torch.stack([s.sal_gt for s in samples])
    return lr, hr, r_eff, sal
