"""Image file I/O: PNG/TIFF in, [0, 1] float tensors out."""

import numpy as np
import torch
from PIL import Image

IMAGE_EXTENSIONS = (".png", ".tif", ".tiff", ".jpg", ".jpeg", ".bmp")


def probe_image(path) -> bool:
    """True if the file parses as a raster image with at least 3 bands."""
    try:
        with Image.open(path) as im:
            return len(im.getbands()) >= 3
    except Exception:
        return False


def read_image(path) -> torch.Tensor:
    """Decode to a (3, H, W) float32 tensor in [0, 1].

    Files with more than 3 bands contribute their first 3 bands; integer
    sample formats are scaled by their type maximum.
    """
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim != 3 or arr.shape[2] < 3:
        raise ValueError(f"{path}: expected >= 3 channels, got shape {arr.shape}")
    arr = arr[:, :, :3]
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float32) / 255.0
    elif arr.dtype == np.uint16:
        arr = arr.astype(np.float32) / 65535.0
    else:
        arr = np.clip(arr.astype(np.float32), 0.0, 1.0)
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))


def read_map(path) -> torch.Tensor:
    """Decode a single-channel map (e.g. saliency ground truth) to (1, H, W)."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L")).astype(np.float32) / 255.0
    return torch.from_numpy(arr)[None]


def write_image(path, tensor: torch.Tensor) -> None:
    """Quantize a (C, H, W) or (H, W) tensor in [0, 1] to an 8-bit file."""
    arr = tensor.detach().cpu().clamp(0.0, 1.0).numpy()
    if arr.ndim == 3:
        arr = arr.transpose(1, 2, 0)
        if arr.shape[2] == 1:
            arr = arr[:, :, 0]
    data = (arr * 255.0).round().astype(np.uint8)
    Image.fromarray(data).save(path)


def write_indexed(path, indices: np.ndarray, palette: list[tuple[int, int, int]]) -> None:
    """Write an integer label image with one RGB color per label."""
    lut = np.asarray(palette, dtype=np.uint8)
    rgb = lut[np.clip(indices, 0, len(palette) - 1)]
    Image.fromarray(rgb).save(path)
