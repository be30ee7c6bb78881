"""The three-term training objective.

The SR term supervises every routing path at once, weighted by a softmax over
how close the patch's mean saliency sits to each path's threshold interval.
The saliency term is plain cross-entropy against ground truth when available.
The difficulty term pulls the predicted saliency toward a histogram-equalized
reconstruction-error map, so the detector learns "hard to reconstruct" even
without labels.
"""

import torch
import torch.nn.functional as F

from .errors import ContractViolation
from .resize import resize_bicubic


def path_intervals(thresholds) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-path saliency intervals: path j (= FRUs executed) owns
    [theta_j, theta_{j+1}] with theta_0 = 0 and theta_{K+1} = 1."""
    t = [float(x) for x in thresholds]
    lows = torch.tensor([0.0] + t, dtype=torch.float64)
    highs = torch.tensor(t + [1.0], dtype=torch.float64)
    return lows, highs


def path_weights(s, thresholds, gamma: float = 10.0) -> torch.Tensor:
    """Soft path-selection prior over the K+1 paths.

    ``s`` may be a scalar or a 1-D batch of mean saliencies; the result is
    (K+1,) or (B, K+1), rows summing to 1.  Treated as a constant: no
    gradient flows back into the saliency estimate.
    """
    lows, highs = path_intervals(thresholds)
    s_t = torch.as_tensor(s, dtype=torch.float64).detach()
    scores = gamma * (highs - s_t[..., None]) * (s_t[..., None] - lows)
    return torch.softmax(scores, dim=-1)


def sr_loss(sr_list, hr: torch.Tensor, beta: torch.Tensor) -> torch.Tensor:
    """Weighted sum of per-path mean-absolute reconstruction errors."""
    for sr in sr_list:
        if sr.shape != hr.shape:
            raise ContractViolation(
                f"SR output {tuple(sr.shape)} does not match target {tuple(hr.shape)}"
            )
    beta = beta.to(hr.dtype)
    if hr.dim() == 4:
        per_path = torch.stack(
            [(sr - hr).abs().mean(dim=(1, 2, 3)) for sr in sr_list], dim=-1
        )  # (B, K+1)
        if beta.dim() == 1:
            beta = beta.expand_as(per_path)
        return (per_path * beta).sum(dim=-1).mean()
    per_path = torch.stack([(sr - hr).abs().mean() for sr in sr_list])
    return (per_path * beta).sum()


def equalize(values: torch.Tensor, bins: int = 256) -> torch.Tensor:
    """Histogram-equalize to [0, 1] via a binned empirical CDF.

    A constant input is degenerate (nothing to rank) and maps to all zeros.
    """
    flat = values.reshape(-1)
    lo, hi = flat.min(), flat.max()
    if hi <= lo:
        return torch.zeros_like(values)
    idx = ((flat - lo) / (hi - lo) * bins).long().clamp(0, bins - 1)
    hist = torch.bincount(idx, minlength=bins).to(values.dtype)
    cdf = torch.cumsum(hist, dim=0) / flat.numel()
    return cdf[idx].reshape(values.shape)


def error_map(sr: torch.Tensor, hr: torch.Tensor, kernel: int = 5, bins: int = 256,
              lr_hw: tuple[int, int] | None = None) -> torch.Tensor:
    """Equalized reconstruction-difficulty map, detached from the graph.

    Channel-mean squared error at HR resolution, box-filtered with reflect
    padding, optionally resized to the LR frame, then rank-equalized so its
    value distribution is approximately uniform on [0, 1].
    """
    if sr.shape != hr.shape:
        raise ContractViolation(
            f"error_map inputs must match, got {tuple(sr.shape)} vs {tuple(hr.shape)}"
        )
    with torch.no_grad():
        err = ((sr - hr) ** 2).mean(dim=-3, keepdim=True)
        squeeze = err.dim() == 3
        if squeeze:
            err = err[None]
        pad = kernel // 2
        err = F.avg_pool2d(F.pad(err, (pad, pad, pad, pad), mode="reflect"), kernel, stride=1)
        if lr_hw is not None and tuple(err.shape[-2:]) != tuple(lr_hw):
            err = resize_bicubic(err, lr_hw[0], lr_hw[1]).clamp_min(0.0)
        out = torch.stack([equalize(e, bins) for e in err])
        return (out[0] if squeeze else out).detach()


def saliency_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy between predicted and reference saliency."""
    if pred.shape != gt.shape:
        raise ContractViolation(
            f"saliency_loss inputs must match, got {tuple(pred.shape)} vs {tuple(gt.shape)}"
        )
    return F.binary_cross_entropy(pred, gt.to(pred.dtype))


def difficulty_loss(pred: torch.Tensor, err: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference to the (constant) equalized error map."""
    if pred.shape != err.shape:
        raise ContractViolation(
            f"difficulty_loss inputs must match, got {tuple(pred.shape)} vs {tuple(err.shape)}"
        )
    return (pred - err.detach()).abs().mean()


def total_loss(l_sr, l_sal, l_diff, lambda1: float = 0.1, lambda2: float = 0.15):
    return l_sr + lambda1 * l_sal + lambda2 * l_diff
