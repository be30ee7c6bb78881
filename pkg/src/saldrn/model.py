"""The full network: detector + dynamic router + stepless upsampler."""

from pathlib import Path

import torch
import torch.nn as nn

from .config import DEFAULTS, resolve
from .errors import ConfigError
from .lsum import StepslessUpsampler
from .routing import DynamicRouter, RoutingConfig
from .saliency import SaliencyDetector

CHECKPOINT_VERSION = 1


class SalDRN(nn.Module):
    """Saliency-aware dynamic-routing network for continuous-scale SR."""

    def __init__(self, cfg: dict):
        super().__init__()
        self.cfg = dict(cfg)
        slope = cfg["sal.slope"]
        self.route_config = RoutingConfig.from_config(cfg)
        self.detector = SaliencyDetector(
            widths=tuple(cfg["sal.widths"]),
            groups=cfg["sal.groups"],
            m=cfg["sal.m"],
            slope=slope,
        )
        self.router = DynamicRouter(self.route_config, slope=slope)
        self.upsampler = StepslessUpsampler(
            channels=cfg["route.C"],
            freqs=cfg["lsum.freqs"],
            slope=slope,
            sigmoid_alpha=cfg["lsum.sigmoid_alpha"],
        )

    def forward_paths(self, lr: torch.Tensor):
        """Training-time forward: saliency map plus feature maps of every path."""
        sal = self.detector(lr)
        feats = self.router.all_paths(lr)
        return sal, feats

    def super_resolve_features(self, feats: torch.Tensor, r: float) -> torch.Tensor:
        return self.upsampler(feats, r)


def build_model(cfg: dict | None = None, **overrides) -> SalDRN:
    """Construct a model from a resolved config (defaults where omitted)."""
    base = dict(cfg) if cfg else {}
    base.update(overrides)
    unknown = set(base) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return SalDRN(resolve(base=base))


def init_parameters(model: nn.Module) -> None:
    """Kaiming fan-in for convs/linears, zero biases, default norms."""
    for module in model.modules():
        if isinstance(module, (nn.Conv2d, nn.Linear)):
            nn.init.kaiming_uniform_(module.weight, a=0.05, nonlinearity="leaky_relu")
            if module.bias is not None:
                nn.init.zeros_(module.bias)


def save_checkpoint(path, model: SalDRN, optimizer=None, iteration: int = 0) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "iteration": int(iteration),
        "config": dict(model.cfg),
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ConfigError(
            f"unsupported checkpoint format version {version!r} (expected {CHECKPOINT_VERSION})"
        )
    return payload


def model_from_checkpoint(path, overrides: dict | None = None) -> tuple[SalDRN, dict]:
    """Rebuild the model stored in a checkpoint; returns (model, payload).

    Non-architectural keys (e.g. routing thresholds) may be overridden.
    """
    payload = load_checkpoint(path)
    cfg = dict(payload["config"])
    if overrides:
        cfg.update(overrides)
    model = build_model(cfg)
    model.load_state_dict(payload["model_state"])
    model.eval()
    return model, payload
