"""Dotted-key configuration: defaults < config file < explicit overrides.

The config file format is plain text, one ``section.key = value`` per line,
``#`` starts a comment.  Unknown keys are rejected rather than ignored.  The
environment variable ``SALDRN_SEED`` overrides ``data.seed`` (file value loses,
an explicit command-line override still wins).
"""

import math
import os
from pathlib import Path

from .errors import ConfigError

_ENV_SEED = "SALDRN_SEED"


def _default_freqs() -> list[float]:
    # Sinusoid frequency ladder for the scale encoding; 32 entries.
    return [2.0 * math.exp(i) for i in range(1, 33)]


# key -> (type tag, default).  Type tags: int, float, bool, str, ints, floats.
DEFAULTS: dict[str, tuple[str, object]] = {
    "data.root": ("str", ""),
    "data.batch_size": ("int", 16),
    "data.patch_size": ("int", 32),
    "data.scale_min": ("float", 1.0),
    "data.scale_max": ("float", 4.0),
    "data.seed": ("int", 0),
    "sal.widths": ("ints", [8, 16, 24]),
    "sal.groups": ("int", 4),
    "sal.m": ("int", 16),
    "sal.slope": ("float", 0.05),
    "route.K": ("int", 3),
    "route.thresholds": ("floats", [0.0, 0.25, 0.5]),
    "route.D": ("ints", [4]),
    "route.C": ("int", 64),
    "route.share_params": ("bool", True),
    "route.patch_size": ("int", 48),
    "route.overlap": ("int", 8),
    "lsum.freqs": ("floats", _default_freqs()),
    "lsum.sigmoid_alpha": ("bool", True),
    "loss.lambda1": ("float", 0.1),
    "loss.lambda2": ("float", 0.15),
    "loss.gamma": ("float", 10.0),
    "loss.err_kernel": ("int", 5),
    "loss.err_bins": ("int", 256),
    "loss.sal_gt_dir": ("str", ""),
    "train.iters": ("int", 400_000),
    "train.lr0": ("float", 1e-4),
    "train.lr_drop_at": ("int", 200_000),
    "train.checkpoint_every": ("int", 10_000),
    "opt.beta1": ("float", 0.9),
    "opt.beta2": ("float", 0.999),
    "opt.eps": ("float", 1e-8),
}

SNAPSHOT_NAME = "config.resolved.txt"


def parse_value(key: str, raw):
    """Parse a raw string (or passthrough value) for a known key."""
    if key not in DEFAULTS:
        raise ConfigError(f"unknown config key '{key}'")
    kind = DEFAULTS[key][0]
    if not isinstance(raw, str):
        return _coerce(key, kind, raw)
    text = raw.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "str":
            return text
        if kind == "ints":
            return [int(p) for p in text.split(",") if p.strip() != ""]
        if kind == "floats":
            return [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"cannot parse value for '{key}': {raw!r}") from exc
    raise ConfigError(f"unhandled type for '{key}'")


def _coerce(key, kind, value):
    if kind == "int" and isinstance(value, bool):
        raise ConfigError(f"cannot parse value for '{key}': {value!r}")
    if kind == "int" and isinstance(value, int):
        return value
    if kind == "float" and isinstance(value, (int, float)):
        return float(value)
    if kind == "bool" and isinstance(value, bool):
        return value
    if kind == "str" and isinstance(value, str):
        return value
    if kind in ("ints", "floats") and isinstance(value, (list, tuple)):
        cast = int if kind == "ints" else float
        return [cast(v) for v in value]
    raise ConfigError(f"cannot parse value for '{key}': {value!r}")


def parse_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        values[key] = parse_value(key, raw)
    return values


def parse_overrides(pairs) -> dict:
    """Parse 'key=value' strings from the command line."""
    values = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override '{pair}' is not of the form key=value")
        key, raw = pair.split("=", 1)
        values[key.strip()] = parse_value(key.strip(), raw)
    return values


def resolve(config_path=None, overrides=(), base=None) -> dict:
    """Merge defaults, optional file, env seed, and explicit overrides."""
    cfg = {k: _copy(v) for k, (_, v) in DEFAULTS.items()}
    if base:
        for key, value in base.items():
            cfg[key] = parse_value(key, value)
    if config_path is not None:
        cfg.update(parse_config_file(config_path))
    env_seed = os.environ.get(_ENV_SEED)
    if env_seed is not None:
        cfg["data.seed"] = parse_value("data.seed", env_seed)
    if overrides:
        cfg.update(parse_overrides(overrides) if not isinstance(overrides, dict) else overrides)
    return cfg


def _copy(value):
    return list(value) if isinstance(value, list) else value


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_snapshot(cfg: dict, out_dir) -> Path:
    """Write the fully resolved configuration so reruns are reproducible."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / SNAPSHOT_NAME
    lines = [f"{key} = {format_value(cfg[key])}" for key in sorted(cfg)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_snapshot(path) -> dict:
    return parse_config_file(path)
