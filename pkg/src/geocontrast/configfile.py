"""Flat key-value config files and their typed schemas.

Format: one `key = value` per line, `#` starts a comment, blank lines
ignored. Booleans are written true/false. Precedence when building a
config object: dataclass defaults, then file values, then explicit
overrides (the CLI passes its flags as overrides).
"""
from __future__ import annotations

from typing import Any, Callable

from .data import WorldConfig
from .errors import ConfigError
from .supervision import KernelConfig
from .trainer import TrainConfig


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


WORLD_SCHEMA: dict[str, Callable[[str], Any]] = {
    "n_cities": int,
    "streets_per_city": int,
    "samples_per_street": int,
    "city_spread_m": float,
    "street_spread_m": float,
    "feature_dim": int,
    "signal_dim": int,
    "noise_sigma": float,
    "seed": int,
}

#: Kernel keys are flattened into the train schema.
KERNEL_SCHEMA: dict[str, Callable[[str], Any]] = {
    "sigma": float,
    "d_cut": float,
    "alpha_street": float,
    "beta_city": float,
}

TRAIN_SCHEMA: dict[str, Callable[[str], Any]] = {
    "epochs": int,
    "batch_size": int,
    "base_lr": float,
    "weight_decay": float,
    "lambda_fair": float,
    "seed": int,
    "stratify_regions": _parse_bool,
    "symmetric_loss": _parse_bool,
    "freeze_tau": _parse_bool,
    "warmup_frac": float,
    "hidden_dim": int,
    "embed_dim": int,
    "vocab_size": int,
    "n_freqs": int,
    "train_frac": float,
    **KERNEL_SCHEMA,
}


def read_config(path: str) -> dict[str, str]:
    """Parse a key-value file into raw strings, without schema coercion."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(
                    f"{path}:{lineno}: expected 'key = value', got {stripped!r}"
                )
            key, value = (part.strip() for part in stripped.split("=", 1))
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value
    return out


def _coerce(
    raw: dict[str, str], schema: dict[str, Callable[[str], Any]], what: str
) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for key, text in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown {what} config key {key!r}")
        try:
            values[key] = schema[key](text)
        except ValueError as e:
            raise ConfigError(f"config key {key!r}: {e}") from e
    return values


def build_world_config(
    raw: dict[str, str] | None, overrides: dict[str, Any] | None = None
) -> WorldConfig:
    """defaults < file < overrides, with unknown keys rejected."""
    values = _coerce(raw or {}, WORLD_SCHEMA, "world")
    for key, val in (overrides or {}).items():
        if key not in WORLD_SCHEMA:
            raise ConfigError(f"unknown world config key {key!r}")
        values[key] = val
    return WorldConfig(**values)


def build_train_config(
    raw: dict[str, str] | None, overrides: dict[str, Any] | None = None
) -> TrainConfig:
    """defaults < file < overrides; kernel keys fold into KernelConfig."""
    values = _coerce(raw or {}, TRAIN_SCHEMA, "train")
    for key, val in (overrides or {}).items():
        if key not in TRAIN_SCHEMA:
            raise ConfigError(f"unknown train config key {key!r}")
        values[key] = val
    kernel_kwargs = {k: values.pop(k) for k in KERNEL_SCHEMA if k in values}
    if kernel_kwargs:
        values["kernel"] = KernelConfig(**kernel_kwargs)
    return TrainConfig(**values)
