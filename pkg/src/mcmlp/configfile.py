"""Flat ``key = value`` run-configuration files.

Lines are UTF-8, ``#`` starts a comment, and keys mirror the field names of
:class:`~mcmlp.model.ModelConfig` and :class:`~mcmlp.training.TrainConfig`.
Unknown keys are hard errors so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses

from .errors import ConfigError
from .model import ModelConfig
from .training import TrainConfig

_MODEL_FIELDS = {f.name: f for f in dataclasses.fields(ModelConfig)}
_TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}

_INT_KEYS = {
    "image_size", "patch_size", "channels_in", "dim", "depth", "expansion",
    "num_classes", "epochs", "warmup_epochs", "batch_size", "seed",
}
_FLOAT_KEYS = {
    "base_lr", "weight_decay", "mixup_alpha", "cutmix_alpha", "eps", "min_lr",
}
_PAIR_KEYS = {"mixer_order", "betas"}


def _parse_value(key: str, text: str):
    if key in _INT_KEYS:
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"key {key!r} expects an integer, got {text!r}") from None
    if key in _FLOAT_KEYS:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"key {key!r} expects a number, got {text!r}") from None
    if key == "mixer_order":
        return tuple(part.strip().lower() for part in text.split(",") if part.strip())
    if key == "betas":
        parts = [part.strip() for part in text.split(",") if part.strip()]
        if len(parts) != 2:
            raise ConfigError(f"key 'betas' expects two comma-separated numbers, got {text!r}")
        return (float(parts[0]), float(parts[1]))
    raise ConfigError(f"unknown configuration key {key!r}")


def parse_config_text(text: str, source: str = "<config>") -> tuple[ModelConfig, TrainConfig]:
    model_kwargs: dict = {}
    train_kwargs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _MODEL_FIELDS:
            target = model_kwargs
        elif key in _TRAIN_FIELDS:
            target = train_kwargs
        else:
            raise ConfigError(f"{source}:{lineno}: unknown configuration key {key!r}")
        if key in target:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        target[key] = _parse_value(key, value)
    return ModelConfig(**model_kwargs), TrainConfig(**train_kwargs)


def load_config(path) -> tuple[ModelConfig, TrainConfig]:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path))


def default_config_text() -> str:
    """A commented config file populated with the package defaults."""
    lines = ["# model"]
    for f in dataclasses.fields(ModelConfig):
        value = f.default
        if f.name in _PAIR_KEYS:
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    lines.append("")
    lines.append("# training")
    for f in dataclasses.fields(TrainConfig):
        if f.name == "min_lr":
            lines.append("# min_lr defaults to base_lr / 100")
            continue
        value = f.default
        if f.name in _PAIR_KEYS:
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
