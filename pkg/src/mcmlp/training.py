"""Optimization loop: decoupled-weight-decay Adam, warmup+cosine schedule,
pairwise mixing augmentations, and top-1 evaluation.

All randomness flows through ``numpy`` generators seeded from the training
config, so two runs with the same seed produce bit-identical parameter
trajectories and metric sequences.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError, NumericsError, ShapeError
from .model import Model, model_forward


@dataclass(frozen=True)
class TrainConfig:
    """Training recipe.  ``min_lr`` defaults to ``base_lr / 100`` when unset."""

    epochs: int = 300
    warmup_epochs: int = 3
    base_lr: float = 0.01
    weight_decay: float = 1e-5
    mixup_alpha: float = 0.2
    cutmix_alpha: float = 0.4
    batch_size: int = 128
    seed: int = 0
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    min_lr: float | None = None

    def __post_init__(self):
        if self.warmup_epochs < 0 or self.epochs <= self.warmup_epochs:
            raise ConfigError(
                f"need epochs > warmup_epochs >= 0, got epochs={self.epochs}, "
                f"warmup_epochs={self.warmup_epochs}"
            )
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr}")
        for name in ("weight_decay", "mixup_alpha", "cutmix_alpha", "eps"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        object.__setattr__(self, "betas", tuple(self.betas))

    @property
    def resolved_min_lr(self) -> float:
        return self.base_lr * 1e-2 if self.min_lr is None else self.min_lr

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "warmup_epochs": self.warmup_epochs,
            "base_lr": self.base_lr,
            "weight_decay": self.weight_decay,
            "mixup_alpha": self.mixup_alpha,
            "cutmix_alpha": self.cutmix_alpha,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "betas": list(self.betas),
            "eps": self.eps,
            "min_lr": self.min_lr,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        return cls(**d)


@dataclass
class AdamWState:
    """Per-parameter first/second moment buffers plus the shared step count."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def initialize(cls, params: dict[str, Tensor]) -> "AdamWState":
        return cls(
            m={name: np.zeros_like(p.data) for name, p in params.items()},
            v={name: np.zeros_like(p.data) for name, p in params.items()},
            t=0,
        )


def adamw_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamWState,
    lr: float,
    cfg: TrainConfig,
) -> None:
    """One decoupled-weight-decay Adam update, in place.

    Decay applies to weight matrices only (ndim >= 2), never to biases or
    layer-norm parameters.
    """
    state.t += 1
    t = state.t
    b1, b2 = cfg.betas
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name]
        if g is None or g.shape != p.shape:
            raise ShapeError(f"gradient for {name!r} is missing or mis-shaped")
        if not np.all(np.isfinite(g)):
            raise NumericsError(f"non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
        if cfg.weight_decay > 0 and p.ndim >= 2:
            update = update + (lr * cfg.weight_decay) * p.data
        p.data -= update


def lr_at(step: int, steps_per_epoch: int, cfg: TrainConfig) -> float:
    """Learning rate at a (1-based) global update index: linear ramp to
    ``base_lr`` over the warmup epochs, then a cosine decay to ``min_lr``."""
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    warmup_steps = cfg.warmup_epochs * steps_per_epoch
    total_steps = cfg.epochs * steps_per_epoch
    if step < warmup_steps:
        return cfg.base_lr * step / warmup_steps
    if total_steps <= warmup_steps:
        return cfg.base_lr
    progress = min(1.0, (step - warmup_steps) / (total_steps - warmup_steps))
    min_lr = cfg.resolved_min_lr
    return min_lr + (cfg.base_lr - min_lr) * 0.5 * (1.0 + math.cos(math.pi * progress))


def one_hot(labels: np.ndarray, num_classes: int, dtype=np.float64) -> np.ndarray:
    out = np.zeros((len(labels), num_classes), dtype=dtype)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def mixup(images: np.ndarray, labels: np.ndarray, alpha: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Blend each sample with a permutation partner: convex combination of
    both pixels and (soft) labels with a Beta-drawn weight."""
    if alpha <= 0:
        raise ValueError("mixup requires alpha > 0")
    if len(images) < 2:
        raise ShapeError("mixup requires a batch of at least 2 samples")
    lam = float(rng.beta(alpha, alpha))
    perm = rng.permutation(len(images))
    mixed = lam * images + (1.0 - lam) * images[perm]
    soft = lam * labels + (1.0 - lam) * labels[perm]
    return mixed.astype(images.dtype, copy=False), soft.astype(labels.dtype, copy=False)


def cutmix(images: np.ndarray, labels: np.ndarray, alpha: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Paste a rectangle from a permutation partner into each sample.

    The rectangle targets an area fraction of ``1 - lam`` but is clipped to
    the image bounds; label weights use the fraction actually pasted.
    """
    if alpha <= 0:
        raise ValueError("cutmix requires alpha > 0")
    if images.ndim != 4:
        raise ShapeError(f"cutmix expects [B, ch, H, W] images, got {images.shape}")
    if len(images) < 2:
        raise ShapeError("cutmix requires a batch of at least 2 samples")
    b, _, h, w = images.shape
    lam = float(rng.beta(alpha, alpha))
    perm = rng.permutation(b)
    cut = math.sqrt(max(0.0, 1.0 - lam))
    rh, rw = int(round(h * cut)), int(round(w * cut))
    cy, cx = int(rng.integers(h)), int(rng.integers(w))
    y1 = max(0, cy - rh // 2)
    y2 = min(h, y1 + rh)
    x1 = max(0, cx - rw // 2)
    x2 = min(w, x1 + rw)
    out = images.copy()
    out[:, :, y1:y2, x1:x2] = images[perm][:, :, y1:y2, x1:x2]
    frac = max(0, y2 - y1) * max(0, x2 - x1) / (h * w)
    soft = (1.0 - frac) * labels + frac * labels[perm]
    return out, soft.astype(labels.dtype, copy=False)


def _augment(images, targets, cfg: TrainConfig, rng):
    use_mixup = cfg.mixup_alpha > 0
    use_cutmix = cfg.cutmix_alpha > 0
    if len(images) < 2 or not (use_mixup or use_cutmix):
        return images, targets
    if use_mixup and use_cutmix:
        if rng.random() < 0.5:
            return mixup(images, targets, cfg.mixup_alpha, rng)
        return cutmix(images, targets, cfg.cutmix_alpha, rng)
    if use_mixup:
        return mixup(images, targets, cfg.mixup_alpha, rng)
    return cutmix(images, targets, cfg.cutmix_alpha, rng)


def train_epoch(
    model: Model,
    dataset: tuple[np.ndarray, np.ndarray],
    state: AdamWState,
    cfg: TrainConfig,
    epoch: int,
) -> dict:
    """Run one epoch over seeded-shuffled batches and return its metrics.

    Per batch: augment (coin flip between the enabled mixing schemes),
    forward, loss, backward, optimizer step with the scheduled rate.
    """
    images, labels = dataset
    m = len(images)
    if m == 0:
        raise ShapeError("train_epoch requires a non-empty dataset")
    num_classes = model.config.num_classes
    params = model.named_parameters()
    rng = np.random.default_rng([cfg.seed, epoch])
    order = rng.permutation(m)
    steps_per_epoch = math.ceil(m / cfg.batch_size)
    dtype = ag.get_default_dtype()

    start_time = time.perf_counter()
    total_loss = 0.0
    lr = 0.0
    for i, lo in enumerate(range(0, m, cfg.batch_size)):
        idx = order[lo : lo + cfg.batch_size]
        xb = np.ascontiguousarray(images[idx], dtype=dtype)
        targets = one_hot(labels[idx], num_classes, dtype=dtype)
        xb, targets = _augment(xb, targets, cfg, rng)

        logits = model_forward(Tensor(xb), model)
        loss = ag.softmax_cross_entropy(logits, targets)
        loss_value = loss.item()
        if not math.isfinite(loss_value):
            raise NumericsError(f"non-finite loss at batch {i} of epoch {epoch}")
        model.zero_grad()
        ag.backward(loss)

        lr = lr_at(epoch * steps_per_epoch + i + 1, steps_per_epoch, cfg)
        grads = {name: p.grad for name, p in params.items()}
        adamw_step(params, grads, state, lr, cfg)
        total_loss += loss_value
    seconds = time.perf_counter() - start_time
    return {
        "epoch": epoch,
        "train_loss": total_loss / steps_per_epoch,
        "lr": lr,
        "seconds": seconds,
        "samples_per_sec": m / seconds if seconds > 0 else float("inf"),
    }


def evaluate_top1(
    model: Model,
    dataset: tuple[np.ndarray, np.ndarray],
    batch_size: int = 256,
) -> float:
    """Fraction of samples whose argmax logit hits the label; ties resolve
    to the lowest class index.  No augmentation, no gradients."""
    images, labels = dataset
    if len(images) == 0:
        raise ShapeError("evaluate_top1 requires a non-empty dataset")
    dtype = ag.get_default_dtype()
    correct = 0
    with ag.no_grad():
        for lo in range(0, len(images), batch_size):
            xb = np.ascontiguousarray(images[lo : lo + batch_size], dtype=dtype)
            logits = model_forward(Tensor(xb), model).data
            correct += int((logits.argmax(axis=1) == labels[lo : lo + batch_size]).sum())
    return correct / len(images)
