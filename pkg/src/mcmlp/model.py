"""The mixer network: patch embedding, transform-mixer blocks, pooled head.

Each block chains two mixers.  A mixer changes the coordinate frame of the
``[N, C]`` token/channel slab with a 2-D orthogonal transform, concatenates
the transformed features back onto the originals (doubling the channel
width), normalizes, and runs a per-token two-layer MLP whose output is added
residually to the block input.  Token count and channel width must be powers
of two so the butterfly transforms apply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError
from .transforms import dct2d, hadamard2d
from .validation import is_power_of_two

TRANSFORM_KINDS = ("hadamard", "dct")

LN_EPS = 1e-6


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    ``mixer_order`` lists the transform kinds applied inside one block, in
    order; the default runs the Hadamard mixer first, then the DCT mixer.
    """

    image_size: int = 32
    patch_size: int = 4
    channels_in: int = 3
    dim: int = 128
    depth: int = 8
    expansion: int = 3
    num_classes: int = 100
    mixer_order: tuple[str, ...] = ("hadamard", "dct")

    def __post_init__(self):
        if self.patch_size <= 0 or self.image_size % self.patch_size != 0:
            raise ConfigError(
                f"image_size {self.image_size} is not divisible by "
                f"patch_size {self.patch_size}"
            )
        if not is_power_of_two(self.num_tokens):
            raise ConfigError(
                f"token count N = (image_size/patch_size)^2 = {self.num_tokens} "
                "must be an integer power of 2"
            )
        if not is_power_of_two(self.dim):
            raise ConfigError(
                f"channel dimension C = {self.dim} must be an integer power of 2"
            )
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.expansion < 1:
            raise ConfigError(f"expansion factor must be >= 1, got {self.expansion}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.channels_in < 1:
            raise ConfigError(f"channels_in must be >= 1, got {self.channels_in}")
        order = tuple(self.mixer_order)
        if not order or any(kind not in TRANSFORM_KINDS for kind in order):
            raise ConfigError(
                f"mixer_order entries must be drawn from {TRANSFORM_KINDS}, "
                f"got {self.mixer_order!r}"
            )
        object.__setattr__(self, "mixer_order", order)

    @property
    def num_tokens(self) -> int:
        return (self.image_size // self.patch_size) ** 2

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * self.channels_in

    @property
    def hidden_dim(self) -> int:
        return self.expansion * self.dim

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "patch_size": self.patch_size,
            "channels_in": self.channels_in,
            "dim": self.dim,
            "depth": self.depth,
            "expansion": self.expansion,
            "num_classes": self.num_classes,
            "mixer_order": list(self.mixer_order),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "mixer_order" in d:
            d["mixer_order"] = tuple(d["mixer_order"])
        return cls(**d)


@dataclass
class MixerParams:
    """Weights of one mixer: layer-norm affine over the doubled channel axis
    plus the two per-token FC layers."""

    kind: str
    ln_gamma: Tensor  # (2C,)
    ln_beta: Tensor   # (2C,)
    w1: Tensor        # (2C, f*C)
    b1: Tensor        # (f*C,)
    w2: Tensor        # (f*C, C)
    b2: Tensor        # (C,)

    def named(self, prefix: str):
        yield f"{prefix}.ln_gamma", self.ln_gamma
        yield f"{prefix}.ln_beta", self.ln_beta
        yield f"{prefix}.w1", self.w1
        yield f"{prefix}.b1", self.b1
        yield f"{prefix}.w2", self.w2
        yield f"{prefix}.b2", self.b2


@dataclass
class PatchEmbedParams:
    projection: Tensor  # (patch_dim, C)
    bias: Tensor        # (C,)

    def named(self, prefix: str):
        yield f"{prefix}.projection", self.projection
        yield f"{prefix}.bias", self.bias


@dataclass
class HeadParams:
    weight: Tensor  # (C, num_classes)
    bias: Tensor    # (num_classes,)

    def named(self, prefix: str):
        yield f"{prefix}.weight", self.weight
        yield f"{prefix}.bias", self.bias


@dataclass
class Model:
    config: ModelConfig
    patch_embed: PatchEmbedParams
    blocks: list[list[MixerParams]]
    head: HeadParams

    def named_parameters(self) -> dict[str, Tensor]:
        """Parameters in a fixed, documented order (embed, blocks, head)."""
        out: dict[str, Tensor] = {}
        out.update(self.patch_embed.named("patch_embed"))
        for i, block in enumerate(self.blocks):
            for j, mixer in enumerate(block):
                out.update(mixer.named(f"blocks.{i}.mixers.{j}"))
        out.update(self.head.named("head"))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def num_params(self) -> int:
        return sum(p.size for p in self.parameters())


def _uniform_fan_in(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def init_model(config: ModelConfig, seed: int) -> Model:
    """Build all parameter tensors, deterministically in ``seed``.

    Weights draw from uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); biases start
    at zero, layer-norm scales at one.
    """
    rng = np.random.default_rng(seed)
    c, f = config.dim, config.expansion
    embed = PatchEmbedParams(
        projection=_uniform_fan_in(rng, (config.patch_dim, c), config.patch_dim),
        bias=Tensor(np.zeros(c), requires_grad=True),
    )
    blocks = []
    for _ in range(config.depth):
        block = []
        for kind in config.mixer_order:
            block.append(
                MixerParams(
                    kind=kind,
                    ln_gamma=Tensor(np.ones(2 * c), requires_grad=True),
                    ln_beta=Tensor(np.zeros(2 * c), requires_grad=True),
                    w1=_uniform_fan_in(rng, (2 * c, f * c), 2 * c),
                    b1=Tensor(np.zeros(f * c), requires_grad=True),
                    w2=_uniform_fan_in(rng, (f * c, c), f * c),
                    b2=Tensor(np.zeros(c), requires_grad=True),
                )
            )
        blocks.append(block)
    head = HeadParams(
        weight=_uniform_fan_in(rng, (c, config.num_classes), c),
        bias=Tensor(np.zeros(config.num_classes), requires_grad=True),
    )
    return Model(config=config, patch_embed=embed, blocks=blocks, head=head)


def patch_embed(images: Tensor, params: PatchEmbedParams, patch_size: int) -> Tensor:
    """Project non-overlapping patches into tokens: ``[B, ch, H, W] ->
    [B, N, C]`` with tokens in raster order of the patch grid."""
    tokens = ag.extract_patches(images, patch_size)
    return ag.add(ag.matmul(tokens, params.projection), params.bias)


def mixer_forward(x: Tensor, params: MixerParams) -> Tensor:
    """One mixer: transform, concatenate with the input, layer-norm, and a
    per-token MLP added residually.  Shape ``[B, N, C] -> [B, N, C]``."""
    if params.kind == "hadamard":
        y = hadamard2d(x)
    elif params.kind == "dct":
        y = dct2d(x)
    else:
        raise ConfigError(f"unknown transform kind {params.kind!r}")
    z = ag.concat_last(y, x)
    z = ag.layer_norm(z, params.ln_gamma, params.ln_beta, eps=LN_EPS)
    h = ag.gelu(ag.add(ag.matmul(z, params.w1), params.b1))
    out = ag.add(ag.matmul(h, params.w2), params.b2)
    return ag.add(out, x)


def mc_block_forward(x: Tensor, mixers: list[MixerParams]) -> Tensor:
    """One block: the configured mixers applied in order."""
    for params in mixers:
        x = mixer_forward(x, params)
    return x


def model_forward(images: Tensor, model: Model) -> Tensor:
    """Full network: embed, blocks, token-mean pooling, linear head.

    Returns logits of shape ``[B, num_classes]``.
    """
    cfg = model.config
    if not isinstance(images, Tensor):
        images = Tensor(images)
    b, ch, h, w = images.shape
    if ch != cfg.channels_in or h != cfg.image_size or w != cfg.image_size:
        raise ConfigError(
            f"images of shape {images.shape} do not match configured "
            f"[B, {cfg.channels_in}, {cfg.image_size}, {cfg.image_size}]"
        )
    x = patch_embed(images, model.patch_embed, cfg.patch_size)
    for block in model.blocks:
        x = mc_block_forward(x, block)
    pooled = ag.mean_tokens(x)
    return ag.add(ag.matmul(pooled, model.head.weight), model.head.bias)


def count_params(config: ModelConfig) -> int:
    """Exact trainable-scalar count for a configuration."""
    c, f = config.dim, config.expansion
    embed = config.patch_dim * c + c
    per_mixer = 2 * (2 * c) + (2 * c) * (f * c) + f * c + (f * c) * c + c
    head = c * config.num_classes + config.num_classes
    return embed + config.depth * len(config.mixer_order) * per_mixer + head


def count_macs(config: ModelConfig) -> int:
    """Multiply-accumulate estimate for one image forward pass.

    Counts the FC matmuls plus ``N*C*log2(N*C)`` per transform; pooling and
    normalization are ignored.
    """
    n, c, f = config.num_tokens, config.dim, config.expansion
    embed = n * config.patch_dim * c
    mixer_matmuls = n * ((2 * c) * (f * c) + (f * c) * c)
    transform = n * c * int(math.log2(n * c))
    head = c * config.num_classes
    return embed + config.depth * len(config.mixer_order) * (mixer_matmuls + transform) + head
