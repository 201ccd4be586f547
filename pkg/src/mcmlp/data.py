"""CIFAR-100 binary ingestion, checkpoint persistence, run manifests and
metric logs.

The dataset format is the published CIFAR-100 binary layout: 3074-byte
records of one coarse label byte, one fine label byte, and 3072 pixel bytes
(R, G, B planes, each 32x32 row-major).  Checkpoints are little-endian
binary files with magic ``MCML``, an embedded JSON config, float32 tensors,
optional optimizer state, and a trailing 64-bit digest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .__about__ import __version__
from .errors import (
    CheckpointChecksumError,
    CheckpointFormatError,
    CheckpointShapeError,
    CheckpointVersionError,
    DataFormatError,
    ShapeError,
)
from .model import Model, ModelConfig, count_params, init_model
from .training import AdamWState, TrainConfig

RECORD_BYTES = 3074
IMAGE_SHAPE = (3, 32, 32)
CHECKPOINT_MAGIC = b"MCML"
CHECKPOINT_VERSION = 1
_DIGEST_BYTES = 8


@dataclass
class Cifar100Record:
    """One labeled 32x32 RGB image, pixels kept as raw bytes."""

    coarse_label: int
    fine_label: int
    pixels: np.ndarray  # (3072,) uint8


def load_cifar100(path) -> list[Cifar100Record]:
    """Parse a CIFAR-100 binary file into records, in file order."""
    raw = np.fromfile(os.fspath(path), dtype=np.uint8)
    if raw.size % RECORD_BYTES != 0:
        raise DataFormatError(
            f"{path}: file length {raw.size} is not a multiple of the "
            f"{RECORD_BYTES}-byte record size "
            f"(nearest record counts: {raw.size // RECORD_BYTES} full, "
            f"{raw.size % RECORD_BYTES} trailing bytes)"
        )
    table = raw.reshape(-1, RECORD_BYTES)
    coarse = table[:, 0]
    fine = table[:, 1]
    bad = np.nonzero((coarse > 19) | (fine > 99))[0]
    if bad.size:
        i = int(bad[0])
        raise DataFormatError(
            f"{path}: record {i} has labels coarse={int(coarse[i])}, "
            f"fine={int(fine[i])} outside their valid ranges"
        )
    return [
        Cifar100Record(int(coarse[i]), int(fine[i]), table[i, 2:])
        for i in range(table.shape[0])
    ]


def fine_labels(records: list[Cifar100Record]) -> np.ndarray:
    return np.array([r.fine_label for r in records], dtype=np.int64)


def to_images(records: list[Cifar100Record], dtype=np.float32) -> np.ndarray:
    """Stack records into a ``[M, 3, 32, 32]`` float array scaled to [0, 1]."""
    if not records:
        raise ShapeError("no records to convert")
    flat = np.stack([r.pixels for r in records])
    return (flat.astype(dtype) / dtype(255.0)).reshape((len(records),) + IMAGE_SHAPE)


def channel_stats(images: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and standard deviation over a [M, ch, H, W] stack."""
    mean = images.mean(axis=(0, 2, 3), dtype=np.float64)
    std = images.std(axis=(0, 2, 3), dtype=np.float64)
    return mean, std


def normalize(images: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    mean = np.asarray(mean, dtype=images.dtype).reshape(1, -1, 1, 1)
    std = np.asarray(std, dtype=images.dtype).reshape(1, -1, 1, 1)
    return (images - mean) / std


def upscale_nearest(images: np.ndarray, size: int) -> np.ndarray:
    """Nearest-neighbor upscale of a [M, ch, H, W] stack to ``size`` pixels
    per side.  A no-op when the sizes already agree."""
    h = images.shape[-1]
    if size == h:
        return images
    idx = (np.arange(size) * h // size).clip(0, h - 1)
    return np.ascontiguousarray(images[:, :, idx][:, :, :, idx])


def stratified_subset(labels: np.ndarray, k: int, seed: int, num_classes: int = 100) -> np.ndarray:
    """Seed-deterministic subset of ``k`` indices, class-stratified whenever
    ``k >= num_classes`` (each class contributes an equal share, remainder
    spread over the lowest class indices)."""
    m = len(labels)
    if not 0 < k <= m:
        raise ShapeError(f"subset size {k} out of range for {m} samples")
    rng = np.random.default_rng(seed)
    if k < num_classes:
        return np.sort(rng.permutation(m)[:k])
    base, extra = divmod(k, num_classes)
    chosen = []
    for cls in range(num_classes):
        pool = np.nonzero(labels == cls)[0]
        want = base + (1 if cls < extra else 0)
        if len(pool) < want:
            raise ShapeError(
                f"class {cls} has only {len(pool)} samples, need {want} "
                "for a stratified subset"
            )
        chosen.append(rng.permutation(pool)[:want])
    return np.sort(np.concatenate(chosen))


# ---------------------------------------------------------------------------
# Synthetic stand-in dataset

def write_synthetic_cifar100(
    out_dir,
    train_records: int = 50_000,
    test_records: int = 10_000,
    seed: int = 2024,
) -> tuple[str, str]:
    """Write a CIFAR-100-format dataset with learnable class structure.

    Each fine class gets a smooth random color template; samples are the
    template plus pixel noise.  Useful for exercising the full pipeline when
    the real dataset files are not on disk (this package never downloads).
    Returns the (train_path, test_path) pair.
    """
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    templates = _class_templates(rng)
    train_path = os.path.join(out_dir, "train.bin")
    test_path = os.path.join(out_dir, "test.bin")
    _write_split(train_path, train_records, templates, rng)
    _write_split(test_path, test_records, templates, rng)
    return train_path, test_path


def _class_templates(rng) -> np.ndarray:
    # Low-frequency patterns: upsampled 4x4 noise per channel, per class.
    coarse = rng.uniform(0.1, 0.9, size=(100, 3, 4, 4))
    up = np.repeat(np.repeat(coarse, 8, axis=2), 8, axis=3)
    return up.astype(np.float32)


def _write_split(path, n_records, templates, rng) -> None:
    labels = np.arange(n_records) % 100  # balanced: 500/100 per class at full size
    with open(path, "wb") as fh:
        for lo in range(0, n_records, 1000):
            chunk = labels[lo : lo + 1000]
            noise = rng.normal(0.0, 0.18, size=(len(chunk),) + IMAGE_SHAPE).astype(np.float32)
            imgs = np.clip(templates[chunk] + noise, 0.0, 1.0)
            pix = (imgs * 255.0).astype(np.uint8).reshape(len(chunk), 3072)
            rec = np.empty((len(chunk), RECORD_BYTES), dtype=np.uint8)
            rec[:, 0] = chunk // 5  # 20 coarse groups of 5 fine classes
            rec[:, 1] = chunk
            rec[:, 2:] = pix
            fh.write(rec.tobytes())


# ---------------------------------------------------------------------------
# Checkpoints


def _write_tensor(buf: io.BytesIO, name: str, arr: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    buf.write(struct.pack("<H", len(encoded)))
    buf.write(encoded)
    buf.write(struct.pack("<B", arr.ndim))
    for dim in arr.shape:
        buf.write(struct.pack("<I", dim))
    buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointFormatError(f"truncated checkpoint while reading {what}")
    return data


def _read_tensor(fh) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<H", _read_exact(fh, 2, "tensor name length"))
    name = _read_exact(fh, name_len, "tensor name").decode("utf-8")
    (ndim,) = struct.unpack("<B", _read_exact(fh, 1, "tensor rank"))
    shape = tuple(
        struct.unpack("<I", _read_exact(fh, 4, "tensor dim"))[0] for _ in range(ndim)
    )
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(_read_exact(fh, 4 * count, "tensor data"), dtype="<f4")
    return name, data.reshape(shape).copy()


def save_checkpoint(model: Model, state: AdamWState | None, path) -> None:
    """Serialize the model (and optional optimizer state) with a trailing
    64-bit digest.  Values are stored as little-endian float32, so the
    round trip is bit-exact for float32 runs."""
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    config_blob = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(config_blob)))
    buf.write(config_blob)
    params = model.named_parameters()
    buf.write(struct.pack("<I", len(params)))
    for name, p in params.items():
        _write_tensor(buf, name, p.data)
    buf.write(struct.pack("<B", 1 if state is not None else 0))
    if state is not None:
        buf.write(struct.pack("<Q", state.t))
        for name in params:
            _write_tensor(buf, name, state.m[name])
            _write_tensor(buf, name, state.v[name])
    payload = buf.getvalue()
    digest = hashlib.blake2b(payload, digest_size=_DIGEST_BYTES).digest()
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(digest)


def load_checkpoint(path) -> tuple[Model, AdamWState | None]:
    """Inverse of :func:`save_checkpoint`; validates magic, version, digest
    and tensor shapes against the embedded configuration."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(CHECKPOINT_MAGIC) + _DIGEST_BYTES:
        raise CheckpointFormatError(f"{path}: too short to be a checkpoint")
    payload, digest = blob[:-_DIGEST_BYTES], blob[-_DIGEST_BYTES:]
    if payload[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic bytes")
    expected = hashlib.blake2b(payload, digest_size=_DIGEST_BYTES).digest()
    if digest != expected:
        raise CheckpointChecksumError(
            f"{path}: checksum mismatch (stored {digest.hex()}, computed {expected.hex()})"
        )
    fh = io.BytesIO(payload[len(CHECKPOINT_MAGIC):])
    (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {version} unsupported "
            f"(expected {CHECKPOINT_VERSION})"
        )
    (config_len,) = struct.unpack("<I", _read_exact(fh, 4, "config length"))
    config = ModelConfig.from_dict(json.loads(_read_exact(fh, config_len, "config")))
    model = init_model(config, seed=0)
    expected_params = model.named_parameters()
    (n_params,) = struct.unpack("<I", _read_exact(fh, 4, "parameter count"))
    if n_params != len(expected_params):
        raise CheckpointShapeError(
            f"{path}: stores {n_params} tensors, config implies {len(expected_params)}"
        )
    loaded: dict[str, np.ndarray] = {}
    for _ in range(n_params):
        name, arr = _read_tensor(fh)
        loaded[name] = arr
    for name, p in expected_params.items():
        if name not in loaded:
            raise CheckpointShapeError(f"{path}: missing tensor {name!r}")
        if loaded[name].shape != p.shape:
            raise CheckpointShapeError(
                f"{path}: tensor {name!r} has shape {loaded[name].shape}, "
                f"config implies {p.shape}"
            )
        p.data = loaded[name]
    (has_state,) = struct.unpack("<B", _read_exact(fh, 1, "state flag"))
    state = None
    if has_state:
        (t,) = struct.unpack("<Q", _read_exact(fh, 8, "step count"))
        state = AdamWState(t=t)
        for name, p in expected_params.items():
            m_name, m_arr = _read_tensor(fh)
            v_name, v_arr = _read_tensor(fh)
            if m_name != name or v_name != name or m_arr.shape != p.shape or v_arr.shape != p.shape:
                raise CheckpointShapeError(
                    f"{path}: optimizer state for {name!r} is inconsistent"
                )
            state.m[name] = m_arr
            state.v[name] = v_arr
    if fh.read(1):
        raise CheckpointFormatError(f"{path}: trailing bytes after payload")
    # Checkpoints are float32 native; keep tensors float32 for exactness.
    for p in model.parameters():
        p.data = np.ascontiguousarray(p.data, dtype=np.float32)
    return model, state


def serialized_scalar_count(path) -> int:
    """Number of parameter scalars stored in a checkpoint (excludes any
    optimizer state); cross-checks :func:`mcmlp.model.count_params`."""
    model, _ = load_checkpoint(path)
    return model.num_params()


# ---------------------------------------------------------------------------
# Run manifest and metrics


METRICS_HEADER = ("epoch", "train_loss", "lr", "val_top1", "seconds")


def write_manifest(
    path,
    model_config: ModelConfig,
    train_config: TrainConfig,
    seed: int,
    metrics_path,
    normalization: dict | None = None,
    extra: dict | None = None,
) -> dict:
    """Write the run manifest (must happen before the first step)."""
    manifest = {
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "model_config": model_config.to_dict(),
        "train_config": train_config.to_dict(),
        "metrics_csv": os.fspath(metrics_path),
        "normalization": normalization or {},
        "threads": int(os.environ.get("OMP_NUM_THREADS", os.cpu_count() or 1)),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


class MetricsWriter:
    """Append-only per-epoch CSV with a fixed header row."""

    def __init__(self, path):
        self.path = os.fspath(path)
        if not os.path.exists(self.path):
            with open(self.path, "w", newline="", encoding="utf-8") as fh:
                csv.writer(fh).writerow(METRICS_HEADER)

    def append(self, epoch: int, train_loss: float, lr: float, val_top1: float, seconds: float) -> None:
        with open(self.path, "a", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerow(
                [epoch, f"{train_loss:.10g}", f"{lr:.10g}", f"{val_top1:.6f}", f"{seconds:.3f}"]
            )


def read_metrics(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
