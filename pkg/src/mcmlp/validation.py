"""Input validation helpers used by the estimators, transforms and model."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def require_power_of_two(value: int, name: str) -> int:
    """Both the token count and the channel width must be integer powers of
    two for the butterfly transforms to apply; reject anything else early."""
    if not isinstance(value, (int, np.integer)) or not is_power_of_two(int(value)):
        raise ConfigError(
            f"{name} must be an integer power of 2, got {value!r}"
        )
    return int(value)


def check_array(x, name: str = "X", ndim: int | None = None, dtype=None) -> np.ndarray:
    arr = np.asarray(x, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ShapeError(f"{name} must be non-empty")
    return arr


def check_image_batch(x, name: str = "X") -> np.ndarray:
    """Validate a (n_samples, channels, height, width) image stack."""
    arr = check_array(x, name=name, ndim=4)
    if arr.shape[2] != arr.shape[3]:
        raise ShapeError(
            f"{name} must contain square images, got {arr.shape[2]}x{arr.shape[3]}"
        )
    return arr


def check_labels(y, num_classes: int, name: str = "y") -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == arr.astype(np.int64)):
            raise ShapeError(f"{name} must contain integer class labels")
        arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
        raise ShapeError(
            f"{name} labels must lie in [0, {num_classes}), "
            f"got range [{arr.min()}, {arr.max()}]"
        )
    return arr.astype(np.int64)
