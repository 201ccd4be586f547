"""Fast and reference implementations of the two coordinate-frame changes.

Two orthogonal transforms are provided, each as a batched kernel over the
last array axis plus a differentiable 2-D wrapper over the last two axes:

* an orthonormal type-II discrete cosine transform, with an O(N^2) direct
  summation as ground truth and an O(N log N) split/merge butterfly as the
  production path (the transpose doubles as the autograd backward rule and,
  by orthonormality, as the inverse);
* the Walsh-Hadamard transform realized as an add/subtract butterfly,
  equal to multiplication by the Sylvester +-1 matrix, with the 2-D version
  scaled by 1/(N*C) so a constant input concentrates into the corner bin.

Both require power-of-two lengths.  All kernels are pure functions; plans
are immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import numpy as np

from .autograd import Tensor, _record
from .errors import ShapeError
from .validation import require_power_of_two

__all__ = [
    "DctPlan",
    "get_plan",
    "dct_matrix",
    "dct1d_naive",
    "dct1d_fast",
    "dct1d_transpose",
    "dct2d_array",
    "dct2d_transpose_array",
    "dct2d",
    "hadamard_matrix",
    "fwht",
    "hadamard2d_array",
    "hadamard2d",
]


# ---------------------------------------------------------------------------
# DCT


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix ``D[k, i]`` in float64.

    ``D @ D.T == I``; row 0 carries the extra ``1/sqrt(2)`` factor that makes
    the transform norm-preserving.
    """
    if n < 1:
        raise ShapeError("transform length must be >= 1")
    i = np.arange(n)
    k = np.arange(n)[:, None]
    m = np.cos(np.pi * (2 * i + 1) * k / (2.0 * n)) * np.sqrt(2.0 / n)
    m[0] *= np.sqrt(0.5)
    return m


def dct1d_naive(x) -> np.ndarray:
    """Direct O(N^2) orthonormal DCT-II along the last axis (float64).

    This is the ground-truth oracle for the fast path; it works for any
    length, not just powers of two.
    """
    arr = np.asarray(x, dtype=np.float64)
    return arr @ dct_matrix(arr.shape[-1]).T


class DctPlan:
    """Butterfly coefficient tables for one power-of-two transform length.

    Holds the per-level factors ``2*cos((i+0.5)*pi/L)`` for
    ``L = N, N/2, ..., 2`` plus the orthonormal output scaling.  Tables are
    built in float64 and cast lazily per requested dtype.
    """

    def __init__(self, length: int):
        self.length = require_power_of_two(length, "transform length")
        tables = []
        level = self.length
        while level >= 2:
            i = np.arange(level // 2)
            tables.append(2.0 * np.cos((i + 0.5) * np.pi / level))
            level //= 2
        scale = np.full(self.length, np.sqrt(2.0 / self.length))
        scale[0] = np.sqrt(1.0 / self.length)
        self._by_dtype = {
            np.dtype(np.float64): (tuple(tables), scale),
        }

    def tables(self, dtype):
        dt = np.dtype(dtype)
        cached = self._by_dtype.get(dt)
        if cached is None:
            tables64, scale64 = self._by_dtype[np.dtype(np.float64)]
            cached = (
                tuple(t.astype(dt) for t in tables64),
                scale64.astype(dt),
            )
            self._by_dtype[dt] = cached
        return cached


_PLANS: dict[int, DctPlan] = {}


def get_plan(length: int) -> DctPlan:
    plan = _PLANS.get(length)
    if plan is None:
        plan = _PLANS[length] = DctPlan(length)
    return plan


def _check_plan(plan: DctPlan, arr: np.ndarray) -> None:
    if arr.shape[-1] != plan.length:
        raise ShapeError(
            f"plan for length {plan.length} applied to length {arr.shape[-1]}"
        )


def _dct2_unscaled(x: np.ndarray, tables) -> np.ndarray:
    """Unscaled DCT-II along the last axis via the split/merge butterfly.

    Splits halve the block length top-down (log N passes), merges interleave
    transformed halves bottom-up (log N passes); every pass is one vectorized
    sweep over all blocks, so total work is O(batch * N log N).
    """
    lead = x.shape[:-1]
    n = x.shape[-1]
    v = x.reshape(lead + (1, n))
    for w in tables:
        m, half = v.shape[-2], v.shape[-1] // 2
        lo = v[..., :half]
        hi = v[..., half:][..., ::-1]
        out = np.empty(lead + (2 * m, half), dtype=v.dtype)
        np.add(lo, hi, out=out[..., 0::2, :])
        np.subtract(lo, hi, out=out[..., 1::2, :])
        out[..., 1::2, :] /= w
        v = out
    while v.shape[-2] > 1:
        m, k = v.shape[-2], v.shape[-1]
        beta = v[..., 1::2, :]
        out = np.empty(lead + (m // 2, 2 * k), dtype=v.dtype)
        out[..., 0::2] = v[..., 0::2, :]
        merged = out[..., 1::2]
        merged[...] = beta
        merged[..., :-1] += beta[..., 1:]
        v = out
    return v.reshape(lead + (n,))


def _dct3_unscaled(x: np.ndarray, tables) -> np.ndarray:
    """Unscaled DCT-III (the transpose of :func:`_dct2_unscaled`) along the
    last axis: de-interleave with pair sums top-down, then cosine butterflies
    bottom-up."""
    lead = x.shape[:-1]
    n = x.shape[-1]
    v = x.reshape(lead + (1, n))
    while v.shape[-1] > 1:
        m, half = v.shape[-2], v.shape[-1] // 2
        odd = v[..., 1::2]
        out = np.empty(lead + (2 * m, half), dtype=v.dtype)
        out[..., 0::2, :] = v[..., 0::2]
        beta = out[..., 1::2, :]
        beta[...] = odd
        beta[..., 1:] += odd[..., :-1]
        v = out
    for w in reversed(tables):
        m, k = v.shape[-2], v.shape[-1]
        alpha = v[..., 0::2, :]
        y = v[..., 1::2, :] / w
        out = np.empty(lead + (m // 2, 2 * k), dtype=v.dtype)
        np.add(alpha, y, out=out[..., :k])
        np.subtract(alpha, y, out=out[..., k:][..., ::-1])
        v = out
    return v.reshape(lead + (n,))


def dct1d_fast(plan: DctPlan, x) -> np.ndarray:
    """Orthonormal DCT-II along the last axis in O(N log N).

    Matches :func:`dct1d_naive` to within 1e-9 in float64.
    """
    arr = np.asarray(x)
    _check_plan(plan, arr)
    tables, scale = plan.tables(arr.dtype if arr.dtype.kind == "f" else np.float64)
    arr = arr.astype(scale.dtype, copy=False)
    return _dct2_unscaled(arr, tables) * scale


def dct1d_transpose(plan: DctPlan, g) -> np.ndarray:
    """Transpose (= inverse, by orthonormality) of :func:`dct1d_fast` along
    the last axis; serves as the gradient rule for the forward transform."""
    arr = np.asarray(g)
    _check_plan(plan, arr)
    tables, scale = plan.tables(arr.dtype if arr.dtype.kind == "f" else np.float64)
    arr = arr.astype(scale.dtype, copy=False)
    return _dct3_unscaled(arr * scale, tables)


def _apply_last_two(x: np.ndarray, fn_last, fn_token) -> np.ndarray:
    """Apply ``fn_last`` along the last axis, then ``fn_token`` along the
    second-to-last (token) axis."""
    out = fn_last(x)
    out = np.swapaxes(fn_token(np.swapaxes(out, -1, -2)), -1, -2)
    return out


def dct2d_array(x) -> np.ndarray:
    """Separable 2-D orthonormal DCT-II over the last two axes
    ``[..., N, C]``: rows (channel axis) first, then columns (token axis)."""
    arr = np.asarray(x)
    if arr.ndim < 2:
        raise ShapeError(f"dct2d expects at least 2 axes, got shape {arr.shape}")
    n = require_power_of_two(arr.shape[-2], "token count N")
    c = require_power_of_two(arr.shape[-1], "channel width C")
    plan_c, plan_n = get_plan(c), get_plan(n)
    return _apply_last_two(
        arr,
        lambda a: dct1d_fast(plan_c, a),
        lambda a: dct1d_fast(plan_n, a),
    )


def dct2d_transpose_array(g) -> np.ndarray:
    """Adjoint of :func:`dct2d_array` (token axis first, then channel axis)."""
    arr = np.asarray(g)
    n = require_power_of_two(arr.shape[-2], "token count N")
    c = require_power_of_two(arr.shape[-1], "channel width C")
    plan_c, plan_n = get_plan(c), get_plan(n)
    out = np.swapaxes(dct1d_transpose(plan_n, np.swapaxes(arr, -1, -2)), -1, -2)
    return dct1d_transpose(plan_c, out)


def dct2d(x: Tensor) -> Tensor:
    """Differentiable batched 2-D DCT over the last two axes of a tensor."""
    if not isinstance(x, Tensor):
        x = Tensor(x)
    out = dct2d_array(x.data)

    def rule(g):
        return (dct2d_transpose_array(g),)

    return _record(out, (x,), rule)


# ---------------------------------------------------------------------------
# Walsh-Hadamard


def hadamard_matrix(n: int) -> np.ndarray:
    """Sylvester +-1 matrix of power-of-two order ``n`` (int64 entries).

    Built by block doubling ``[[H, H], [H, -H]]`` from ``[[1]]``; symmetric,
    first row/column all ones, and ``H @ H.T == n * I`` exactly in integer
    arithmetic.
    """
    require_power_of_two(n, "order")
    h = np.array([[1]], dtype=np.int64)
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h


def fwht(x) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along the last axis.

    Equal to ``hadamard_matrix(N) @ x`` but computed with log2(N) butterfly
    passes of additions and subtractions only.  Integer input stays integer,
    so applying it twice returns exactly ``N * x``.
    """
    arr = np.asarray(x)
    n = require_power_of_two(arr.shape[-1], "transform length")
    lead = arr.shape[:-1]
    v = arr
    h = 1
    while h < n:
        v = v.reshape(lead + (n // (2 * h), 2, h))
        a = v[..., 0, :]
        b = v[..., 1, :]
        out = np.empty(v.shape, dtype=v.dtype)
        np.add(a, b, out=out[..., 0, :])
        np.subtract(a, b, out=out[..., 1, :])
        v = out
        h *= 2
    return v.reshape(lead + (n,))


def hadamard2d_array(x) -> np.ndarray:
    """2-D Walsh-Hadamard transform ``H_N @ X @ H_C / (N*C)`` over the last
    two axes, computed with butterflies along each axis.

    The 1/(N*C) scaling generalizes the square-case convention of dividing
    by the squared order; an all-ones N x C input maps to a single 1 in the
    (0, 0) bin.
    """
    arr = np.asarray(x)
    if arr.ndim < 2:
        raise ShapeError(f"hadamard2d expects at least 2 axes, got shape {arr.shape}")
    n = require_power_of_two(arr.shape[-2], "token count N")
    c = require_power_of_two(arr.shape[-1], "channel width C")
    out = fwht(arr)
    out = np.swapaxes(fwht(np.swapaxes(out, -1, -2)), -1, -2)
    return out / (n * c)


def hadamard2d(x: Tensor) -> Tensor:
    """Differentiable batched 2-D Walsh-Hadamard transform.

    The map is symmetric, so the backward rule applies the same scaled
    transform to the incoming gradient.
    """
    if not isinstance(x, Tensor):
        x = Tensor(x)
    out = hadamard2d_array(x.data)

    def rule(g):
        return (hadamard2d_array(g),)

    return _record(out, (x,), rule)
