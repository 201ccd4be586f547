"""Minimal reverse-mode automatic differentiation over dense numpy arrays.

A :class:`Tensor` wraps a row-major ``numpy`` array plus an optional gradient
buffer.  Every differentiable operation records its inputs and a backward
rule on the output tensor, together with a monotonically increasing sequence
number.  ``backward(loss)`` replays the recorded rules in strict reverse
execution order, which makes gradient accumulation deterministic: the same
forward sequence always produces bit-identical gradients.

Precision is a per-run mode rather than a per-tensor attribute: tensors are
created in the current default dtype (float64 for testing/oracles, float32
for training).  Broadcasting is deliberately narrow — bias addition over the
last axis and leading-axis broadcast in ``matmul`` — everything else requires
exact shape agreement.
"""

from __future__ import annotations

import contextlib
import itertools
import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

from .errors import ShapeError

_DEFAULT_DTYPE = np.float64
_GRAD_ENABLED = True
_SEQ = itertools.count()

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def set_default_dtype(dtype) -> None:
    """Set the run-wide float width (``np.float32`` or ``np.float64``)."""
    global _DEFAULT_DTYPE
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype!r}; use float32 or float64")
    _DEFAULT_DTYPE = dt.type


def get_default_dtype():
    return _DEFAULT_DTYPE


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the run-wide float width."""
    previous = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


@contextlib.contextmanager
def no_grad():
    """Disable tape recording (inference / evaluation)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class Tensor:
    """Dense n-dimensional array with an optional gradient buffer.

    Tensors are immutable after creation except for ``grad``, which
    ``backward`` accumulates into with ``+=`` and ``zero_grad`` clears.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_rule", "_seq")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_rule: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self._seq = next(_SEQ)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() requires a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; all arithmetic lives in module-level functions below.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out_data, parents: tuple[Tensor, ...], backward_rule) -> Tensor:
    """Wrap a forward result, attaching the backward rule when needed."""
    requires = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=requires)
    if requires:
        out._parents = parents
        out._backward_rule = backward_rule
    return out


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every ``requires_grad`` tensor reachable from
    ``loss``, accumulating with ``+=`` across uses and across calls.

    Rules are replayed in reverse execution (creation) order, so gradient
    accumulation order is fixed and results are bit-deterministic.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")

    nodes: list[Tensor] = []
    seen: set[int] = set()
    stack = [loss]
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda t: t._seq)

    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for t in reversed(nodes):
        g = pending.pop(id(t), None)
        if g is None:
            continue
        if t.requires_grad:
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
            t.grad += g
        if t._backward_rule is None:
            continue
        for parent, pg in zip(t._parents, t._backward_rule(g)):
            if pg is None or not (parent.requires_grad or parent._backward_rule):
                continue
            acc = pending.get(id(parent))
            pending[id(parent)] = pg if acc is None else acc + pg


# ---------------------------------------------------------------------------
# Operations


def add(a: Tensor, b) -> Tensor:
    """Elementwise addition; the one broadcast allowed is a 1-D bias over the
    last axis of ``a``."""
    a = _as_tensor(a)
    if isinstance(b, (int, float)):
        out = a.data + b
        return _record(out, (a,), lambda g: (g,))
    b = _as_tensor(b)
    if a.shape == b.shape:
        return _record(a.data + b.data, (a, b), lambda g: (g, g))
    if b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]:
        def rule(g):
            axes = tuple(range(g.ndim - 1))
            return g, g.sum(axis=axes) if axes else g
        return _record(a.data + b.data, (a, b), rule)
    raise ShapeError(f"cannot add shapes {a.shape} and {b.shape}")


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product with an equal-shape tensor or a python scalar."""
    a = _as_tensor(a)
    if isinstance(b, (int, float)):
        s = float(b)
        return _record(a.data * s, (a,), lambda g: (g * s,))
    b = _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return _record(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product ``[..., m, k] @ [k, n] -> [..., m, n]``.

    The second operand must be a plain matrix; leading axes of the first are
    broadcast by flattening into a single GEMM.  Backward produces
    ``dA = g @ B^T`` and ``dB = A^T g`` summed over leading axes.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if b.ndim != 2:
        raise ShapeError(f"matmul expects a 2-D right operand, got shape {b.shape}")
    if a.ndim < 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    k, n = b.shape
    lead = a.shape[:-1]
    a2 = a.data.reshape(-1, k)
    out = (a2 @ b.data).reshape(lead + (n,))

    def rule(g):
        g2 = g.reshape(-1, n)
        da = (g2 @ b.data.T).reshape(a.shape)
        db = a2.T @ g2
        return da, db

    return _record(out, (a, b), rule)


def concat_last(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the last axis; backward splits the gradient."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[:-1] != b.shape[:-1]:
        raise ShapeError(
            f"concat_last requires equal leading shapes, got {a.shape} and {b.shape}"
        )
    split = a.shape[-1]
    out = np.concatenate([a.data, b.data], axis=-1)

    def rule(g):
        return g[..., :split].copy(), g[..., split:].copy()

    return _record(out, (a, b), rule)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize each last-axis slice to zero mean / unit variance
    (population 1/C variance), then apply the affine scale and shift."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    c = x.shape[-1] if x.ndim else 0
    if c == 0:
        raise ShapeError("layer_norm requires a non-empty last axis")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(
            f"layer_norm scale/shift must have shape ({c},), "
            f"got {gamma.shape} and {beta.shape}"
        )
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = np.einsum("...i,...i->...", centered, centered)[..., None] / c
    inv = 1.0 / np.sqrt(var + eps)
    norm = centered * inv
    out = norm * gamma.data
    out += beta.data

    def rule(g):
        g2 = g.reshape(-1, c)
        n2 = norm.reshape(-1, c)
        dbeta = g2.sum(axis=0)
        dgamma = np.einsum("ij,ij->j", g2, n2)
        dnorm = g * gamma.data
        # Standard layer-norm input gradient with population variance.
        dx = dnorm - dnorm.mean(axis=-1, keepdims=True)
        dx -= norm * (np.einsum("...i,...i->...", dnorm, norm)[..., None] / c)
        dx *= inv
        return dx, dgamma, dbeta

    return _record(out, (x, gamma, beta), rule)


def gelu(x: Tensor) -> Tensor:
    """Exact Gaussian-CDF gelu: ``x * Phi(x)`` with ``Phi`` erf-based."""
    x = _as_tensor(x)
    cdf = erf(x.data * _INV_SQRT2)
    cdf += 1.0
    cdf *= 0.5
    out = x.data * cdf

    def rule(g):
        # d/dx x*Phi(x) = Phi(x) + x * pdf(x); built in place on one buffer
        d = x.data * x.data
        d *= -0.5
        np.exp(d, out=d)
        d *= _INV_SQRT2PI
        d *= x.data
        d += cdf
        d *= g
        return (d,)

    return _record(out, (x,), rule)


def softmax_cross_entropy(logits: Tensor, target_probs) -> Tensor:
    """Mean over the batch of ``-sum(target * log softmax(logits))``.

    Targets are treated as constants (no gradient path); each row must be a
    probability distribution.  Log-softmax uses max subtraction so large
    logits stay finite.
    """
    logits = _as_tensor(logits)
    targets = target_probs.data if isinstance(target_probs, Tensor) else np.asarray(target_probs)
    if logits.ndim != 2 or targets.shape != logits.shape:
        raise ShapeError(
            f"softmax_cross_entropy expects matching [B, K] operands, "
            f"got {logits.shape} and {targets.shape}"
        )
    b, k = logits.shape
    if k < 2:
        raise ShapeError(f"softmax_cross_entropy requires K >= 2 classes, got {k}")
    row_sums = targets.sum(axis=1)
    if not np.allclose(row_sums, 1.0, atol=1e-6):
        worst = int(np.argmax(np.abs(row_sums - 1.0)))
        raise ShapeError(
            f"target row {worst} sums to {row_sums[worst]!r}, expected 1 within 1e-6"
        )
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    out = -(targets * log_probs).sum() / b

    def rule(g):
        scale = float(g.reshape(())) / b
        return ((np.exp(log_probs) - targets) * scale,)

    return _record(np.asarray(out), (logits,), rule)


def mean_tokens(x: Tensor) -> Tensor:
    """Mean over the token axis: ``[B, N, C] -> [B, C]``."""
    x = _as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"mean_tokens expects a [B, N, C] tensor, got {x.shape}")
    n = x.shape[1]
    out = x.data.mean(axis=1)

    def rule(g):
        return (np.repeat(g[:, None, :], n, axis=1) / n,)

    return _record(out, (x,), rule)


def sum_all(x: Tensor) -> Tensor:
    """Sum of all entries as a scalar tensor."""
    x = _as_tensor(x)

    def rule(g):
        return (np.full(x.shape, float(g.reshape(())), dtype=x.dtype),)

    return _record(np.asarray(x.data.sum()), (x,), rule)


def extract_patches(images: Tensor, patch_size: int) -> Tensor:
    """Cut ``[B, ch, H, W]`` into non-overlapping square patches.

    Output is ``[B, N, ch*p*p]`` with tokens in raster order of the patch
    grid and each patch flattened channel-major (channel varies slowest).
    """
    images = _as_tensor(images)
    if images.ndim != 4:
        raise ShapeError(f"extract_patches expects [B, ch, H, W], got {images.shape}")
    b, ch, h, w = images.shape
    p = patch_size
    if h != w or h % p != 0:
        raise ShapeError(
            f"image size {h}x{w} is not divisible into {p}x{p} patches"
        )
    g = h // p
    out = (
        images.data.reshape(b, ch, g, p, g, p)
        .transpose(0, 2, 4, 1, 3, 5)
        .reshape(b, g * g, ch * p * p)
    )

    def rule(grad):
        return (
            grad.reshape(b, g, g, ch, p, p)
            .transpose(0, 3, 1, 4, 2, 5)
            .reshape(b, ch, h, w),
        )

    return _record(out, (images,), rule)


def finite_diff_grad(f, x: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar-valued function of ``x``.

    Independent test oracle: evaluates ``f`` at ``x +- h*e_i`` per coordinate
    and never touches the tape.
    """
    if h <= 0:
        raise ValueError("finite difference step must be positive")
    base = x.data.copy()
    grad = np.zeros_like(base, dtype=np.float64)
    flat = base.reshape(-1)
    out = grad.reshape(-1)

    def evaluate(values):
        probe = Tensor(values.reshape(base.shape), requires_grad=False)
        with no_grad():
            result = f(probe)
        return result.item() if isinstance(result, Tensor) else float(result)

    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        upper = evaluate(base)
        flat[i] = orig - h
        lower = evaluate(base)
        flat[i] = orig
        out[i] = (upper - lower) / (2.0 * h)
    return grad
