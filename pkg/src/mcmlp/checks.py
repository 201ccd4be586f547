"""Transform verification suites and the timing bench.

These drive the ``check-transforms`` and ``bench`` CLI subcommands and are
reused directly by the test suite.  Every fast path is compared against an
independent reference: direct cosine summation for the DCT, dense Sylvester
matrix products for the Walsh-Hadamard side, and central finite differences
for the gradient rules.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError
from .transforms import (
    dct1d_fast,
    dct1d_naive,
    dct1d_transpose,
    dct2d,
    dct2d_array,
    dct_matrix,
    fwht,
    get_plan,
    hadamard2d,
    hadamard2d_array,
    hadamard_matrix,
)
from .validation import require_power_of_two

DEFAULT_SIZES_1D = (2, 4, 8, 16, 32, 64, 128, 256, 512, 1024)
DEFAULT_SIZES_2D = (2, 4, 8, 16, 32, 64)
ORACLE_TOL = 1e-9
GRAD_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.value <= self.tolerance

    def line(self) -> str:
        status = "ok  " if self.passed else "FAIL"
        return f"[{status}] {self.name:<44s} max_err={self.value:.3e}  tol={self.tolerance:.0e}"


def dct2d_double_sum(x: np.ndarray) -> np.ndarray:
    """Direct quadruple-loop 2-D DCT of one matrix (the slow ground truth)."""
    n, c = x.shape
    rows = np.arange(n)
    cols = np.arange(c)
    out = np.zeros((n, c))
    for u in range(n):
        cu = math.sqrt(1.0 / n) if u == 0 else math.sqrt(2.0 / n)
        cos_u = np.cos((rows + 0.5) * math.pi * u / n)
        for v in range(c):
            cv = math.sqrt(1.0 / c) if v == 0 else math.sqrt(2.0 / c)
            cos_v = np.cos((cols + 0.5) * math.pi * v / c)
            out[u, v] = cu * cv * float(cos_u @ x @ cos_v)
    return out


def gradient_max_rel_error(f, x0: np.ndarray, h: float = 1e-5) -> float:
    """Compare reverse-mode and central-difference gradients of a scalar
    function of one array; returns the max elementwise relative error
    (denominator floored at 1e-6 to keep zero-gradient coordinates finite).

    Always evaluates in float64 regardless of the ambient precision mode.
    """
    with ag.precision(np.float64):
        x = Tensor(np.asarray(x0, dtype=np.float64), requires_grad=True)
        loss = f(x)
        ag.backward(loss)
        fd = ag.finite_diff_grad(f, Tensor(np.asarray(x0, dtype=np.float64)), h)
    denom = np.maximum(np.abs(fd), 1e-6)
    return float(np.max(np.abs(x.grad - fd) / denom))


def _weighted_sum(weights: np.ndarray):
    def f(t: Tensor) -> Tensor:
        return ag.sum_all(ag.mul(t, Tensor(weights)))
    return f


def run_transform_checks(
    sizes: tuple[int, ...] = DEFAULT_SIZES_1D,
    sizes_2d: tuple[int, ...] = DEFAULT_SIZES_2D,
    trials: int = 1000,
    seed: int = 0,
) -> list[CheckResult]:
    """All transform-vs-oracle, structural and gradient checks."""
    rng = np.random.default_rng(seed)
    results: list[CheckResult] = []

    err_fast = err_transpose = err_norm = err_roundtrip = err_linear = 0.0
    for n in sizes:
        require_power_of_two(n, "size")
        plan = get_plan(n)
        x = rng.uniform(-1.0, 1.0, size=(trials, n))
        fast = dct1d_fast(plan, x)
        err_fast = max(err_fast, float(np.abs(fast - dct1d_naive(x)).max()))
        d = dct_matrix(n)
        g = rng.uniform(-1.0, 1.0, size=(trials, n))
        err_transpose = max(
            err_transpose, float(np.abs(dct1d_transpose(plan, g) - g @ d).max())
        )
        err_roundtrip = max(
            err_roundtrip, float(np.abs(dct1d_transpose(plan, fast) - x).max())
        )
        norms = np.linalg.norm(fast, axis=-1) - np.linalg.norm(x, axis=-1)
        err_norm = max(err_norm, float(np.abs(norms).max()))
        a, b = rng.uniform(-2, 2, size=2)
        y = rng.uniform(-1.0, 1.0, size=(trials, n))
        lin = dct1d_fast(plan, a * x + b * y) - (a * fast + b * dct1d_fast(plan, y))
        err_linear = max(err_linear, float(np.abs(lin).max()))
    results.append(CheckResult("dct1d fast vs direct summation", err_fast, ORACLE_TOL))
    results.append(CheckResult("dct1d transpose vs explicit matrix", err_transpose, ORACLE_TOL))
    results.append(CheckResult("dct1d transpose(fast(x)) == x", err_roundtrip, ORACLE_TOL))
    results.append(CheckResult("dct1d norm preservation", err_norm, ORACLE_TOL))
    results.append(CheckResult("dct1d linearity", err_linear, ORACLE_TOL))

    err_fwht = err_involution = err_fwht_lin = 0.0
    for n in sizes:
        h = hadamard_matrix(n)
        x = rng.integers(-50, 50, size=(min(trials, 200), n)).astype(np.int64)
        err_fwht = max(err_fwht, float(np.abs(fwht(x) - x @ h).max()))
        err_involution = max(err_involution, float(np.abs(fwht(fwht(x)) - n * x).max()))
        xf = rng.uniform(-1.0, 1.0, size=(trials, n))
        yf = rng.uniform(-1.0, 1.0, size=(trials, n))
        a, b = rng.uniform(-2, 2, size=2)
        lin = fwht(a * xf + b * yf) - (a * fwht(xf) + b * fwht(yf))
        err_fwht_lin = max(err_fwht_lin, float(np.abs(lin).max()))
    results.append(CheckResult("fwht vs dense Sylvester matrix", err_fwht, 0.0))
    results.append(CheckResult("fwht involution (N * identity)", err_involution, 0.0))
    results.append(CheckResult("fwht linearity", err_fwht_lin, ORACLE_TOL))

    err_h2d = 0.0
    err_d2d = 0.0
    n_2d_trials = max(1, trials // 10)
    for n in sizes_2d:
        for c in sizes_2d:
            x = rng.uniform(-1.0, 1.0, size=(n_2d_trials, n, c))
            hn = hadamard_matrix(n).astype(np.float64)
            hc = hadamard_matrix(c).astype(np.float64)
            ref = np.einsum("ij,bjk,kl->bil", hn, x, hc) / (n * c)
            err_h2d = max(err_h2d, float(np.abs(hadamard2d_array(x) - ref).max()))
            dn, dc = dct_matrix(n), dct_matrix(c)
            ref = np.einsum("ui,bij,vj->buv", dn, x, dc)
            err_d2d = max(err_d2d, float(np.abs(dct2d_array(x) - ref).max()))
    results.append(CheckResult("hadamard2d vs dense H X H / (N C)", err_h2d, 1e-10))
    results.append(CheckResult("dct2d vs dense separable oracle", err_d2d, ORACLE_TOL))

    x = rng.uniform(-1.0, 1.0, size=(8, 8))
    err = float(np.abs(dct2d_array(x) - dct2d_double_sum(x)).max())
    results.append(CheckResult("dct2d vs direct double summation (8x8)", err, ORACLE_TOL))

    ones = np.ones((4, 4))
    target = np.zeros((4, 4))
    target[0, 0] = 1.0
    err = float(np.abs(hadamard2d_array(ones) - target).max())
    results.append(CheckResult("hadamard2d of all-ones 4x4 == E00", err, 0.0))

    h2 = hadamard_matrix(2)
    err = float(np.abs(h2 - np.array([[1, 1], [1, -1]])).max())
    results.append(CheckResult("second-order Hadamard matrix exact", err, 0.0))

    grad_err = 0.0
    for shape in ((4, 8), (8, 4), (16, 2)):
        w = rng.uniform(-1.0, 1.0, size=shape)
        x0 = rng.uniform(-1.0, 1.0, size=shape)
        grad_err = max(grad_err, gradient_max_rel_error(
            lambda t: ag.sum_all(ag.mul(dct2d(t), Tensor(w))), x0))
        grad_err = max(grad_err, gradient_max_rel_error(
            lambda t: ag.sum_all(ag.mul(hadamard2d(t), Tensor(w))), x0))
    results.append(CheckResult("transform gradients vs finite differences", grad_err, GRAD_TOL))

    return results


# ---------------------------------------------------------------------------
# Timing bench


def bench_transform(
    op: str,
    sizes: tuple[int, ...],
    trials: int = 20,
    naive: bool = False,
    seed: int = 0,
) -> list[dict]:
    """Median per-transform nanoseconds over ``trials`` runs, plus the
    time ratio between consecutive sizes.

    ``naive=True`` times the dense O(N^2) reference instead of the fast
    path; it materializes an N x N matrix, so sizes are capped at 8192.
    """
    if op not in ("dct", "fwht"):
        raise ConfigError(f"unknown bench op {op!r}; expected 'dct' or 'fwht'")
    rng = np.random.default_rng(seed)
    rows: list[dict] = []
    previous = None
    for n in sizes:
        require_power_of_two(n, "size")
        if naive and n > 8192:
            raise ConfigError(
                f"naive path at N={n} would need an {n}x{n} dense matrix; "
                "use sizes <= 8192"
            )
        x = rng.uniform(-1.0, 1.0, size=n)
        if op == "dct":
            if naive:
                d = dct_matrix(n)
                fn = lambda: x @ d.T
            else:
                plan = get_plan(n)
                fn = lambda: dct1d_fast(plan, x)
        else:
            if naive:
                h = hadamard_matrix(n).astype(np.float64)
                fn = lambda: x @ h
            else:
                fn = lambda: fwht(x)
        for _ in range(3):
            fn()
        samples = []
        for _ in range(max(1, trials)):
            t0 = time.perf_counter_ns()
            fn()
            samples.append(time.perf_counter_ns() - t0)
        ns = float(np.median(samples))
        ratio = ns / previous if previous else None
        rows.append({"size": n, "ns": ns, "ratio": ratio})
        previous = ns
    return rows
