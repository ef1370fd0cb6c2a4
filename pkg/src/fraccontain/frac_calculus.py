"""Fractional calculus numerics.

Mittag-Leffler series, Grunwald-Letnikov weights, Riemann-Liouville
fractional integrals and an Adams-Bashforth-Moulton (ABM) predictor-corrector
for Caputo equations ``D^alpha x = f(x)`` with ``0 < alpha <= 1``.

The ABM solver keeps the full memory of past field values. The history
convolution is exact, but past blocks of power-of-two size are folded into
future steps with FFTs, so a run of N steps costs O(N log^2 N) instead of
O(N^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import fft as sp_fft

from .errors import ArgumentError, DivergenceError, NumericFailure

ML_TOLERANCE = 1e-12
ML_MAX_TERMS = 500
ML_MAX_ABS_ARG = 30.0


@dataclass(frozen=True)
class FracOrder:
    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a <= 1.0) or not math.isfinite(a):
            raise ArgumentError(f"fractional order must lie in (0, 1], got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    def __float__(self):
        return self.alpha


def as_order(order) -> FracOrder:
    return order if isinstance(order, FracOrder) else FracOrder(order)


@dataclass(frozen=True)
class MemoryKernel:
    """Grunwald-Letnikov convolution weights of a fractional operator."""

    weights: np.ndarray
    order: FracOrder
    step: float = 1.0


@dataclass(frozen=True)
class FdeSolution:
    times: np.ndarray
    values: np.ndarray
    order: FracOrder

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]


# --------------------------------------------------------------------------
# Mittag-Leffler function


def mittag_leffler(alpha, beta, z, tol=ML_TOLERANCE, max_terms=ML_MAX_TERMS):
    """Two-parameter Mittag-Leffler function ``E_{alpha,beta}(z)`` for real z.

    Sums ``z**k / Gamma(alpha*k + beta)`` in extended precision. The working
    precision is raised to cover the largest term so that the alternating
    series for negative ``z`` does not lose digits to cancellation.
    Summation stops once a term is below ``tol`` and the terms are decreasing.

    Raises
    ------
    ArgumentError
        ``alpha <= 0``, ``beta <= 0``, non-finite ``z`` or ``|z| > 30``.
    NumericFailure
        The stopping rule was not met within ``max_terms`` terms.
    """
    alpha = float(alpha)
    beta = float(beta)
    z = float(z)
    if not (alpha > 0 and beta > 0):
        raise ArgumentError("mittag_leffler requires alpha > 0 and beta > 0")
    if not math.isfinite(z):
        raise ArgumentError("mittag_leffler requires a finite argument")
    if abs(z) > ML_MAX_ABS_ARG:
        raise ArgumentError(f"|z| > {ML_MAX_ABS_ARG} is outside the supported series domain")
    if z == 0.0:
        return 1.0 / math.gamma(beta)

    log_z = math.log10(abs(z))
    peak = max(k * log_z - math.lgamma(alpha * k + beta) / math.log(10) for k in range(max_terms))
    dps = 20 + max(0, int(math.ceil(peak)))

    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        total = mpmath.mpf(0)
        prev = None
        for k in range(max_terms):
            term = zz**k * mpmath.rgamma(alpha * k + beta)
            total += term
            mag = abs(term)
            if prev is not None and mag < tol and mag < prev:
                return float(total)
            prev = mag
        partial = float(total)
    raise NumericFailure(
        f"Mittag-Leffler series did not converge in {max_terms} terms "
        f"(alpha={alpha}, beta={beta}, z={z})",
        partial_sum=partial,
        terms=max_terms,
    )


# --------------------------------------------------------------------------
# Grunwald-Letnikov weights and fractional integrals


def gl_weights(order, count: int, step: float = 1.0) -> MemoryKernel:
    """``count`` Grunwald-Letnikov weights ``w_k = w_{k-1} (1 - (alpha+1)/k)``."""
    order = as_order(order)
    if int(count) < 1:
        raise ArgumentError("count must be >= 1")
    k = np.arange(1, int(count), dtype=float)
    factors = 1.0 - (order.alpha + 1.0) / k
    weights = np.concatenate(([1.0], np.cumprod(factors)))
    return MemoryKernel(weights=weights, order=order, step=float(step))


def _predictor_kernel(alpha, n):
    # lag m >= 1: m^a - (m-1)^a, written with expm1 to avoid cancellation
    ker = np.zeros(n + 1)
    if n >= 1:
        ker[1] = 1.0
    if n >= 2:
        m = np.arange(2, n + 1, dtype=float)
        ker[2:] = -(m**alpha) * np.expm1(alpha * np.log1p(-1.0 / m))
    return ker


def _corrector_kernel(alpha, n):
    # lag m >= 1: (m+1)^p + (m-1)^p - 2 m^p with p = a + 1
    p = alpha + 1.0
    ker = np.zeros(n + 1)
    if n >= 1:
        ker[1] = 2.0**p - 2.0
    if n >= 2:
        m = np.arange(2, n + 1, dtype=float)
        ker[2:] = m**p * (np.expm1(p * np.log1p(1.0 / m)) + np.expm1(p * np.log1p(-1.0 / m)))
    return ker


def _corrector_start_weight(alpha, i):
    """Trapezoidal product-integration weight of ``f_0`` for target index ``i``."""
    n = i - 1
    if n == 0:
        return alpha
    return n**alpha * (alpha - (n - alpha) * math.expm1(alpha * math.log1p(1.0 / n)))


def fractional_integral(samples, order, step) -> float:
    """Riemann-Liouville integral of order ``alpha`` over ``[0, t_end]``.

    ``samples`` are values of f on a uniform grid starting at 0, so
    ``t_end = (len(samples) - 1) * step``. Uses product-trapezoidal
    quadrature (exact for piecewise-linear f).
    """
    order = as_order(order)
    f = np.asarray(samples, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise ArgumentError("samples must be a nonempty 1-d sequence")
    if not step > 0:
        raise ArgumentError("step must be positive")
    n = f.size - 1
    if n == 0:
        return 0.0
    a = order.alpha
    ker = _corrector_kernel(a, n)
    w = np.empty(n + 1)
    w[0] = _corrector_start_weight(a, n)
    w[1:n] = ker[n - 1:0:-1]
    w[n] = 1.0
    return float(step**a / math.gamma(a + 2.0) * np.dot(w, f))


# --------------------------------------------------------------------------
# ABM predictor-corrector


class _LagConvolution:
    """Online sums ``S_i = sum_{j<i} ker[i - j] F[j]`` for a stack of kernels.

    Pairs ``(j, i)`` inside one aligned block of ``block`` steps are summed
    directly. Every other pair is covered exactly once by a source block of
    size ``s = 2^l`` ending at ``p - 1`` (``p/s`` odd) whose contribution to
    targets ``[p, p + s)`` is added by one FFT as soon as the block completes.
    """

    def __init__(self, kernels, dim, block=64):
        self.kernels = np.ascontiguousarray(kernels)
        self.n = self.kernels.shape[1] - 1
        self.block = block
        self.F = np.zeros((self.n + 1, dim))
        self.acc = np.zeros((self.kernels.shape[0], self.n + 1, dim))
        self._spectra = {}

    def _spectrum(self, s):
        spec = self._spectra.get(s)
        if spec is None:
            ker = np.zeros((self.kernels.shape[0], 2 * s))
            top = min(2 * s, self.n + 1)
            ker[:, :top] = self.kernels[:, :top]
            spec = sp_fft.rfft(ker, axis=1)
            self._spectra[s] = spec
        return spec

    def push(self, j, f):
        self.F[j] = f
        p = j + 1
        if p % self.block or p > self.n:
            return
        s = p & -p
        end = min(p + s, self.n + 1)
        fs = sp_fft.rfft(self.F[p - s:p], n=2 * s, axis=0)
        conv = sp_fft.irfft(self._spectrum(s)[:, :, None] * fs[None], n=2 * s, axis=1)
        self.acc[:, p:end] += conv[:, s:s + end - p]

    def sums(self, i):
        start = (i // self.block) * self.block
        out = self.acc[:, i].copy()
        if i > start:
            out += self.kernels[:, i - start:0:-1] @ self.F[start:i]
        return out


class _WindowedConvolution:
    """Short-memory variant: only the last ``window`` field values are kept."""

    def __init__(self, kernels, dim, window):
        self.kernels = np.ascontiguousarray(kernels)
        self.n = self.kernels.shape[1] - 1
        self.window = int(window)
        self.F = np.zeros((self.n + 1, dim))

    def push(self, j, f):
        self.F[j] = f

    def sums(self, i):
        lo = max(0, i - self.window)
        return self.kernels[:, i - lo:0:-1] @ self.F[lo:i]


class AbmIntegrator:
    """Stepper for ``D^alpha x = f(x)`` (Caputo, zero pre-history).

    Usage per step ``i = 1..steps``::

        y_pred = integ.predict(i)
        y = integ.correct(i, field(y_pred))
        integ.commit(i, field(y))

    ``commit(0, field(x0))`` must be called first. Splitting the step lets the
    caller inspect the predicted and corrected states (e.g. barrier checks).
    """

    def __init__(self, order, step, steps, x0, memory_window=None):
        self.order = as_order(order)
        if not step > 0:
            raise ArgumentError("step must be positive")
        if int(steps) < 1:
            raise ArgumentError("steps must be >= 1")
        if memory_window is not None and int(memory_window) < 1:
            raise ArgumentError("memory_window must be a positive integer")
        a = self.order.alpha
        self.step = float(step)
        self.steps = int(steps)
        self.x0 = np.array(x0, dtype=float).reshape(-1)
        self._pred_coef = self.step**a / math.gamma(a + 1.0)
        self._corr_coef = self.step**a / math.gamma(a + 2.0)
        kernels = np.stack([_predictor_kernel(a, self.steps), _corrector_kernel(a, self.steps)])
        self._corr_kernel = kernels[1]
        dim = self.x0.size
        if memory_window is None:
            self._conv = _LagConvolution(kernels, dim)
        else:
            self._conv = _WindowedConvolution(kernels, dim, memory_window)
        self._window = memory_window
        self._sums = None

    def predict(self, i):
        s = self._conv.sums(i)
        self._sums = (i, s)
        return self.x0 + self._pred_coef * s[0]

    def correct(self, i, f_pred):
        idx, s = self._sums
        if idx != i:
            raise ArgumentError("correct() must follow predict() for the same step")
        total = s[1] + f_pred
        if self._window is None or i <= self._window:
            total = total + (_corrector_start_weight(self.order.alpha, i) - self._corr_kernel[i]) * self._conv.F[0]
        return self.x0 + self._corr_coef * total

    def commit(self, i, f):
        self._conv.push(i, f)


def solve_caputo_fde(field, x0, order, step, steps, memory_window=None) -> FdeSolution:
    """Solve ``D^alpha x = field(x)``, ``x(0) = x0`` on a uniform grid.

    ``field`` maps a 1-d state array to an array of the same shape. It must
    be locally Lipschitz in the visited region; this is not checked.

    Raises
    ------
    DivergenceError
        A non-finite state or field value appears; ``.step`` is its index.
    """
    order = as_order(order)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float)).reshape(-1)
    integ = AbmIntegrator(order, step, steps, x0, memory_window=memory_window)
    values = np.empty((integ.steps + 1, x0.size))
    values[0] = x0

    def evaluate(x, i):
        fx = np.asarray(field(x), dtype=float).reshape(x0.shape)
        if not np.all(np.isfinite(fx)):
            raise DivergenceError(f"non-finite field value at step {i}", step=i)
        return fx

    integ.commit(0, evaluate(x0, 0))
    for i in range(1, integ.steps + 1):
        y_pred = integ.predict(i)
        y = integ.correct(i, evaluate(y_pred, i))
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite state at step {i}", step=i)
        values[i] = y
        integ.commit(i, evaluate(y, i))
    times = np.arange(integ.steps + 1) * integ.step
    return FdeSolution(times=times, values=values, order=order)
