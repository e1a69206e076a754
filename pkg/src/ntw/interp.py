"""Band-limited evaluation of sampled series at continuous positions.

The kernel is the normalized sinc stretched by an annealing width ``alpha``::

    k(u; alpha) = sin(pi u / alpha) / (pi u / alpha) / alpha

For ``alpha == 1`` this is the ordinary interpolation kernel; larger widths
low-pass the interpolant so that only slow components survive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numba
import numpy as np

# TBB shipped with some distributions is too old for numba; workqueue is always present
numba.config.THREADING_LAYER = "workqueue"

# below this |u/alpha| the kernel derivative is evaluated from its Taylor series
_SERIES_CUTOFF = 1e-3


@dataclass(frozen=True)
class TimeSeries:
    """One input sequence ``x^(0) .. x^(T)``."""

    values: np.ndarray
    label: Optional[int] = None
    name: Optional[str] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError(f"series must be one-dimensional, got shape {values.shape}")
        if values.size < 2:
            raise ValueError(f"series needs at least 2 samples, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("series contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> int:
        """Index of the last sample (length minus one)."""
        return self.values.size - 1

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class AnnealState:
    alpha: float = 100.0
    decay: float = 0.99
    floor: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.decay <= 1.0):
            raise ValueError(f"decay must lie in (0, 1], got {self.decay}")
        if not math.isfinite(self.alpha) or self.alpha < self.floor:
            raise ValueError(f"alpha must be finite and >= {self.floor}, got {self.alpha}")


def anneal_step(state: AnnealState) -> AnnealState:
    """Shrink the kernel width once, never going below the floor."""
    return replace(state, alpha=max(state.alpha * state.decay, state.floor))


def _check_alpha(alpha) -> None:
    if not np.all(np.isfinite(alpha)):
        raise ValueError(f"alpha must be finite, got {alpha}")
    if np.any(np.asarray(alpha) < 1.0):
        raise ValueError(f"alpha must be >= 1, got {alpha}")


def _sincos_pi(v):
    """Return ``sin(pi v)``, ``cos(pi v)`` with exact zeros at integers / half-integers."""
    n = np.round(v)
    r = v - n
    sign = 1.0 - 2.0 * np.mod(n, 2.0)
    return sign * np.sin(np.pi * r), sign * np.cos(np.pi * r)


def _kernel_parts(u, alpha):
    v = np.asarray(u, dtype=np.float64) / alpha
    sin_pv, cos_pv = _sincos_pi(v)
    zero = v == 0.0
    safe_v = np.where(zero, 1.0, v)
    sinc = np.where(zero, 1.0, sin_pv / (np.pi * safe_v))
    return v, sinc, cos_pv


def sinc_kernel(t, alpha=1.0):
    """Annealed sinc kernel ``k(t; alpha)``; vectorizes over ``t``."""
    if not np.all(np.isfinite(t)):
        raise ValueError("kernel argument must be finite")
    _check_alpha(alpha)
    _, sinc, _ = _kernel_parts(t, alpha)
    out = sinc / alpha
    return float(out) if np.ndim(out) == 0 else out


def sinc_kernel_grad(t, alpha=1.0):
    """Derivative of :func:`sinc_kernel` with respect to ``t`` (0 at ``t == 0``)."""
    if not np.all(np.isfinite(t)):
        raise ValueError("kernel argument must be finite")
    _check_alpha(alpha)
    out = _kernel_grad(np.asarray(t, dtype=np.float64), alpha)
    return float(out) if np.ndim(out) == 0 else out


def _kernel_grad(u, alpha):
    v, sinc, cos_pv = _kernel_parts(u, alpha)
    small = np.abs(v) < _SERIES_CUTOFF
    safe_v = np.where(small, 1.0, v)
    direct = (cos_pv - sinc) / safe_v
    # (cos(pi v) - sinc v) / v expanded around 0
    a = (np.pi * v) ** 2
    series = v * np.pi**2 * (-1.0 / 3.0 + a / 30.0 - a * a / 840.0)
    return np.where(small, series, direct) / (alpha * alpha)


def _as_values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return TimeSeries(series).values


def interpolate(series, t_prime, alpha=1.0):
    """Evaluate the band-limited interpolant at normalized position(s) ``t_prime``.

    ``t_prime = 0`` maps to the first sample and ``t_prime = 1`` to the last.
    """
    x = _as_values(series)
    if not np.all(np.isfinite(t_prime)):
        raise ValueError("t_prime must be finite")
    _check_alpha(alpha)
    T = x.size - 1
    tp = np.asarray(t_prime, dtype=np.float64)
    u = np.arange(T + 1) - tp[..., None] * T
    _, sinc, _ = _kernel_parts(u, alpha)
    out = (sinc / alpha) @ x
    return float(out) if np.ndim(out) == 0 else out


def interpolate_grad(series, t_prime, alpha=1.0):
    """Derivative of :func:`interpolate` with respect to ``t_prime``."""
    x = _as_values(series)
    if not np.all(np.isfinite(t_prime)):
        raise ValueError("t_prime must be finite")
    _check_alpha(alpha)
    T = x.size - 1
    tp = np.asarray(t_prime, dtype=np.float64)
    u = np.arange(T + 1) - tp[..., None] * T
    out = -T * (_kernel_grad(u, alpha) @ x)
    return float(out) if np.ndim(out) == 0 else out


@numba.njit(cache=True)
def _sincospi_scalar(x):
    n = np.round(x)
    r = x - n
    sign = 1.0 - 2.0 * (n - 2.0 * np.floor(n / 2.0))
    return sign * math.sin(math.pi * r), sign * math.cos(math.pi * r)


@numba.njit(cache=True, parallel=True)
def _interp_kernel(values, lengths, tau, alpha, with_grad):
    G, N = tau.shape
    L = values.shape[1]
    st = np.empty(L)
    ct = np.empty(L)
    for t in range(L):
        st[t], ct[t] = _sincospi_scalar(t / alpha)
    y = np.zeros((G, N))
    dy = np.zeros((G, N))
    pi2 = math.pi * math.pi
    for g in numba.prange(G):
        for i in range(N):
            T = lengths[i]
            c = tau[g, i] * T
            sa, ca = _sincospi_scalar(c / alpha)
            acc = 0.0
            dacc = 0.0
            for t in range(T + 1):
                v = (t - c) / alpha
                if abs(v) < _SERIES_CUTOFF:
                    a = pi2 * v * v
                    sinc = 1.0 - a / 6.0 + a * a / 120.0 - a * a * a / 5040.0
                    dk = v * pi2 * (-1.0 / 3.0 + a / 30.0 - a * a / 840.0)
                else:
                    # sin/cos of pi (t - c) / alpha by angle addition
                    sv = st[t] * ca - ct[t] * sa
                    cv = ct[t] * ca + st[t] * sa
                    sinc = sv / (math.pi * v)
                    dk = (cv - sinc) / v
                acc += values[i, t] * sinc
                dacc += values[i, t] * dk
            y[g, i] = acc / alpha
            if with_grad:
                dy[g, i] = -T * dacc / (alpha * alpha)
    return y, dy


def interpolate_many(values: np.ndarray, lengths: np.ndarray, tau: np.ndarray, alpha: float,
                     with_grad: bool = True):
    """Batched interpolation for the training loop.

    Parameters
    ----------
    values : (N, L) array
        Series padded on the right; only the first ``T_i + 1`` entries of row
        ``i`` are read.
    lengths : (N,) int array
        ``T_i`` for each series (last valid index).
    tau : (G, N) array
        Normalized positions, one column per series.

    Returns
    -------
    y : (G, N) array of interpolated values
    dy : (G, N) array of d y / d tau, or None
    """
    _check_alpha(alpha)
    if not np.all(np.isfinite(tau)):
        raise ValueError("warp positions must be finite")
    y, dy = _interp_kernel(np.ascontiguousarray(values, dtype=np.float64),
                           np.ascontiguousarray(lengths, dtype=np.int64),
                           np.ascontiguousarray(tau, dtype=np.float64), float(alpha), with_grad)
    return y, (dy if with_grad else None)
