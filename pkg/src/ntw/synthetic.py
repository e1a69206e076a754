"""Synthetic alignment problems used by the examples and the acceptance suite."""

from __future__ import annotations

import numpy as np

from ntw.interp import TimeSeries


def gaussian_bump(T: int, center: float, width: float = 5.0) -> np.ndarray:
    t = np.arange(T + 1)
    return np.exp(-0.5 * ((t - center) / width) ** 2)


def shifted_bumps(T: int = 64, shift: int = 8, width: float = 5.0) -> list:
    """Two copies of one bump, the second delayed by ``shift`` samples."""
    c = T / 2 - shift / 2
    return [TimeSeries(gaussian_bump(T, c, width)), TimeSeries(gaussian_bump(T, c + shift, width))]


def random_time_warp(T_out: int, strength: float, rng) -> np.ndarray:
    """Smooth increasing map of ``[0, 1]`` onto itself sampled at ``T_out + 1`` points."""
    u = np.linspace(0.0, 1.0, T_out + 1)
    k = np.arange(1, 4)
    coef = rng.uniform(-1, 1, size=k.size) * strength / (np.pi * k)
    # derivative 1 + sum a_k cos(pi k u) stays positive for strength < 1
    return u + np.sum(coef[:, None] * np.sin(np.pi * k[:, None] * u[None, :]) / k.size, axis=0)


def _template(rng, n_bumps: int) -> callable:
    centers = rng.uniform(0.15, 0.85, size=n_bumps)
    widths = rng.uniform(0.03, 0.08, size=n_bumps)
    heights = rng.uniform(0.5, 1.5, size=n_bumps) * rng.choice([-1, 1], size=n_bumps)

    def f(u):
        u = np.asarray(u)[..., None]
        return np.sum(heights * np.exp(-0.5 * ((u - centers) / widths) ** 2), axis=-1)

    return f


def class_set(n_series: int = 20, max_T: int = 128, seed: int = 0, ragged: bool = True,
              noise: float = 0.02, warp_strength: float = 0.6) -> list:
    """One synthetic "class": a common template seen through random smooth warps.

    Lengths vary in ``[3/4 max_T, max_T]`` when ``ragged``.
    """
    rng = np.random.default_rng(seed)
    f = _template(rng, int(rng.integers(2, 5)))
    out = []
    for i in range(n_series):
        T = int(rng.integers(3 * max_T // 4, max_T + 1)) if ragged else max_T
        u = random_time_warp(T, warp_strength, rng)
        x = f(u) + noise * rng.standard_normal(T + 1)
        out.append(TimeSeries(x, label=seed, name=f"synthetic{seed}:{i}"))
    return out


def two_frequency_set(n_series: int = 4, T: int = 64, seed: int = 0, ripple: float = 0.5,
                      period: float = 6.0, max_shift: float = 10.0) -> list:
    """Slow bump plus a fast ripple that travels with it, each series time-shifted.

    The ripple creates many shallow optima where only ripple peaks are matched.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(T + 1)
    out = []
    for i in range(n_series):
        shift = rng.uniform(-max_shift, max_shift)
        tt = t - T / 2 - shift
        envelope = np.exp(-0.5 * (tt / (T / 8)) ** 2)
        x = envelope * (1.0 + ripple * np.sin(2 * np.pi * tt / period))
        out.append(TimeSeries(x, label=seed, name=f"twofreq{seed}:{i}"))
    return out
