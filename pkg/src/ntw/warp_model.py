"""Continuous warping model, its sampled (discrete) form, and feasibility scores.

All N warps share one parameterization::

    tau(s) = s e_1 + s (S - s) sum_k phi_k(s) e_{k+1},     S = sqrt(N)

where ``e_1 = 1/sqrt(N)`` and ``e_2 .. e_N`` complete an orthonormal basis.
The envelope pins ``tau(0) = 0`` and ``tau(S) = 1`` for every series, and the
components of the coefficient directions sum to zero, so the total increment
of all warps between two grid points is fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class WarpBasis:
    n_series: int
    vectors: np.ndarray  # (N, N), row k is e_{k+1}

    @property
    def complement(self) -> np.ndarray:
        """``(N, N-1)`` matrix whose columns are ``e_2 .. e_N``."""
        return self.vectors[1:].T


def build_basis(n_series: int) -> WarpBasis:
    """Orthonormal basis with ``e_1`` along the all-ones direction.

    ``e_2 .. e_N`` come from modified Gram-Schmidt on the standard basis
    vectors ``u_1 .. u_{N-1}``, processed in index order, each vector signed
    so its first nonzero component is positive.
    """
    N = int(n_series)
    if N < 2:
        raise ValueError(f"need at least 2 series, got {n_series}")
    vectors = np.zeros((N, N))
    vectors[0] = 1.0 / math.sqrt(N)
    for k in range(1, N):
        v = np.zeros(N)
        v[k - 1] = 1.0
        for j in range(k):
            v -= (vectors[j] @ v) * vectors[j]
        v /= np.linalg.norm(v)
        lead = v[np.flatnonzero(np.abs(v) > 1e-12)[0]]
        if lead < 0:
            v = -v
        vectors[k] = v
    vectors.setflags(write=False)
    return WarpBasis(N, vectors)


PhiFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ContinuousWarping:
    """A basis plus a coefficient function ``phi: s -> R^{N-1}``.

    ``phi`` receives a 1-D array of ``s`` values and returns an array of
    shape ``(len(s), N-1)``.
    """

    basis: WarpBasis
    phi: PhiFn

    @property
    def S(self) -> float:
        return math.sqrt(self.basis.n_series)

    def on_grid(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        return warping_from_coeffs(self.basis, s, self.phi(s))


def warping_from_coeffs(basis: WarpBasis, s: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Evaluate warps at grid ``s`` given coefficients ``coeffs[g] = phi(s[g])``.

    Returns a ``(G, N)`` array. The linear term is written as ``(s/S) 1_N``,
    equal to ``s e_1`` but exact at ``s = S``.
    """
    S = math.sqrt(basis.n_series)
    envelope = s * (S - s)
    return (s / S)[:, None] + envelope[:, None] * (coeffs @ basis.complement.T)


def eval_warping(w: ContinuousWarping, s: float) -> np.ndarray:
    """Normalized warp positions of all series at a single ``s`` in ``[0, S]``."""
    if not (0.0 <= s <= w.S):
        raise ValueError(f"s={s} outside [0, {w.S}]")
    return w.on_grid(np.array([float(s)]))[0]


def regular_grid(n_series: int, Z: int) -> np.ndarray:
    """``s_z = (z / Z) * sqrt(N)`` for ``z = 0 .. Z``; last point is exactly ``S``."""
    return np.arange(Z + 1) / Z * math.sqrt(n_series)


@dataclass(frozen=True)
class SampledWarping:
    tau: np.ndarray  # (N, Z+1) integer
    lengths: np.ndarray  # (N,) T_i

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=np.int64)
        lengths = np.asarray(self.lengths, dtype=np.int64)
        if tau.ndim != 2 or tau.shape[1] < 2:
            raise ValueError(f"tau must be (N, Z+1) with Z >= 1, got {tau.shape}")
        if lengths.shape != (tau.shape[0],):
            raise ValueError(f"lengths shape {lengths.shape} does not match tau rows {tau.shape[0]}")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "lengths", lengths)

    @property
    def n_series(self) -> int:
        return self.tau.shape[0]

    @property
    def Z(self) -> int:
        return self.tau.shape[1] - 1


def discretize(tau_cont: np.ndarray, lengths: Sequence[int]) -> SampledWarping:
    """Floor ``T_i * tau`` on a regular grid into integer indices.

    ``tau_cont`` has shape ``(Z+1, N)``. Indices are clamped to ``[0, T_i]``
    and the endpoints are pinned to ``0`` and ``T_i``.
    """
    T = np.asarray(lengths, dtype=np.int64)
    idx = np.floor(tau_cont.T * T[:, None])
    idx = np.clip(idx, 0, T[:, None]).astype(np.int64)
    idx[:, 0] = 0
    idx[:, -1] = T
    return SampledWarping(idx, T)


def sample_warping(w: ContinuousWarping, Z: int, lengths: Sequence[int]) -> SampledWarping:
    if Z < 1:
        raise ValueError(f"Z must be >= 1, got {Z}")
    if len(lengths) != w.basis.n_series:
        raise ValueError(f"expected {w.basis.n_series} lengths, got {len(lengths)}")
    if min(lengths) < 1:
        raise ValueError("lengths must be positive")
    s = regular_grid(w.basis.n_series, Z)
    return discretize(w.on_grid(s), lengths)


def check_feasibility(sw: SampledWarping) -> tuple[float, float, float]:
    """Fractions of steps/endpoints satisfying monotonicity, continuity, boundary.

    The boundary score is averaged over series so all three lie in ``[0, 1]``.
    """
    N, Z = sw.n_series, sw.Z
    steps = np.diff(sw.tau, axis=1)
    v_mono = np.count_nonzero(steps >= 0) / (N * Z)
    v_cont = np.count_nonzero(steps <= 1) / (N * Z)
    hits = np.count_nonzero(sw.tau[:, 0] == 0) + np.count_nonzero(sw.tau[:, -1] == sw.lengths)
    v_bound = 0.5 * hits / N
    return float(v_mono), float(v_cont), float(v_bound)


def min_feasible_resolution(lengths: Sequence[int]) -> int:
    """Smallest output resolution ``Z = N * max T_i`` at which continuity is guaranteed."""
    return len(lengths) * int(max(lengths))
