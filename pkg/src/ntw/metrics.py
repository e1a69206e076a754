"""DTW discrepancy, barycenter loss and warped mean / standard deviation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from ntw.interp import TimeSeries
from ntw.warp_model import SampledWarping, check_feasibility

METRIC_KEYS = (
    "barycenter_loss",
    "v_mono",
    "v_cont",
    "v_bound",
    "penalty_residual",
    "data_loss_final",
    "updates",
    "alpha_final",
)


@dataclass
class DtwResult:
    discrepancy: float
    path: Optional[list] = None


@numba.njit(cache=True)
def _dtw_table(a, b):
    n, m = a.size, b.size
    D = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            d = a[i] - b[j]
            cost = d * d
            if i == 0 and j == 0:
                D[i, j] = cost
            elif i == 0:
                D[i, j] = cost + D[i, j - 1]
            elif j == 0:
                D[i, j] = cost + D[i - 1, j]
            else:
                best = D[i - 1, j - 1]
                if D[i - 1, j] < best:
                    best = D[i - 1, j]
                if D[i, j - 1] < best:
                    best = D[i, j - 1]
                D[i, j] = cost + best
    return D


@numba.njit(cache=True)
def _dtw_cost(a, b):
    # two-row version of _dtw_table
    m = b.size
    prev = np.empty(m)
    cur = np.empty(m)
    for i in range(a.size):
        for j in range(m):
            d = a[i] - b[j]
            cost = d * d
            if i == 0 and j == 0:
                cur[j] = cost
            elif i == 0:
                cur[j] = cost + cur[j - 1]
            elif j == 0:
                cur[j] = cost + prev[j]
            else:
                best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
                if cur[j - 1] < best:
                    best = cur[j - 1]
                cur[j] = cost + best
        prev, cur = cur, prev
    return prev[m - 1]


def _values(x) -> np.ndarray:
    v = x.values if isinstance(x, TimeSeries) else np.asarray(x, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("dtw needs two non-empty one-dimensional series")
    return v


def _backtrack(D):
    i, j = D.shape[0] - 1, D.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            # ties prefer the diagonal
            moves = ((D[i - 1, j - 1], i - 1, j - 1), (D[i - 1, j], i - 1, j), (D[i, j - 1], i, j - 1))
            _, i, j = min(moves, key=lambda m: m[0])
        path.append((i, j))
    return path[::-1]


def dtw(a, b, return_path: bool = False) -> DtwResult:
    """Classic DTW with squared local cost and steps (1,0), (0,1), (1,1)."""
    a, b = _values(a), _values(b)
    if not return_path:
        return DtwResult(float(_dtw_cost(a, b)))
    D = _dtw_table(a, b)
    return DtwResult(float(D[-1, -1]), _backtrack(D))


def warped_average(aligned) -> np.ndarray:
    return np.asarray(aligned, dtype=np.float64).mean(axis=0)


def warped_std(aligned) -> np.ndarray:
    """Population (divide-by-N) standard deviation across aligned rows."""
    A = np.asarray(aligned, dtype=np.float64)
    # shift by the first row: exact zeros where all rows agree
    return (A - A[0]).std(axis=0)


def barycenter_loss(series, aligned) -> float:
    """Mean DTW discrepancy of each input to the per-index mean of the aligned rows,
    normalized by ``N * Z`` where ``Z + 1`` is the aligned length."""
    aligned = np.asarray(aligned, dtype=np.float64)
    N, Zp1 = aligned.shape
    if len(series) != N:
        raise ValueError(f"{len(series)} series but {N} aligned rows")
    mean = np.ascontiguousarray(aligned.mean(axis=0))
    total = sum(_dtw_cost(_values(x), mean) for x in series)
    return float(total / (N * (Zp1 - 1)))


def metrics_document(series, sw: SampledWarping, aligned, penalty_residual: float,
                     data_loss_final: float, updates: int, alpha_final: float) -> dict:
    v_mono, v_cont, v_bound = check_feasibility(sw)
    return {
        "barycenter_loss": barycenter_loss(series, aligned),
        "v_mono": v_mono,
        "v_cont": v_cont,
        "v_bound": v_bound,
        "penalty_residual": float(penalty_residual),
        "data_loss_final": float(data_loss_final),
        "updates": int(updates),
        "alpha_final": float(alpha_final),
    }
