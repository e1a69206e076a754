"""Alignment objective, monotonicity penalty, Adam, and the annealed solver."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ntw.interp import AnnealState, TimeSeries, anneal_step, interpolate_many
from ntw.warp_model import (
    ContinuousWarping,
    SampledWarping,
    WarpBasis,
    build_basis,
    check_feasibility,
    discretize,
    regular_grid,
    warping_from_coeffs,
)
from ntw.warp_net import (
    DEFAULT_HIDDEN,
    PARAM_NAMES,
    DivergenceError,
    WarpNet,
    backward,
    forward,
    forward_chunked,
    init_net,
)

logger = logging.getLogger(__name__)


@dataclass
class NtwConfig:
    updates: int = 1000
    learning_rate: float = 1e-4
    lam: float = 1000.0
    alpha0: float = 100.0
    alpha_decay: float = 0.99
    z_train: Optional[int] = None  # default: max T_i
    z_out: Optional[int] = None  # default: N * max T_i
    seed: int = 0
    hidden: tuple = DEFAULT_HIDDEN
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.updates < 1:
            raise ValueError("updates must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.alpha0 < 1:
            raise ValueError("alpha0 must be >= 1")
        if not (0 < self.alpha_decay <= 1):
            raise ValueError("alpha decay must lie in (0, 1]")
        if self.z_train is not None and self.z_train < 1:
            raise ValueError("z_train must be >= 1")
        if self.z_out is not None and self.z_out < 1:
            raise ValueError("z_out must be >= 1")


class Problem:
    """Series packed for batched evaluation (zero padded on the right)."""

    def __init__(self, series: Sequence[TimeSeries]):
        series = [s if isinstance(s, TimeSeries) else TimeSeries(s) for s in series]
        if len(series) < 2:
            raise ValueError(f"need at least 2 series, got {len(series)}")
        self.series = series
        self.N = len(series)
        self.lengths = np.array([s.T for s in series], dtype=np.int64)
        self.values = np.zeros((self.N, int(self.lengths.max()) + 1))
        for i, s in enumerate(series):
            self.values[i, : s.values.size] = s.values
        self.basis = build_basis(self.N)
        self.S = math.sqrt(self.N)

    @property
    def max_T(self) -> int:
        return int(self.lengths.max())


@dataclass
class ObjectiveValue:
    data_loss: float
    penalty: float
    total: float
    grads: Optional[dict] = None


def trapezoid_weights(Z: int) -> np.ndarray:
    w = np.ones(Z + 1)
    w[0] = w[-1] = 0.5
    return w


def _pairwise_sq(y):
    """Row-wise ``sum_i sum_j (y_i - y_j)^2`` and its gradient."""
    N = y.shape[1]
    centered = y - y.mean(axis=1, keepdims=True)
    g = 2.0 * N * np.sum(centered * centered, axis=1)
    return g, 4.0 * N * centered


def _hinge_decreases(tau):
    drop = tau[:-1] - tau[1:]
    active = drop > 0
    r = float(np.sum(drop[active]))
    grad = np.zeros_like(tau)
    act = active.astype(np.float64)
    grad[:-1] += act
    grad[1:] -= act
    return r, grad


def objective(problem: Problem, net: WarpNet, z_train: int, alpha: float, lam: float,
              need_grad: bool = True) -> ObjectiveValue:
    """Trapezoid-integrated pairwise loss plus ``lam`` times the monotonicity hinge."""
    s = regular_grid(problem.N, z_train)
    coeffs, tape = forward(net, s, record=need_grad)
    tau = warping_from_coeffs(problem.basis, s, coeffs)
    y, dy = interpolate_many(problem.values, problem.lengths, tau, alpha, with_grad=need_grad)

    ds = problem.S / z_train
    w = trapezoid_weights(z_train) * ds
    g, dg_dy = _pairwise_sq(y)
    data = float(w @ g)
    pen, dpen_dtau = _hinge_decreases(tau)
    total = data + lam * pen
    if not (math.isfinite(data) and math.isfinite(pen)):
        raise DivergenceError("non-finite objective")
    if not need_grad:
        return ObjectiveValue(data, pen, total)

    dtau = w[:, None] * dg_dy * dy + lam * dpen_dtau
    envelope = s * (problem.S - s)
    dcoeffs = envelope[:, None] * (dtau @ problem.basis.complement)
    return ObjectiveValue(data, pen, total, backward(net, tape, dcoeffs))


def data_loss(series, net: WarpNet, z_train: int, alpha: float = 1.0) -> float:
    return objective(Problem(series), net, z_train, alpha, 0.0, need_grad=False).data_loss


def penalty(phi, basis: WarpBasis, z: int) -> float:
    """Sum of decreases of every warp between consecutive points of a ``z``-step grid.

    ``phi`` is a :class:`WarpNet` or any callable mapping an array of ``s``
    to coefficients of shape ``(len(s), N-1)``.
    """
    s = regular_grid(basis.n_series, z)
    coeffs = forward_chunked(phi, s) if isinstance(phi, WarpNet) else phi(s)
    tau = warping_from_coeffs(basis, s, coeffs)
    return _hinge_decreases(tau)[0]


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_update(params: dict, grads: dict, state: AdamState, lr: float,
                beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam step, in place on ``params`` and ``state``."""
    state.step += 1
    bc1 = 1.0 - beta1**state.step
    bc2 = 1.0 - beta2**state.step
    for k, g in grads.items():
        if k not in state.m:
            state.m[k] = np.zeros_like(params[k])
            state.v[k] = np.zeros_like(params[k])
        m, v = state.m[k], state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        params[k] -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


@dataclass
class LossHistory:
    data_loss: list = field(default_factory=list)
    penalty: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    total: list = field(default_factory=list)

    def append(self, value: ObjectiveValue, alpha: float) -> None:
        self.data_loss.append(value.data_loss)
        self.penalty.append(value.penalty)
        self.alpha.append(alpha)
        self.total.append(value.total)

    def __len__(self):
        return len(self.total)


@dataclass
class AlignmentResult:
    series: list
    warping: SampledWarping
    aligned: np.ndarray  # (N, Z+1)
    history: LossHistory
    net: WarpNet
    config: NtwConfig
    z_train: int
    validity: tuple
    penalty_residual: float
    data_loss_initial: float
    data_loss_final: float
    alpha_final: float
    metrics: dict = field(default_factory=dict)
    average: Optional[np.ndarray] = None
    sd: Optional[np.ndarray] = None

    @property
    def N(self) -> int:
        return len(self.series)


def aligned_values(problem: Problem, sw: SampledWarping) -> np.ndarray:
    """Raw samples picked at the integer warp indices, shape ``(N, Z+1)``."""
    return np.take_along_axis(problem.values, sw.tau, axis=1)


def finalize(problem: Problem, net: WarpNet, z_out: int, z_train: int):
    """Sampled warping at the output resolution plus the hinge residual on that grid."""
    s = regular_grid(problem.N, z_out)
    tau = warping_from_coeffs(problem.basis, s, forward_chunked(net, s))
    residual = _hinge_decreases(tau)[0]
    sw = discretize(tau, problem.lengths)
    final_loss = objective(problem, net, z_train, 1.0, 0.0, need_grad=False).data_loss
    return sw, residual, final_loss


def align(series: Sequence[TimeSeries], config: Optional[NtwConfig] = None,
          callback=None) -> AlignmentResult:
    """Jointly align ``series`` by training a fresh coefficient network.

    ``callback(step, value, alpha)`` is invoked after every update if given.
    Raises :class:`DivergenceError` if anything becomes non-finite.
    """
    from ntw import metrics as _metrics

    config = config or NtwConfig()
    problem = Problem(series)
    z_train = config.z_train or problem.max_T
    z_out = config.z_out or problem.N * problem.max_T

    net = init_net(problem.N, config.seed, config.hidden)
    initial = objective(problem, net, z_train, 1.0, 0.0, need_grad=False).data_loss
    anneal = AnnealState(config.alpha0, config.alpha_decay, 1.0)
    adam = AdamState()
    history = LossHistory()

    for step in range(config.updates):
        value = objective(problem, net, z_train, anneal.alpha, config.lam)
        history.append(value, anneal.alpha)
        adam_update(net.params, value.grads, adam, config.learning_rate,
                    config.adam_beta1, config.adam_beta2, config.adam_eps)
        if not all(np.all(np.isfinite(net.params[k])) for k in PARAM_NAMES):
            raise DivergenceError("non-finite parameters", step)
        if callback is not None:
            callback(step, value, anneal.alpha)
        anneal = anneal_step(anneal)

    sw, residual, final_loss = finalize(problem, net, z_out, z_train)
    aligned = aligned_values(problem, sw)
    validity = check_feasibility(sw)
    if residual > 0:
        logger.warning("final warping decreases somewhere on the output grid "
                       "(hinge residual %.3g); validity %s", residual, validity)

    result = AlignmentResult(
        series=problem.series,
        warping=sw,
        aligned=aligned,
        history=history,
        net=net,
        config=config,
        z_train=z_train,
        validity=validity,
        penalty_residual=residual,
        data_loss_initial=initial,
        data_loss_final=final_loss,
        alpha_final=anneal.alpha,
    )
    result.average = _metrics.warped_average(aligned)
    result.sd = _metrics.warped_std(aligned)
    result.metrics = _metrics.metrics_document(
        problem.series, sw, aligned, residual, final_loss, config.updates, anneal.alpha
    )
    return result


def continuous_warping(problem_or_basis, net: WarpNet) -> ContinuousWarping:
    basis = problem_or_basis.basis if isinstance(problem_or_basis, Problem) else problem_or_basis
    return ContinuousWarping(basis, lambda s: forward_chunked(net, s))


def uniform_alignment(series: Sequence[TimeSeries], z_out: Optional[int] = None):
    """Sampled warping and aligned rows of the untrained (linear) warping."""
    problem = Problem(series)
    z_out = z_out or problem.N * problem.max_T
    s = regular_grid(problem.N, z_out)
    tau = warping_from_coeffs(problem.basis, s, np.zeros((s.size, problem.N - 1)))
    sw = discretize(tau, problem.lengths)
    return sw, aligned_values(problem, sw)
