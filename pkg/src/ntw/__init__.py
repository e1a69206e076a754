"""Neural time warping: joint alignment of many time series.

A small network produces the coefficients of a continuous warping whose
sampled form is a feasible discrete multiple alignment. Training minimizes
the pairwise squared difference of sinc-interpolated series under an
annealed low-pass kernel.
"""

from ntw.interp import AnnealState, TimeSeries, anneal_step, interpolate, interpolate_grad, sinc_kernel
from ntw.metrics import barycenter_loss, dtw, warped_average, warped_std
from ntw.training import AlignmentResult, NtwConfig, align
from ntw.warp_model import (
    ContinuousWarping,
    SampledWarping,
    build_basis,
    check_feasibility,
    eval_warping,
    sample_warping,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentResult",
    "AnnealState",
    "ContinuousWarping",
    "NtwConfig",
    "SampledWarping",
    "TimeSeries",
    "align",
    "anneal_step",
    "barycenter_loss",
    "build_basis",
    "check_feasibility",
    "dtw",
    "eval_warping",
    "interpolate",
    "interpolate_grad",
    "sample_warping",
    "sinc_kernel",
    "warped_average",
    "warped_std",
]
