"""Distributional summaries of the backward process: joint CDF with the
failure time, weighted empirical percentiles, and weighted Pearson
correlation between V(u) and T."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backward import WindowEngine
from .model import Cohort, EstimandWindow
from .survival import SurvivalCurve

__all__ = [
    "WeightedSample",
    "weighted_sample",
    "joint_cdf",
    "estimating_fn",
    "percentile",
    "pearson_correlation",
]


@dataclass(frozen=True)
class WeightedSample:
    """Backward values and failure times of in-window uncensored subjects with
    their estimation weights S_hat(x_i)/(n R(x_i)). The weights sum to the
    normalizer S_hat(t1) - S_hat(t2) exactly."""

    values: np.ndarray
    times: np.ndarray
    weights: np.ndarray
    normalizer: float


def weighted_sample(
    cohort: Cohort,
    window: EstimandWindow,
    u: float,
    curve: SurvivalCurve | None = None,
    engine: WindowEngine | None = None,
) -> WeightedSample:
    eng = engine if engine is not None else WindowEngine(cohort, window, curve)
    values = eng.v_matrix(np.array([float(u)]))[:, 0]
    return WeightedSample(
        values=values,
        times=eng.x_in.copy(),
        weights=eng.c_in / eng.n,
        normalizer=eng.d,
    )


def joint_cdf(
    cohort: Cohort,
    window: EstimandWindow,
    m: float,
    t: float,
    u: float,
    curve: SurvivalCurve | None = None,
) -> float:
    """Joint distribution estimate P_hat(V(u) <= m, T <= t | t1 <= T < t2).

    Weighted fraction with the closed right endpoint I(x_i <= t), as in the
    defining display (unlike the mean's open-right window).
    """
    if not (window.t1 <= t < window.t2):
        raise ValueError(f"t={t} outside [t1={window.t1}, t2={window.t2})")
    ws = weighted_sample(cohort, window, u, curve)
    keep = (ws.values <= m) & (ws.times <= t)
    return float(np.sum(ws.weights[keep]) / ws.normalizer)


def estimating_fn(
    cohort: Cohort,
    window: EstimandWindow,
    q: float,
    m: float,
    u: float,
    curve: SurvivalCurve | None = None,
) -> float:
    """Percentile estimating function phi_q(m, u): the weighted fraction of
    backward values <= m minus q. Nondecreasing right-continuous step
    function of m; its zero crossing is the q-th percentile."""
    if not (0 < q < 1):
        raise ValueError(f"q must be in (0, 1), got {q}")
    ws = weighted_sample(cohort, window, u, curve)
    return float(np.sum(ws.weights * ((ws.values <= m) - q)) / ws.normalizer)


def percentile(
    cohort: Cohort,
    window: EstimandWindow,
    q: float,
    u: float,
    curve: SurvivalCurve | None = None,
) -> float:
    """Weighted empirical q-th percentile of V(u): the smallest observed value
    whose cumulative weight reaches q (inf convention at ties)."""
    if not (0 < q < 1):
        raise ValueError(f"q must be in (0, 1), got {q}")
    ws = weighted_sample(cohort, window, u, curve)
    if ws.values.size == 0:
        raise ValueError("no in-window uncensored subjects")
    order = np.argsort(ws.values, kind="stable")
    vals = ws.values[order]
    cum = np.cumsum(ws.weights[order]) / ws.normalizer
    # tiny relative slack so exact rational targets (e.g. q = k/n) are hit
    idx = int(np.argmax(cum >= q * (1 - 1e-12)))
    return float(vals[idx])


def pearson_correlation(
    cohort: Cohort,
    window: EstimandWindow,
    u: float,
    curve: SurvivalCurve | None = None,
) -> float:
    """Weighted Pearson correlation between V(u) and the failure time, with
    weights normalized to sum 1. No small-sample bias correction."""
    ws = weighted_sample(cohort, window, u, curve)
    if ws.values.size < 2:
        raise ValueError("need at least two in-window uncensored subjects")
    p = ws.weights / np.sum(ws.weights)
    mv = float(p @ ws.values)
    mt = float(p @ ws.times)
    var_v = float(p @ (ws.values - mv) ** 2)
    var_t = float(p @ (ws.times - mt) ** 2)
    if var_v <= 1e-24 * max(mv * mv, 1.0) or var_t <= 1e-24 * max(mt * mt, 1.0):
        raise ValueError("degenerate correlation: zero variance in V(u) or T")
    cov = float(p @ ((ws.values - mv) * (ws.times - mt)))
    return cov / np.sqrt(var_v * var_t)
