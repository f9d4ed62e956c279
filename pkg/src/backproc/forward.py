"""Forward mean function of the cumulative process, for contrast with the
backward curves. Each observed increment (s, q) contributes S_hat(s) q / R(s);
increments are only recorded while a subject is under observation, which the
data model already enforces."""

from __future__ import annotations

import numpy as np

from .model import Cohort
from .survival import EmptyRiskSetError, SurvivalCurve, product_limit, risk_at, survival_at

__all__ = ["forward_mean", "forward_mean_curve"]


def forward_mean(cohort: Cohort, t: float, curve: SurvivalCurve | None = None) -> float:
    """Estimated mean of the forward process at time t:
    n^{-1} sum over all observed events (s, q) with s <= t of S_hat(s) q / R(s)."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if curve is None:
        curve = product_limit(cohort)
    times, marks = [], []
    for subj in cohort.subjects:
        for ev in subj.events:
            if ev.time <= t:
                times.append(ev.time)
                marks.append(ev.mark)
    if not times:
        return 0.0
    s_arr = np.array(times)
    q_arr = np.array(marks)
    r = risk_at(cohort, s_arr)
    if np.any(r <= 0):
        bad = s_arr[np.argmax(r <= 0)]
        raise EmptyRiskSetError(f"empty risk set at event time {bad}")
    s_hat = survival_at(curve, s_arr)
    return float(np.sum(s_hat * q_arr / r) / cohort.n)


def forward_mean_curve(cohort: Cohort, curve: SurvivalCurve | None = None):
    """Evaluate the forward mean at 0 and at every distinct observed event time.

    Returns (times, values); the estimate is a step function jumping at
    event times, so this grid is lossless.
    """
    if curve is None:
        curve = product_limit(cohort)
    grid = sorted({0.0} | {ev.time for subj in cohort.subjects for ev in subj.events})
    times = np.array(grid)
    values = np.array([forward_mean(cohort, t, curve) for t in times])
    return times, values
