"""Product-limit survival estimation under left truncation and right censoring.

Convention used throughout the package: the survival estimate is
left-continuous, S_hat(t) = P_hat(T >= t). This is forced by the
complete-data reduction of the backward mean (the weight S_hat(x_i)/R(x_i)
must equal 1 when there is no truncation or censoring).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Cohort

__all__ = [
    "SurvivalCurve",
    "EmptyRiskSetError",
    "risk_fraction",
    "product_limit",
    "survival_at",
    "risk_at",
]


class EmptyRiskSetError(RuntimeError):
    """Risk set is empty at an uncensored event time: the estimand is not
    identified there (limited support of the truncation/censoring times)."""


@dataclass(frozen=True)
class SurvivalCurve:
    """Product-limit estimate on the grid of distinct uncensored times.

    s_left[k] is S_hat evaluated *at* event_times[k], i.e. the value just
    before the failure there; jump[k] = dN/R is the discrete hazard.
    """

    event_times: np.ndarray
    risk_fraction: np.ndarray
    jump: np.ndarray
    s_left: np.ndarray
    cum_hazard: np.ndarray
    # survival values after 0, 1, 2, ... jumps; used for step lookup
    _s_steps: np.ndarray = field(repr=False)


def risk_fraction(cohort: Cohort, t: float) -> float:
    """Fraction of subjects at risk at time t: mean of I(x_i >= t >= w_i)."""
    w = cohort.w_array()
    x = cohort.x_array()
    return float(np.mean((x >= t) & (w <= t)))


def product_limit(cohort: Cohort) -> SurvivalCurve:
    """Product-limit estimator for left-truncated right-censored data.

    S_hat(t) = prod over uncensored times s < t of (1 - dN(s)/R(s)), with
    dN(s) the fraction of subjects failing at s and R(s) the at-risk
    fraction. Tied failures at the same time are grouped into one factor.

    Raises :class:`EmptyRiskSetError` if R(s) = 0 at some uncensored time.
    """
    times = cohort.event_times
    if times.size == 0:
        raise ValueError("cohort has no uncensored events")
    n = cohort.n
    w = cohort.w_array()
    x = cohort.x_array()
    delta = cohort.delta_array()

    risk = ((x[None, :] >= times[:, None]) & (w[None, :] <= times[:, None])).mean(axis=1)
    if np.any(risk <= 0):
        s_bad = times[np.argmax(risk <= 0)]
        raise EmptyRiskSetError(f"empty risk set at event time {s_bad}")
    dn = ((x[None, :] == times[:, None]) & (delta[None, :] == 1)).mean(axis=1)
    jump = dn / risk
    s_steps = np.concatenate([[1.0], np.cumprod(1.0 - jump)])
    cum_hazard = np.cumsum(jump)
    return SurvivalCurve(
        event_times=times,
        risk_fraction=risk,
        jump=jump,
        s_left=s_steps[:-1],
        cum_hazard=cum_hazard,
        _s_steps=s_steps,
    )


def survival_at(curve: SurvivalCurve, t) -> np.ndarray | float:
    """Step-function lookup of S_hat(t) = P_hat(T >= t); vectorized in t."""
    idx = np.searchsorted(curve.event_times, np.asarray(t), side="left")
    out = curve._s_steps[idx]
    return float(out) if np.isscalar(t) else out


def risk_at(cohort: Cohort, t) -> np.ndarray | float:
    """Vectorized at-risk fraction R(t); inclusive at both ends."""
    w = cohort.w_array()
    x = cohort.x_array()
    t = np.asarray(t, dtype=float)
    out = ((x[None, :] >= t[..., None]) & (w[None, :] <= t[..., None])).mean(axis=-1)
    return float(out) if out.ndim == 0 else out
