"""Data model for failure-anchored process data.

A subject carries left-truncated, right-censored survival data (w, x, delta)
together with the observed increments of a cumulative process, recorded in
forward time since the initial event. Backward quantities (the process over
the last ``u`` time units before failure) are derived, never stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ProcessEvent",
    "SubjectRecord",
    "Cohort",
    "EstimandWindow",
    "CohortValidationError",
    "validate_cohort",
    "backward_value",
    "backward_values",
    "apply_prevalent_shift",
]


class CohortValidationError(ValueError):
    """Raised when subject data violate the observational-model invariants."""


@dataclass(frozen=True)
class ProcessEvent:
    """One atom of the cumulative process: an increment ``mark`` at forward ``time``."""

    time: float
    mark: float


@dataclass(frozen=True)
class SubjectRecord:
    """One subject's follow-up record.

    w      time from initial event to recruitment (0 for incident subjects)
    x      observation time, min(failure, censoring)
    delta  1 if the failure was observed, 0 if censored
    events process increments observed during follow-up, forward time
    """

    id: str
    w: float
    x: float
    delta: int
    events: tuple[ProcessEvent, ...] = ()


@dataclass(frozen=True)
class Cohort:
    """Validated collection of subjects with a derived uncensored-time index.

    Immutable after construction; all estimators treat it as read-only.
    Construct via :func:`validate_cohort`, not directly.
    """

    subjects: tuple[SubjectRecord, ...]
    event_times: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.subjects)

    def w_array(self) -> np.ndarray:
        return np.array([s.w for s in self.subjects])

    def x_array(self) -> np.ndarray:
        return np.array([s.x for s in self.subjects])

    def delta_array(self) -> np.ndarray:
        return np.array([s.delta for s in self.subjects])


@dataclass(frozen=True)
class EstimandWindow:
    """Failure-time window [t1, t2) and backward horizon tau0 of the estimand.

    The estimand is the mean of the backward process over the last ``u`` time
    units of life, u in [0, tau0], conditional on failure in [t1, t2).
    """

    t1: float
    t2: float
    tau0: float

    def __post_init__(self):
        if not (0 < self.tau0 <= self.t1 < self.t2):
            raise ValueError(
                f"invalid estimand window: need 0 < tau0 <= t1 < t2, "
                f"got tau0={self.tau0}, t1={self.t1}, t2={self.t2}"
            )


def _check_subject(s: SubjectRecord, check_event_lower_bound: bool) -> None:
    if not (math.isfinite(s.w) and math.isfinite(s.x)):
        raise CohortValidationError(f"subject {s.id!r}: non-finite w or x")
    if s.w < 0:
        raise CohortValidationError(f"subject {s.id!r}: negative truncation time w={s.w}")
    if s.w > s.x:
        raise CohortValidationError(
            f"subject {s.id!r}: truncation exceeds observation time (w={s.w} > x={s.x})"
        )
    if s.delta not in (0, 1):
        raise CohortValidationError(f"subject {s.id!r}: delta must be 0 or 1, got {s.delta}")
    for ev in s.events:
        if not math.isfinite(ev.mark):
            raise CohortValidationError(f"subject {s.id!r}: non-finite mark at time {ev.time}")
        if not math.isfinite(ev.time):
            raise CohortValidationError(f"subject {s.id!r}: non-finite event time")
        if ev.time > s.x or (check_event_lower_bound and ev.time < s.w):
            raise CohortValidationError(
                f"subject {s.id!r}: event time {ev.time} outside observation interval "
                f"[{s.w}, {s.x}]"
            )


def validate_cohort(
    subjects: list[SubjectRecord] | tuple[SubjectRecord, ...],
    *,
    _check_event_lower_bound: bool = True,
) -> Cohort:
    """Validate raw subject records and build the cohort.

    Rejects w > x, w < 0, event times outside [w, x], non-finite marks and
    duplicate ids, naming the offending subject. The private flag relaxes the
    event lower bound for prevalent-shifted cohorts, where the process remains
    observed from the actual (unshifted) recruitment time.
    """
    if len(subjects) == 0:
        raise CohortValidationError("cohort must contain at least one subject")
    seen: set[str] = set()
    for s in subjects:
        if s.id in seen:
            raise CohortValidationError(f"duplicate subject id {s.id!r}")
        seen.add(s.id)
        _check_subject(s, _check_event_lower_bound)
    uncensored = sorted({s.x for s in subjects if s.delta == 1})
    return Cohort(subjects=tuple(subjects), event_times=np.array(uncensored))


def backward_value(subject: SubjectRecord, u: float) -> float:
    """Total process increment over the last ``u`` time units before failure.

    Only defined for uncensored subjects. The backward window is closed: an
    event exactly ``u`` before failure is included, and a mark at the failure
    instant itself belongs to V(u) for every u >= 0.
    """
    if subject.delta != 1:
        raise ValueError(
            f"subject {subject.id!r}: backward value undefined for censored subjects"
        )
    if not (0 <= u <= subject.x):
        raise ValueError(f"backward time u={u} outside [0, x={subject.x}]")
    return float(sum(ev.mark for ev in subject.events if subject.x - ev.time <= u))


def backward_values(subject: SubjectRecord, grid: np.ndarray) -> np.ndarray:
    """Vectorized :func:`backward_value` over a grid of backward times."""
    if subject.delta != 1:
        raise ValueError(
            f"subject {subject.id!r}: backward value undefined for censored subjects"
        )
    grid = np.asarray(grid, dtype=float)
    if len(subject.events) == 0:
        return np.zeros_like(grid)
    offsets = subject.x - np.array([ev.time for ev in subject.events])
    marks = np.array([ev.mark for ev in subject.events])
    return (offsets[:, None] <= grid[None, :]).T @ marks


def apply_prevalent_shift(cohort: Cohort, tau0: float) -> Cohort:
    """Replace w by w + tau0 for prevalent subjects, dropping those with x < w + tau0.

    This artificially truncates a small portion of the data so that the
    backward process over [0, tau0] is fully observed for every retained
    uncensored subject. Incident subjects (w = 0) are unchanged. Process
    events recorded between the actual and the shifted recruitment time are
    kept: only the truncation variable moves, not the observation window.

    Not idempotent: applying twice with tau0 > 0 shifts prevalent w by 2*tau0.
    """
    if tau0 <= 0:
        raise ValueError(f"tau0 must be positive, got {tau0}")
    retained: list[SubjectRecord] = []
    for s in cohort.subjects:
        if s.w == 0:
            retained.append(s)
            continue
        w_new = s.w + tau0
        if s.x < w_new:
            continue
        retained.append(SubjectRecord(id=s.id, w=w_new, x=s.x, delta=s.delta, events=s.events))
    if not retained:
        raise CohortValidationError("no subjects remain after prevalent shift")
    return validate_cohort(retained, _check_event_lower_bound=False)
