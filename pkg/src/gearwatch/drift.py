"""Weekly residual aggregation and Shewhart-style drift flagging.

Validation residuals are grouped into ISO-8601 calendar weeks (Monday
start) per turbine. Control limits come from the training year's weekly
means: center +/- 3 sample standard deviations. Two rules fire flags: a
week outside the limits, and the eighth week of a run of eight consecutive
observed weeks strictly on one side of the center. A missing week or a
week exactly on the center resets the run.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import as_float_vector, require_fitted
from .errors import MonitoringError

RULE_LIMIT = "beyond-3-sigma"
RULE_RUN = "run-of-8-same-side"

MIN_BASELINE_WEEKS = 8


@dataclass(frozen=True)
class WeeklyResidual:
    """Mean residual (generator RPM) over one ISO week for one turbine."""

    turbine_id: str
    iso_year: int
    iso_week: int
    mean_residual: float
    count: int

    def week_index(self) -> int:
        """Absolute week number on a common Monday-start axis."""
        monday = date.fromisocalendar(self.iso_year, self.iso_week, 1)
        return (monday.toordinal() - 1) // 7


@dataclass(frozen=True)
class DriftFlag:
    turbine_id: str
    iso_year: int
    iso_week: int
    rule: str
    value: float


# proleptic-Gregorian ordinal of 1970-01-01, for datetime64 conversion
_EPOCH_ORDINAL = date(1970, 1, 1).toordinal()


def _week_indices(timestamps) -> np.ndarray:
    """Absolute Monday-start week index per timestamp.

    Ordinal day 1 (0001-01-01) is a Monday, so ``(ordinal - 1) // 7``
    numbers ISO weeks on a common integer axis.
    """
    ts = np.asarray(timestamps)
    if np.issubdtype(ts.dtype, np.datetime64):
        days = ts.astype("datetime64[D]").astype(np.int64)
        ordinals = days + _EPOCH_ORDINAL
    else:
        ordinals = np.array(
            [_as_date(t).toordinal() for t in ts], dtype=np.int64
        )
    return (ordinals - 1) // 7


def _as_date(t) -> date:
    return t.date() if hasattr(t, "date") else t


def weekly_series(timestamps, residual_values, turbine_id: str) -> list[WeeklyResidual]:
    """Group residuals into per-ISO-week means, chronologically ordered.

    Weeks with no points are absent rather than zero-filled. Points are
    sorted by week and value before summing, so any permutation of the
    input produces bit-identical means.
    """
    values = as_float_vector(residual_values, name="residuals")
    idx = _week_indices(timestamps)
    if idx.shape[0] != values.shape[0]:
        raise MonitoringError("timestamps and residuals differ in length")
    order = np.lexsort((values, idx))
    idx_sorted = idx[order]
    vals_sorted = values[order]
    weeks, starts = np.unique(idx_sorted, return_index=True)
    sums = np.add.reduceat(vals_sorted, starts)
    counts = np.diff(np.append(starts, idx_sorted.shape[0]))
    out = []
    for w, s, c in zip(weeks, sums, counts):
        monday = date.fromordinal(int(w) * 7 + 1)
        iso_year, iso_week, _ = monday.isocalendar()
        out.append(
            WeeklyResidual(turbine_id, iso_year, iso_week,
                           float(s / c), int(c))
        )
    return out


class DriftMonitor(BaseEstimator):
    """Shewhart chart over weekly mean residuals.

    Parameters
    ----------
    n_sigma : float
        Distance of the control limits from the center, in baseline
        standard deviations.
    run_length : int
        Consecutive same-side weeks that trigger the run rule.
    min_weeks : int
        Minimum number of baseline weeks required to fit.

    Attributes
    ----------
    center_ : float
        Mean of the training weekly means.
    sigma_ : float
        Their sample standard deviation (n-1).
    ucl_, lcl_ : float
        Control limits at center +/- n_sigma * sigma.
    """

    def __init__(self, n_sigma: float = 3.0, run_length: int = 8,
                 min_weeks: int = MIN_BASELINE_WEEKS):
        self.n_sigma = n_sigma
        self.run_length = run_length
        self.min_weeks = min_weeks

    def fit(self, training_weeks: list[WeeklyResidual], y=None):
        if len(training_weeks) < self.min_weeks:
            raise MonitoringError(
                f"insufficient baseline: {len(training_weeks)} weeks, "
                f"need {self.min_weeks}"
            )
        means = np.array([w.mean_residual for w in training_weeks])
        center = float(means.mean())
        sigma = float(means.std(ddof=1))
        if not sigma > 0:
            raise MonitoringError("degenerate baseline: weekly means have "
                                  "zero variance")
        self.center_ = center
        self.sigma_ = sigma
        self.ucl_ = center + self.n_sigma * sigma
        self.lcl_ = center - self.n_sigma * sigma
        return self

    def detect(self, weeks: list[WeeklyResidual]) -> list[DriftFlag]:
        """Flag drift over a chronologically sorted weekly series.

        The run counter advances only across consecutive observed weeks;
        a gap, a side change, or a value exactly on the center resets it.
        Each maximal run yields at most one run-rule flag, at the week the
        counter reaches the run length.
        """
        require_fitted(self, "center_")
        ordered = sorted(weeks, key=lambda w: w.week_index())
        flags: list[DriftFlag] = []
        run_side = 0
        run_len = 0
        prev_index = None
        for w in ordered:
            value = w.mean_residual
            if abs(value - self.center_) > self.n_sigma * self.sigma_:
                flags.append(DriftFlag(w.turbine_id, w.iso_year, w.iso_week,
                                       RULE_LIMIT, value))
            side = 0 if value == self.center_ else (
                1 if value > self.center_ else -1
            )
            consecutive = prev_index is not None and w.week_index() == prev_index + 1
            if side == 0:
                run_side, run_len = 0, 0
            elif side == run_side and consecutive:
                run_len += 1
                if run_len == self.run_length:
                    flags.append(DriftFlag(w.turbine_id, w.iso_year,
                                           w.iso_week, RULE_RUN, value))
            else:
                run_side, run_len = side, 1
            prev_index = w.week_index()
        return flags


def build_chart(training_weeks: list[WeeklyResidual], n_sigma: float = 3.0
                ) -> DriftMonitor:
    """Fit a monitor on the training weeks; functional convenience."""
    return DriftMonitor(n_sigma=n_sigma).fit(training_weeks)


def detect_drift(chart: DriftMonitor, weeks: list[WeeklyResidual]
                 ) -> list[DriftFlag]:
    return chart.detect(weeks)
