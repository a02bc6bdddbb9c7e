"""Per-mode generator-vs-rotor speed regression and the R-squared gate.

The monitored quantity is the gear speed ratio surrogate: the slope of an
ordinary-least-squares line of generator RPM against rotor RPM, fitted per
operating mode on training data. Modes whose fit falls below the R-squared
threshold carry no usable kinematic signal (idling, transitions) and are
excluded from monitoring.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._reductions import canonical_order, chunked_sum
from ._validation import as_float_vector
from .errors import ModelingError
from .modes import ModeLabel

log = logging.getLogger(__name__)

MIN_SAMPLES = 30
DEFAULT_R2_THRESHOLD = 0.99


class UndefinedRatioError(ValueError):
    """Speed ratio is undefined when the driven side is not turning."""


class InsufficientDataError(ModelingError):
    """Too few points to fit a stable per-mode line."""


class DegenerateModeError(ModelingError):
    """Rotor speed has no variance; the line is unidentifiable."""


def speed_ratio(rotor_rpm: float, gen_rpm: float) -> float:
    """Driving-gear RPM over driven-gear RPM for one observation."""
    if gen_rpm <= 0:
        raise UndefinedRatioError(
            f"speed ratio undefined for gen_rpm={gen_rpm!r}"
        )
    return rotor_rpm / gen_rpm


@dataclass(frozen=True)
class RatioModel:
    """OLS line gen_rpm = slope * rotor_rpm + intercept for one mode."""

    turbine_id: str
    mode: ModeLabel
    slope: float
    intercept: float
    r_squared: float
    n: int
    train_period: int

    def to_dict(self) -> dict:
        return {
            "turbine": self.turbine_id,
            "mode": self.mode.value,
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r_squared,
            "n": self.n,
            "train_period": self.train_period,
        }


@dataclass
class RetainedModeSet:
    """Gate outcome for one turbine."""

    turbine_id: str
    threshold: float
    retained: list[RatioModel]
    rejected: list[tuple[ModeLabel, float]]


def fit_ratio_model(
    rotor_rpm,
    gen_rpm,
    turbine_id: str,
    mode: ModeLabel,
    train_period: int,
) -> RatioModel:
    """Fit the per-mode line by centered closed-form least squares.

    Sums are accumulated in canonical order so the fit is independent of
    record order. R-squared is 1 - SS_res/SS_tot; with the intercept the
    training residuals sum to zero up to floating point.
    """
    x = as_float_vector(rotor_rpm, name="rotor_rpm")
    y = as_float_vector(gen_rpm, name="gen_rpm")
    if x.shape[0] != y.shape[0]:
        raise ValueError("rotor and generator series differ in length")
    n = x.shape[0]
    if n < MIN_SAMPLES:
        raise InsufficientDataError(
            f"{turbine_id}/{mode.value}: {n} points, need {MIN_SAMPLES}"
        )

    xy = np.column_stack([x, y])
    xy = xy[canonical_order(xy)]
    xs, ys = xy[:, 0], xy[:, 1]
    sums = chunked_sum(xy)
    x_mean, y_mean = sums[0] / n, sums[1] / n
    dx = xs - x_mean
    dy = ys - y_mean
    sxx = float(chunked_sum((dx * dx)[:, None])[0])
    # ulp jitter from summing a constant channel still counts as zero
    if not sxx > n * (1e-12 * (1.0 + abs(x_mean))) ** 2:
        raise DegenerateModeError(
            f"{turbine_id}/{mode.value}: rotor speed has zero variance"
        )
    sxy = float(chunked_sum((dx * dy)[:, None])[0])
    slope = sxy / sxx
    intercept = y_mean - slope * x_mean

    resid = dy - slope * dx
    ss_res = float(chunked_sum((resid * resid)[:, None])[0])
    ss_tot = float(chunked_sum((dy * dy)[:, None])[0])
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    r2 = float(min(1.0, max(0.0, r2)))
    return RatioModel(turbine_id, mode, float(slope), float(intercept),
                      r2, n, train_period)


def residuals(model: RatioModel, rotor_rpm, gen_rpm) -> np.ndarray:
    """Observed minus predicted generator RPM; no re-fitting involved."""
    x = as_float_vector(rotor_rpm, name="rotor_rpm")
    y = as_float_vector(gen_rpm, name="gen_rpm")
    return y - (model.slope * x + model.intercept)


def gate_modes(
    models: list[RatioModel],
    threshold: float = DEFAULT_R2_THRESHOLD,
    turbine_id: str | None = None,
) -> RetainedModeSet:
    """Split fitted modes into retained and rejected by the R2 threshold."""
    if not 0.0 < threshold < 1.0:
        raise ModelingError(f"R2 threshold must be in (0, 1), got {threshold}")
    if turbine_id is None:
        turbine_id = models[0].turbine_id if models else ""
    retained = [m for m in models if m.r_squared >= threshold]
    rejected = [(m.mode, m.r_squared) for m in models
                if m.r_squared < threshold]
    if models and not retained:
        log.warning("%s: every mode fell below R2 %.3g; excluded from "
                    "monitoring", turbine_id, threshold)
    return RetainedModeSet(turbine_id, threshold, retained, rejected)
