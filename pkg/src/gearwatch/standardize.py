"""Z-score standardization of the four monitored features.

The clustering stage operates on (power, wind speed, rotor speed, pitch
angle) standardized to zero mean and unit standard deviation (n-1
convention). Parameters are learned on training data only and stored so
centroids can be mapped back to physical units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._reductions import canonical_order, chunked_sum
from ._validation import as_float_matrix, require_fitted
from .errors import ModelingError

# column order of every feature matrix in this package
FEATURE_NAMES = ("power", "wind_speed", "rotor_rpm", "pitch_angle")

# canonical-frame columns backing each feature, in the same order
FEATURE_SOURCE_COLUMNS = (
    "power_avg",
    "wind_speed_avg",
    "rotor_rpm_avg",
    "pitch_angle_avg",
)


@dataclass(frozen=True)
class Standardization:
    """Per-feature centering and scale, keyed by FEATURE_NAMES order."""

    feature_names: tuple[str, ...]
    mean: tuple[float, ...]
    std: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "mean": list(self.mean),
            "std": list(self.std),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardization":
        return cls(
            tuple(d["feature_names"]),
            tuple(float(v) for v in d["mean"]),
            tuple(float(v) for v in d["std"]),
        )


def feature_matrix(frame) -> np.ndarray:
    """Extract the 4-column feature matrix from a canonical frame."""
    cols = [frame[c].to_numpy(dtype=np.float64) for c in FEATURE_SOURCE_COLUMNS]
    return np.column_stack(cols)


class FeatureStandardizer(BaseEstimator, TransformerMixin):
    """Center and scale features to z-scores.

    Uses the sample standard deviation (n-1 denominator). Moments are
    accumulated over a canonical row ordering, so fitted parameters do not
    depend on record order.

    Parameters
    ----------
    feature_names : tuple of str
        Names used in error messages and serialized parameters.

    Attributes
    ----------
    mean_ : ndarray of shape (n_features,)
    scale_ : ndarray of shape (n_features,)
        Sample standard deviation of each feature.
    n_features_in_ : int
    """

    def __init__(self, feature_names: tuple[str, ...] = FEATURE_NAMES):
        self.feature_names = feature_names

    def fit(self, X, y=None):
        X = as_float_matrix(X, name="X")
        n = X.shape[0]
        if n < 2:
            raise ModelingError("need at least 2 records to standardize")
        Z = X[canonical_order(X)]
        total = chunked_sum(Z)
        mean = total / n
        sq = chunked_sum((Z - mean) ** 2)
        std = np.sqrt(sq / (n - 1))
        names = list(self.feature_names)
        if len(names) < X.shape[1]:
            names += [f"feature_{i}" for i in range(len(names), X.shape[1])]
        for j in range(X.shape[1]):
            # ulp jitter from summing a constant column is still zero
            if not std[j] > 1e-12 * (1.0 + abs(mean[j])):
                raise ModelingError(f"zero-variance feature: {names[j]}")
        self.mean_ = mean
        self.scale_ = std
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        require_fitted(self, "mean_")
        X = as_float_matrix(X, n_features=self.n_features_in_, name="X")
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, Z) -> np.ndarray:
        require_fitted(self, "mean_")
        Z = as_float_matrix(Z, n_features=self.n_features_in_, name="Z")
        return Z * self.scale_ + self.mean_

    def parameters(self) -> Standardization:
        require_fitted(self, "mean_")
        return Standardization(
            tuple(self.feature_names[: self.n_features_in_]),
            tuple(float(v) for v in self.mean_),
            tuple(float(v) for v in self.scale_),
        )

    @classmethod
    def from_parameters(cls, params: Standardization) -> "FeatureStandardizer":
        est = cls(feature_names=params.feature_names)
        est.mean_ = np.asarray(params.mean, dtype=np.float64)
        est.scale_ = np.asarray(params.std, dtype=np.float64)
        est.n_features_in_ = len(params.mean)
        return est


def standardize(X) -> tuple[np.ndarray, Standardization]:
    """Fit-and-transform convenience wrapper returning (Z, parameters)."""
    est = FeatureStandardizer().fit(X)
    return est.transform(X), est.parameters()
