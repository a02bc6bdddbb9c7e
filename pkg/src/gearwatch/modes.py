"""Semantic labeling of mixture components.

Clusters come out of the EM fit anonymous. Each component mean is mapped
back to physical units and matched against a canonical signature per
operating mode (typical wind speed, rotor speed, pitch angle and power of
a 2 MW turbine). For six clusters the match is a minimum-cost one-to-one
assignment; otherwise each cluster independently takes its nearest
signature.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import permutations

import numpy as np

from .mixture import GaussianMixtureEM
from .standardize import FEATURE_NAMES, Standardization


class ModeLabel(Enum):
    """The six operating modes; values are the serialized spellings."""

    IDLING = "Idling"
    START = "Start"
    GRID_CONNECTING = "Grid Connecting"
    SUB_RATED_PRODUCTION = "Sub-Rated Prod"
    PITCH_MANAGED = "Pitch Managed"
    RATED_PRODUCTION = "Rated Production"

    def __str__(self) -> str:
        return self.value


def mode_from_string(s: str) -> ModeLabel:
    for label in ModeLabel:
        if label.value == s:
            return label
    raise ValueError(f"unknown operating mode {s!r}")


# signature centroid feature order (original physical units)
SIGNATURE_FEATURES = ("wind_speed", "rotor_rpm", "pitch_angle", "power")
SIGNATURE_UNITS = ("m/s", "RPM", "deg", "kW")


@dataclass(frozen=True)
class ModeSignature:
    """Typical operating point of one mode: (wind, rotor, pitch, power)."""

    label: ModeLabel
    centroid: tuple[float, float, float, float]


# Canonical per-mode operating points for a 2 MW turbine, used only for
# naming clusters; tolerant matching makes them portable across turbines.
CANONICAL_SIGNATURES: tuple[ModeSignature, ...] = (
    ModeSignature(ModeLabel.IDLING, (2.1, 0.8, 23.9, -5.7)),
    ModeSignature(ModeLabel.START, (3.4, 7.1, 11.0, 11.3)),
    ModeSignature(ModeLabel.GRID_CONNECTING, (5.1, 11.5, -1.1, 223.8)),
    ModeSignature(ModeLabel.SUB_RATED_PRODUCTION, (8.1, 13.9, -1.9, 923.0)),
    ModeSignature(ModeLabel.PITCH_MANAGED, (8.6, 2.5, 65.6, 84.7)),
    ModeSignature(ModeLabel.RATED_PRODUCTION, (12.6, 14.8, 4.1, 1870.1)),
)


def canonical_signatures() -> list[ModeSignature]:
    """The six canonical mode signatures, in label declaration order."""
    return list(CANONICAL_SIGNATURES)


@dataclass
class LabeledModel:
    """A fitted mixture plus the cluster-to-mode mapping."""

    mixture: GaussianMixtureEM
    mapping: tuple[ModeLabel, ...]
    match_cost: float

    def label_of(self, cluster: int) -> ModeLabel:
        return self.mapping[cluster]


def destandardized_means(
    model: GaussianMixtureEM, standardization: Standardization
) -> np.ndarray:
    """Component means in original units, in signature feature order."""
    mean = np.asarray(standardization.mean)
    std = np.asarray(standardization.std)
    raw = model.means_ * std + mean
    name_to_col = {n: i for i, n in enumerate(standardization.feature_names)}
    cols = [name_to_col[n] for n in SIGNATURE_FEATURES]
    return raw[:, cols]


def _cost_matrix(centroids: np.ndarray, signatures: list[ModeSignature]):
    sig = np.array([s.centroid for s in signatures], dtype=np.float64)
    # normalize both sides by the signature set's per-feature spread so the
    # metric does not depend on the candidate model's own scale
    span = sig.max(axis=0) - sig.min(axis=0)
    span[span == 0] = 1.0
    a = centroids / span
    b = sig / span
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))


def label_clusters(
    model: GaussianMixtureEM,
    standardization: Standardization,
    signatures: list[ModeSignature] | None = None,
) -> LabeledModel:
    """Name each mixture component after its closest operating mode.

    With exactly six clusters the mapping is the minimum-total-cost
    bijection, found by exhaustive search over the 720 permutations (first
    strictly better permutation kept, so ties resolve toward label
    declaration order). With any other k each cluster takes its nearest
    signature independently and labels may repeat.
    """
    if signatures is None:
        signatures = canonical_signatures()
    centroids = destandardized_means(model, standardization)
    cost = _cost_matrix(centroids, signatures)
    k = cost.shape[0]

    if k == len(signatures):
        best_perm = None
        best_cost = np.inf
        for perm in permutations(range(len(signatures))):
            total = cost[np.arange(k), perm].sum()
            if total < best_cost:
                best_cost = total
                best_perm = perm
        mapping = tuple(signatures[j].label for j in best_perm)
        total_cost = float(best_cost)
    else:
        nearest = np.argmin(cost, axis=1)
        mapping = tuple(signatures[j].label for j in nearest)
        total_cost = float(cost[np.arange(k), nearest].sum())
    return LabeledModel(model, mapping, total_cost)
