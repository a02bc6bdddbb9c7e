"""Gearbox wear monitoring from wind-turbine SCADA data.

Pipeline: ingest 10-minute SCADA logs, cluster operating modes with a
Gaussian mixture, regress generator speed on rotor speed per mode, gate
modes by R-squared, and watch weekly residual means on a control chart.
"""

from .drift import DriftFlag, DriftMonitor, WeeklyResidual, build_chart, \
    detect_drift, weekly_series
from .errors import ConfigError, GearwatchError, IngestError, \
    ModelingError, MonitoringError
from .ingest import DataSplit, LoadResult, ScadaRecord, load_scada, \
    split_by_year, write_records
from .mixture import GaussianMixtureEM, ModelSweep, assign, em_fit, sweep_k
from .modes import LabeledModel, ModeLabel, ModeSignature, \
    canonical_signatures, label_clusters
from .ratio import RatioModel, RetainedModeSet, fit_ratio_model, \
    gate_modes, residuals, speed_ratio
from .simulate import DriftSpec, SynthConfig, generate
from .standardize import FeatureStandardizer, Standardization, standardize

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataSplit",
    "DriftFlag",
    "DriftMonitor",
    "DriftSpec",
    "FeatureStandardizer",
    "GaussianMixtureEM",
    "GearwatchError",
    "IngestError",
    "LabeledModel",
    "LoadResult",
    "ModelSweep",
    "ModelingError",
    "ModeLabel",
    "ModeSignature",
    "MonitoringError",
    "RatioModel",
    "RetainedModeSet",
    "ScadaRecord",
    "Standardization",
    "SynthConfig",
    "WeeklyResidual",
    "assign",
    "build_chart",
    "canonical_signatures",
    "detect_drift",
    "em_fit",
    "fit_ratio_model",
    "gate_modes",
    "generate",
    "label_clusters",
    "load_scada",
    "residuals",
    "speed_ratio",
    "split_by_year",
    "standardize",
    "sweep_k",
    "weekly_series",
    "write_records",
]
