"""Synthetic SCADA generator with known structure and injected wear drift.

Produces 10-minute streams whose operating-mode mixture, gear ratio and
noise levels are known exactly, plus a ground-truth sidecar per turbine.
This is the pipeline's end-to-end oracle: the generator's parameters are
the expected answers for clustering, regression and drift detection.

Generator speed is kinematically coupled to rotor speed in every mode
(gen = slope * rotor + scaled noise), with a per-mode noise scale chosen
so that production modes regress tightly while idling and pitch-managed
operation stay below any reasonable R-squared gate.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import date

import numpy as np
import pandas as pd

from .errors import ConfigError
from .ingest import (
    COLUMN_PROFILES,
    ScadaRecord,
    units_comment,
    write_atomic,
)
from .modes import ModeLabel

MODE_ORDER: tuple[ModeLabel, ...] = tuple(ModeLabel)

# nominal per-mode operating points (wind m/s, rotor RPM, pitch deg,
# power kW), loosely digitized from public 2 MW turbine behavior; these
# are approximations for testing, not field ground truth
MODE_MEANS = {
    ModeLabel.IDLING: (2.1, 0.8, 23.9, -5.7),
    ModeLabel.START: (3.4, 7.1, 11.0, 11.3),
    ModeLabel.GRID_CONNECTING: (5.1, 11.5, -1.1, 223.8),
    ModeLabel.SUB_RATED_PRODUCTION: (8.1, 13.9, -1.9, 923.0),
    ModeLabel.PITCH_MANAGED: (8.6, 2.5, 65.6, 84.7),
    ModeLabel.RATED_PRODUCTION: (12.6, 14.8, 4.1, 1870.1),
}

# one sixth of a plausible min-to-max span per feature
MODE_SDS = {
    ModeLabel.IDLING: (0.7, 0.7167, 0.1167, 4.3167),
    ModeLabel.START: (0.55, 1.9167, 6.1333, 24.9167),
    ModeLabel.GRID_CONNECTING: (0.6167, 0.4667, 0.5167, 96.6833),
    ModeLabel.SUB_RATED_PRODUCTION: (0.8333, 0.5167, 0.35, 269.8833),
    ModeLabel.PITCH_MANAGED: (4.0333, 2.4833, 15.4667, 305.6667),
    ModeLabel.RATED_PRODUCTION: (2.3833, 0.1, 4.1333, 113.05),
}

# generator-noise multiplier per mode: production modes follow the gear
# line tightly, idling and pitch-managed operation do not
MODE_NOISE_SCALE = {
    ModeLabel.IDLING: 25.0,
    ModeLabel.START: 3.0,
    ModeLabel.GRID_CONNECTING: 1.0,
    ModeLabel.SUB_RATED_PRODUCTION: 1.0,
    ModeLabel.PITCH_MANAGED: 100.0,
    ModeLabel.RATED_PRODUCTION: 0.3,
}

# default time share per mode (mirrors how often a mid-wind site visits
# each regime); normalized at use
MODE_WEIGHTS = {
    ModeLabel.IDLING: 26767.0,
    ModeLabel.START: 8323.0,
    ModeLabel.GRID_CONNECTING: 29548.0,
    ModeLabel.SUB_RATED_PRODUCTION: 22993.0,
    ModeLabel.PITCH_MANAGED: 3094.0,
    ModeLabel.RATED_PRODUCTION: 13958.0,
}

RECORDS_PER_DAY = 144  # 10-minute grid

TRUTH_COLUMNS = ("timestamp", "true_mode", "drift_value")
TRUTH_UNITS = ("ISO-8601 UTC", "-", "RPM")


@dataclass(frozen=True)
class DriftSpec:
    """Wear drift injected into one turbine's generator speed.

    The drift acts in the last configured year, starting on the Monday of
    the given ISO week. A step jumps to ``magnitude * noise_sigma`` at the
    start; a ramp rises linearly from the start Monday and reaches full
    magnitude at the Monday of ``end_week`` (default: the year's last ISO
    week), staying there afterwards.
    """

    turbine_id: str
    start_week: int
    shape: str = "step"
    magnitude: float = 4.0
    end_week: int | None = None


@dataclass
class SynthConfig:
    """Knobs of the synthetic farm."""

    n_turbines: int = 5
    years: tuple[int, ...] = (2021, 2022)
    seed: int = 0
    slope: float = 121.6
    noise_sigma: float = 1.0
    occupancy: tuple[float, ...] | None = None
    drift: tuple[DriftSpec, ...] = field(default_factory=tuple)
    weeks_per_year: int | None = None

    def turbine_ids(self) -> list[str]:
        return [f"T{i + 1:02d}" for i in range(self.n_turbines)]

    def occupancy_vector(self) -> np.ndarray:
        if self.occupancy is None:
            raw = np.array([MODE_WEIGHTS[m] for m in MODE_ORDER])
        else:
            raw = np.asarray(self.occupancy, dtype=np.float64)
        if raw.shape != (len(MODE_ORDER),):
            raise ConfigError(
                f"occupancy must have {len(MODE_ORDER)} entries, "
                f"got {raw.shape}"
            )
        if not np.isfinite(raw).all() or (raw < 0).any() or raw.sum() <= 0:
            raise ConfigError("occupancy must be nonnegative with a "
                              "positive sum")
        return raw / raw.sum()

    def validate(self) -> "SynthConfig":
        if self.n_turbines < 1:
            raise ConfigError("n_turbines must be >= 1")
        if len(self.years) < 1 or sorted(self.years) != list(self.years):
            raise ConfigError("years must be an ascending list of years")
        if not np.isfinite(self.slope) or self.slope <= 0:
            raise ConfigError("slope must be a positive finite number")
        if not np.isfinite(self.noise_sigma) or self.noise_sigma <= 0:
            raise ConfigError("noise_sigma must be a positive finite number")
        if self.weeks_per_year is not None and self.weeks_per_year < 1:
            raise ConfigError("weeks_per_year must be >= 1 when set")
        self.occupancy_vector()
        ids = set(self.turbine_ids())
        for spec in self.drift:
            if spec.turbine_id not in ids:
                raise ConfigError(
                    f"drift names unknown turbine {spec.turbine_id!r}"
                )
            if spec.shape not in ("step", "ramp"):
                raise ConfigError(f"unknown drift shape {spec.shape!r}")
            if not 1 <= spec.start_week <= 53:
                raise ConfigError("drift start_week must be in 1..53")
            if not np.isfinite(spec.magnitude):
                raise ConfigError("drift magnitude must be finite")
            if spec.end_week is not None and spec.end_week < spec.start_week:
                raise ConfigError("drift end_week precedes start_week")
        return self


def _year_timestamps(year: int, weeks: int | None) -> np.ndarray:
    start = np.datetime64(f"{year}-01-01T00:00", "m")
    if weeks is None:
        end = np.datetime64(f"{year + 1}-01-01T00:00", "m")
    else:
        n_days = min(weeks * 7, 366)
        end = min(
            start + np.timedelta64(n_days * 24 * 60, "m"),
            np.datetime64(f"{year + 1}-01-01T00:00", "m"),
        )
    return np.arange(start, end, np.timedelta64(10, "m"))


def _timestamps(config: SynthConfig) -> np.ndarray:
    parts = [_year_timestamps(y, config.weeks_per_year)
             for y in config.years]
    return np.concatenate(parts).astype("datetime64[s]")


def _last_iso_week(year: int) -> int:
    # Dec 28 always sits in the year's final ISO week
    return date(year, 12, 28).isocalendar()[1]


def _drift_values(config: SynthConfig, turbine_id: str,
                  ts: np.ndarray) -> np.ndarray:
    total = np.zeros(ts.shape[0])
    drift_year = config.years[-1]
    seconds = ts.astype("datetime64[s]").astype(np.int64)
    for spec in config.drift:
        if spec.turbine_id != turbine_id:
            continue
        start_day = date.fromisocalendar(drift_year, spec.start_week, 1)
        start_s = int(
            np.datetime64(start_day.isoformat() + "T00:00:00", "s").astype(np.int64)
        )
        amplitude = spec.magnitude * config.noise_sigma
        if spec.shape == "step":
            total += np.where(seconds >= start_s, amplitude, 0.0)
        else:
            end_week = spec.end_week or _last_iso_week(drift_year)
            end_day = date.fromisocalendar(drift_year, end_week, 1)
            end_s = int(
                np.datetime64(end_day.isoformat() + "T00:00:00", "s").astype(np.int64)
            )
            if end_s <= start_s:
                total += np.where(seconds >= start_s, amplitude, 0.0)
            else:
                frac = np.clip((seconds - start_s) / (end_s - start_s), 0.0, 1.0)
                total += amplitude * frac
    return total


def generate_turbine(config: SynthConfig, index: int
                     ) -> tuple[str, pd.DataFrame, pd.DataFrame]:
    """Generate one turbine's stream and its ground-truth sidecar.

    Returns (turbine_id, scada_frame, truth_frame). The scada frame uses
    canonical column names; CSV writers rename per profile. Draw order is
    fixed (modes, features, generator noise), so output depends only on
    (seed, index).
    """
    config.validate()
    turbine_id = config.turbine_ids()[index]
    rng = np.random.default_rng([config.seed, index])
    ts = _timestamps(config)
    n = ts.shape[0]
    occupancy = config.occupancy_vector()

    modes = rng.choice(len(MODE_ORDER), size=n, p=occupancy)
    means = np.array([MODE_MEANS[m] for m in MODE_ORDER])
    sds = np.array([MODE_SDS[m] for m in MODE_ORDER])
    noise_scale = np.array([MODE_NOISE_SCALE[m] for m in MODE_ORDER])

    feats = means[modes] + sds[modes] * rng.standard_normal((n, 4))
    wind = np.clip(feats[:, 0], 0.0, None)
    rotor = np.clip(feats[:, 1], 0.0, None)
    pitch = feats[:, 2]
    power = feats[:, 3]

    drift = _drift_values(config, turbine_id, ts)
    gen = (
        config.slope * rotor
        + noise_scale[modes] * config.noise_sigma * rng.standard_normal(n)
        + drift
    )
    gen = np.clip(gen, 0.0, None)

    scada = pd.DataFrame(
        {
            "timestamp": ts,
            "turbine_id": turbine_id,
            "wind_speed_avg": wind,
            "power_avg": power,
            "rotor_rpm_avg": rotor,
            "gen_rpm_avg": gen,
            "pitch_angle_avg": pitch,
        }
    )
    truth = pd.DataFrame(
        {
            "timestamp": ts,
            "true_mode": pd.Categorical.from_codes(
                modes, [m.value for m in MODE_ORDER]
            ),
            "drift_value": drift,
        }
    )
    return turbine_id, scada, truth


def generate(config: SynthConfig) -> tuple[list[ScadaRecord], pd.DataFrame]:
    """Materialize every turbine as typed records plus a combined sidecar.

    Convenience for tests and small runs; large runs stream frames via
    :func:`generate_turbine` instead.
    """
    records: list[ScadaRecord] = []
    truths = []
    for i in range(config.n_turbines):
        turbine_id, scada, truth = generate_turbine(config, i)
        stamps = pd.DatetimeIndex(scada["timestamp"]).tz_localize("UTC")
        cols = [scada[c].to_numpy() for c in
                ("wind_speed_avg", "power_avg", "rotor_rpm_avg",
                 "gen_rpm_avg", "pitch_angle_avg")]
        for j, t in enumerate(stamps):
            records.append(
                ScadaRecord(t.to_pydatetime(), turbine_id,
                            *(float(c[j]) for c in cols))
            )
        truth = truth.copy()
        truth.insert(1, "turbine_id", turbine_id)
        truths.append(truth)
    return records, pd.concat(truths, ignore_index=True)


def _csv_text(df: pd.DataFrame, columns, units, float_format: str | None
              ) -> str:
    body = df.to_csv(
        index=False,
        lineterminator="\n",
        float_format=float_format,
        date_format="%Y-%m-%dT%H:%M:%SZ",
    )
    return units_comment(columns, units) + body


def write_turbine_csvs(config: SynthConfig, index: int, output_dir: str
                       ) -> tuple[str, str, str]:
    """Write scada_<id>.csv (EDP-style columns) and truth_<id>.csv.

    Returns (turbine_id, scada_path, truth_path).
    """
    turbine_id, scada, truth = generate_turbine(config, index)
    profile = COLUMN_PROFILES["edp"]
    renamed = scada.rename(columns=profile)
    out_cols = [profile[c] for c in scada.columns]
    renamed = renamed[out_cols]
    units_by_canonical = {
        "timestamp": "ISO-8601 UTC",
        "turbine_id": "-",
        "wind_speed_avg": "m/s",
        "power_avg": "kW",
        "rotor_rpm_avg": "RPM",
        "gen_rpm_avg": "RPM",
        "pitch_angle_avg": "deg",
    }
    units = [units_by_canonical[c] for c in scada.columns]

    scada_path = os.path.join(output_dir, f"scada_{turbine_id}.csv")
    truth_path = os.path.join(output_dir, f"truth_{turbine_id}.csv")
    write_atomic(scada_path, _csv_text(renamed, out_cols, units, "%.6f"))
    write_atomic(truth_path,
                 _csv_text(truth, TRUTH_COLUMNS, TRUTH_UNITS, "%.6f"))
    return turbine_id, scada_path, truth_path
