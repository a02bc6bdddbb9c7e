"""SCADA CSV ingestion: parse, validate, deduplicate, and split by year.

Input files are RFC-4180 CSV with a header row, "." decimal separator and
ISO-8601 timestamps. Only six channels are consumed (timestamp, turbine id,
wind speed, active power, rotor speed, generator speed, pitch angle); the
mapping from CSV column names to those channels is a configurable profile,
not hard-coded.

Lines starting with "#" are treated as comments so the units line emitted
by this package's own writers round-trips.
"""

from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime

import numpy as np
import pandas as pd

from .errors import IngestError

log = logging.getLogger(__name__)

# canonical column order used by every writer in this package
CANONICAL_COLUMNS = (
    "timestamp",
    "turbine_id",
    "wind_speed_avg",
    "power_avg",
    "rotor_rpm_avg",
    "gen_rpm_avg",
    "pitch_angle_avg",
)

CANONICAL_UNITS = (
    "ISO-8601 UTC",
    "-",
    "m/s",
    "kW",
    "RPM",
    "RPM",
    "deg",
)

NUMERIC_COLUMNS = CANONICAL_COLUMNS[2:]

# channels that may not be negative (power and pitch legitimately go below 0)
NONNEGATIVE_COLUMNS = ("wind_speed_avg", "rotor_rpm_avg", "gen_rpm_avg")

# Shipped column-name profiles. "edp" matches the public EDP wind-farm SCADA
# export; "canonical" is the identity mapping for files written by this
# package. The generator-speed channel of the export is assumed to be
# Gen_RPM_Avg; see README caveats.
COLUMN_PROFILES: dict[str, dict[str, str]] = {
    "edp": {
        "timestamp": "Timestamp",
        "turbine_id": "Turbine_ID",
        "wind_speed_avg": "Amb_WindSpeed_Avg",
        "power_avg": "Grd_Prod_Pwr_Avg",
        "rotor_rpm_avg": "Rtr_RPM_Avg",
        "gen_rpm_avg": "Gen_RPM_Avg",
        "pitch_angle_avg": "Blds_PitchAngle_Avg",
    },
    "canonical": {name: name for name in CANONICAL_COLUMNS},
}

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


@dataclass(frozen=True)
class ScadaRecord:
    """One 10-minute SCADA observation for one turbine.

    Invariants after validation: wind_speed_avg, rotor_rpm_avg and
    gen_rpm_avg are >= 0; all numeric fields are finite; power_avg and
    pitch_angle_avg may be negative (consumption, negative blade angle).
    """

    timestamp: datetime
    turbine_id: str
    wind_speed_avg: float
    power_avg: float
    rotor_rpm_avg: float
    gen_rpm_avg: float
    pitch_angle_avg: float


@dataclass
class LoadResult:
    """Records plus ingestion bookkeeping."""

    records: list[ScadaRecord]
    n_rows: int
    n_dropped: int
    n_duplicates: int


@dataclass
class DataSplit:
    """Train/validation partition by calendar year."""

    train: list[ScadaRecord]
    validate: list[ScadaRecord]
    n_discarded: int


def resolve_profile(profile: str | dict) -> dict[str, str]:
    """Return a column map for a profile name or pass a mapping through.

    Args:
        profile: profile name ("edp", "canonical") or an explicit map from
            canonical field names to CSV column names.

    Raises:
        IngestError: unknown profile name or incomplete mapping.
    """
    if isinstance(profile, str):
        try:
            return dict(COLUMN_PROFILES[profile])
        except KeyError:
            raise IngestError(
                f"unknown column profile {profile!r}; "
                f"available: {sorted(COLUMN_PROFILES)}"
            ) from None
    mapping = dict(profile)
    missing = [c for c in CANONICAL_COLUMNS if c not in mapping]
    if missing:
        raise IngestError(f"column profile missing fields: {missing}")
    return mapping


def load_frame(path: str, profile: str | dict = "edp") -> tuple[pd.DataFrame, LoadResult]:
    """Load and validate one SCADA CSV into a canonical DataFrame.

    The frame carries the canonical columns with the timestamp parsed as
    tz-aware UTC. Rows with unparseable or missing required values, or with
    negative wind/rotor/generator speed, are dropped and counted. Exact
    duplicates (same turbine, same timestamp) collapse to the first
    occurrence in file order. Output is sorted by (turbine_id, timestamp).

    Args:
        path: CSV file path.
        profile: column-name profile, see :func:`resolve_profile`.

    Returns:
        (frame, result) where result.records is left empty; use
        :func:`load_scada` when typed records are wanted.

    Raises:
        IngestError: missing file, missing mapped column, or more than half
            of the rows dropped (which signals a wrong schema).
    """
    mapping = resolve_profile(profile)
    if not os.path.isfile(path):
        raise IngestError(f"input file not found: {path}")
    try:
        raw = pd.read_csv(path, dtype=str, comment="#", skip_blank_lines=True)
    except Exception as exc:
        raise IngestError(f"cannot parse CSV {path}: {exc}") from exc

    for field in CANONICAL_COLUMNS:
        if mapping[field] not in raw.columns:
            raise IngestError(
                f"missing required column {mapping[field]!r} in {path}"
            )

    n_rows = len(raw)
    if n_rows == 0:
        raise IngestError(f"no data rows in {path}")

    df = pd.DataFrame(
        {field: raw[mapping[field]] for field in CANONICAL_COLUMNS},
        copy=False,
    )
    df["timestamp"] = pd.to_datetime(df["timestamp"], utc=True, errors="coerce")
    for col in NUMERIC_COLUMNS:
        try:
            # numpy's strtod is correctly rounded; to_numeric can land one
            # ulp off and break the exact round trip write_records promises
            df[col] = df[col].to_numpy(dtype=np.float64)
        except (TypeError, ValueError):
            df[col] = df[col].map(_float_or_nan).to_numpy(dtype=np.float64)

    valid = df["timestamp"].notna() & df["turbine_id"].notna()
    for col in NUMERIC_COLUMNS:
        vals = df[col].to_numpy()
        valid &= np.isfinite(vals)
    for col in NONNEGATIVE_COLUMNS:
        valid &= df[col].to_numpy() >= 0

    n_dropped = int(n_rows - valid.sum())
    if n_dropped * 2 > n_rows:
        raise IngestError(
            f"{n_dropped} of {n_rows} rows dropped in {path}; "
            "the column profile probably does not match this file"
        )
    df = df[valid]

    before = len(df)
    df = df.drop_duplicates(subset=["turbine_id", "timestamp"], keep="first")
    n_duplicates = before - len(df)

    df = df.sort_values(["turbine_id", "timestamp"], kind="mergesort")
    df = df.reset_index(drop=True)
    if n_dropped or n_duplicates:
        log.info(
            "%s: %d rows, %d dropped, %d duplicates removed",
            path, n_rows, n_dropped, n_duplicates,
        )
    return df, LoadResult([], n_rows, n_dropped, n_duplicates)


def load_scada(path: str, profile: str | dict = "edp") -> LoadResult:
    """Load one SCADA CSV into validated, deduplicated, sorted records.

    See :func:`load_frame` for the validation rules; this wrapper
    materializes typed :class:`ScadaRecord` values.
    """
    df, result = load_frame(path, profile)
    result.records = frame_to_records(df)
    return result


def frame_to_records(df: pd.DataFrame) -> list[ScadaRecord]:
    # pd.Timestamp is a datetime subclass, so rows satisfy the record type
    timestamps = list(df["timestamp"])
    cols = [df[c].to_numpy() for c in CANONICAL_COLUMNS[2:]]
    ids = df["turbine_id"].to_numpy()
    return [
        ScadaRecord(ts.to_pydatetime(), tid, *(float(c[i]) for c in cols))
        for i, (ts, tid) in enumerate(zip(timestamps, ids))
    ]


def records_to_frame(records: list[ScadaRecord]) -> pd.DataFrame:
    df = pd.DataFrame(
        {
            "timestamp": pd.to_datetime(
                [r.timestamp for r in records], utc=True
            ),
            "turbine_id": [r.turbine_id for r in records],
            "wind_speed_avg": [r.wind_speed_avg for r in records],
            "power_avg": [r.power_avg for r in records],
            "rotor_rpm_avg": [r.rotor_rpm_avg for r in records],
            "gen_rpm_avg": [r.gen_rpm_avg for r in records],
            "pitch_angle_avg": [r.pitch_angle_avg for r in records],
        }
    )
    return df


def split_by_year(
    records: list[ScadaRecord], train_year: int, validate_year: int
) -> DataSplit:
    """Partition records into train/validation calendar years.

    Records dated outside both years are discarded and counted. An empty
    train partition is fatal since no models can be fitted from it.
    """
    if not records:
        raise IngestError("no records to split")
    if train_year == validate_year:
        raise IngestError("train and validation years must differ")
    train = [r for r in records if r.timestamp.year == train_year]
    validate = [r for r in records if r.timestamp.year == validate_year]
    n_discarded = len(records) - len(train) - len(validate)
    if n_discarded:
        log.info("discarded %d records outside %d/%d", n_discarded,
                 train_year, validate_year)
    if not train:
        raise IngestError(f"no records in training year {train_year}")
    return DataSplit(train, validate, n_discarded)


def _float_or_nan(cell) -> float:
    try:
        return float(cell)
    except (TypeError, ValueError):
        return float("nan")


def _format_float(x: float) -> str:
    # repr gives the shortest string that round-trips the exact double
    return repr(float(x))


def units_comment(columns, units) -> str:
    pairs = ", ".join(f"{c}={u}" for c, u in zip(columns, units))
    return f"# units: {pairs}\n"


def write_atomic(path: str, text: str) -> None:
    """Write text to path atomically (temp file in same dir + rename)."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_records(records: list[ScadaRecord], path: str) -> None:
    """Serialize records to the canonical CSV dialect.

    Numeric cells use shortest round-trip formatting, so a load of the
    written file reproduces the exact double values.
    """
    lines = [units_comment(CANONICAL_COLUMNS, CANONICAL_UNITS)]
    lines.append(",".join(CANONICAL_COLUMNS) + "\n")
    for r in records:
        ts = r.timestamp.strftime(TIMESTAMP_FORMAT)
        lines.append(
            ",".join(
                (
                    ts,
                    r.turbine_id,
                    _format_float(r.wind_speed_avg),
                    _format_float(r.power_avg),
                    _format_float(r.rotor_rpm_avg),
                    _format_float(r.gen_rpm_avg),
                    _format_float(r.pitch_angle_avg),
                )
            )
            + "\n"
        )
    write_atomic(path, "".join(lines))
