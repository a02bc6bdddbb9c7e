"""Stage orchestration across turbines: simulate, cluster, monitor, report.

Each stage reads the previous stage's files from the output directory, so
stages can run in separate invocations. Per-turbine work is independent
and may run on a thread pool; outputs are written atomically and their
content does not depend on the worker count.
"""

from __future__ import annotations

import glob
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd

from .config import RunConfig
from .drift import DriftMonitor, weekly_series
from .errors import ConfigError, IngestError, ModelingError, MonitoringError
from .ingest import CANONICAL_COLUMNS, CANONICAL_UNITS, load_frame, \
    units_comment, write_atomic
from .mixture import assign, sweep_k
from .modes import ModeLabel, label_clusters
from .ratio import InsufficientDataError, DegenerateModeError, \
    fit_ratio_model, gate_modes, residuals
from .report import mode_stats, render_text
from .simulate import write_turbine_csvs
from .standardize import FeatureStandardizer, feature_matrix

log = logging.getLogger(__name__)

ASSIGN_COLUMNS = CANONICAL_COLUMNS + ("year_role", "cluster", "mode")
ASSIGN_UNITS = CANONICAL_UNITS + ("-", "-", "-")

SWEEP_COLUMNS = ("k", "aic", "bic", "loglik")
SWEEP_UNITS = ("-", "-", "-", "-")

DRIFT_COLUMNS = ("iso_year", "iso_week", "mean_residual", "count",
                 "center", "ucl", "lcl", "flag_rule")
DRIFT_UNITS = ("year", "week", "RPM", "-", "RPM", "RPM", "RPM", "-")


def _map_turbines(jobs: int, func, items: list):
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _csv_with_units(df: pd.DataFrame, columns, units) -> str:
    body = df.to_csv(index=False, lineterminator="\n",
                     date_format="%Y-%m-%dT%H:%M:%SZ")
    return units_comment(columns, units) + body


def _mode_slug(mode: ModeLabel) -> str:
    return re.sub(r"[^a-z0-9]+", "-", mode.value.lower()).strip("-")


# ------------------------------------------------------------- simulate


def run_simulate(cfg: RunConfig) -> dict:
    """Write one scada and one truth CSV per synthetic turbine."""
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    sim = cfg.simulate

    def work(index: int):
        return write_turbine_csvs(sim, index, out)

    results = _map_turbines(cfg.jobs, work, list(range(sim.n_turbines)))
    files = {
        tid: {"scada": os.path.basename(sp), "truth": os.path.basename(tp)}
        for tid, sp, tp in results
    }
    return {"output_dir": out, "turbines": files}


# -------------------------------------------------------------- cluster


def _load_all_inputs(cfg: RunConfig) -> pd.DataFrame:
    if not cfg.inputs:
        raise ConfigError("no input paths configured; set \"inputs\"")
    frames = []
    for path in cfg.inputs:
        frame, result = load_frame(path, cfg.profile)
        log.info("%s: %d records (%d dropped, %d duplicates)",
                 path, len(frame), result.n_dropped, result.n_duplicates)
        frames.append(frame)
    df = pd.concat(frames, ignore_index=True)
    df = df.drop_duplicates(subset=["turbine_id", "timestamp"], keep="first")
    df = df.sort_values(["turbine_id", "timestamp"], kind="mergesort")
    return df.reset_index(drop=True)


def run_cluster(cfg: RunConfig) -> dict:
    """Fit, select, and label per-turbine mixtures; write model files."""
    df = _load_all_inputs(cfg)
    years = df["timestamp"].dt.year
    keep = years.isin([cfg.train_year, cfg.validate_year])
    n_outside = int((~keep).sum())
    if n_outside:
        log.info("discarded %d records outside %d/%d", n_outside,
                 cfg.train_year, cfg.validate_year)
    df = df[keep].reset_index(drop=True)
    if df.empty or not (df["timestamp"].dt.year == cfg.train_year).any():
        raise IngestError(f"no records in training year {cfg.train_year}")

    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    turbines = sorted(df["turbine_id"].unique())

    def work(tid: str):
        sub = df[df["turbine_id"] == tid].reset_index(drop=True)
        roles = np.where(
            sub["timestamp"].dt.year.to_numpy() == cfg.train_year,
            "train", "validate",
        )
        train = sub[roles == "train"]
        if len(train) < 2:
            log.warning("%s: no usable training records; skipped", tid)
            return None

        std = FeatureStandardizer().fit(feature_matrix(train))
        sweep = sweep_k(
            std.transform(feature_matrix(train)),
            cfg.k_range,
            seed=cfg.seed,
            selection_rule=cfg.selection_rule,
            fixed_k=cfg.fixed_k,
            **cfg.em,
        )
        model = sweep.chosen_model()
        labeled = label_clusters(model, std.parameters())

        clusters, _ = assign(model, std.transform(feature_matrix(sub)))
        label_values = np.array([m.value for m in labeled.mapping])
        assign_df = sub[list(CANONICAL_COLUMNS)].copy()
        assign_df["year_role"] = roles
        assign_df["cluster"] = clusters
        assign_df["mode"] = label_values[clusters]
        write_atomic(
            os.path.join(out, f"assign_{tid}.csv"),
            _csv_with_units(assign_df, ASSIGN_COLUMNS, ASSIGN_UNITS),
        )

        sweep_df = pd.DataFrame(
            {
                "k": [e.k for e in sweep.entries],
                "aic": [e.aic for e in sweep.entries],
                "bic": [e.bic for e in sweep.entries],
                "loglik": [e.log_likelihood for e in sweep.entries],
            }
        )
        write_atomic(
            os.path.join(out, f"sweep_{tid}.csv"),
            _csv_with_units(sweep_df, SWEEP_COLUMNS, SWEEP_UNITS),
        )

        doc = {
            "turbine": tid,
            "k": model.k,
            "weights": model.weights_.tolist(),
            "means": model.means_.tolist(),
            "covariances": model.covariances_.tolist(),
            "log_likelihood": model.log_likelihood_,
            "aic": model.aic_,
            "bic": model.bic_,
            "n": model.n_,
            "n_params": model.n_params_,
            "seed": cfg.seed,
            "converged": model.converged_,
            "n_iter": model.n_iter_,
            "restart_log_likelihoods": model.restart_log_likelihoods_,
            "standardization": std.parameters().to_dict(),
            "selection": {
                "rule": cfg.selection_rule,
                "chosen_k": sweep.chosen_k,
                "k_range": [cfg.k_range[0], cfg.k_range[1]],
            },
            "sweep": [
                {"k": e.k, "aic": e.aic, "bic": e.bic,
                 "log_likelihood": e.log_likelihood}
                for e in sweep.entries
            ],
            "cluster_labels": [m.value for m in labeled.mapping],
            "match_cost": labeled.match_cost,
        }
        write_atomic(os.path.join(out, f"model_{tid}.json"), _json_text(doc))
        return {
            "turbine": tid,
            "chosen_k": sweep.chosen_k,
            "labels": [m.value for m in labeled.mapping],
        }

    results = [r for r in _map_turbines(cfg.jobs, work, turbines)
               if r is not None]
    if not results:
        raise ModelingError("no turbine produced a model")
    return {"output_dir": out, "turbines": results}


# -------------------------------------------------------------- monitor


def _discover_assignments(cfg: RunConfig) -> list[tuple[str, str]]:
    pattern = os.path.join(cfg.output_dir, "assign_*.csv")
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise MonitoringError(
            f"no cluster assignments found under {cfg.output_dir}; "
            "run the cluster stage first"
        )
    out = []
    for path in paths:
        stem = os.path.basename(path)[len("assign_"):-len(".csv")]
        out.append((stem, path))
    return out


def _chart_dict(chart: DriftMonitor) -> dict:
    return {
        "center": chart.center_,
        "sigma": chart.sigma_,
        "ucl": chart.ucl_,
        "lcl": chart.lcl_,
    }


def _drift_rows(weeks, chart, flags) -> pd.DataFrame:
    by_week: dict[tuple[int, int], list[str]] = {}
    for f in flags:
        by_week.setdefault((f.iso_year, f.iso_week), []).append(f.rule)
    return pd.DataFrame(
        {
            "iso_year": [w.iso_year for w in weeks],
            "iso_week": [w.iso_week for w in weeks],
            "mean_residual": [w.mean_residual for w in weeks],
            "count": [w.count for w in weeks],
            "center": chart.center_,
            "ucl": chart.ucl_,
            "lcl": chart.lcl_,
            "flag_rule": [
                ";".join(by_week.get((w.iso_year, w.iso_week), []))
                for w in weeks
            ],
        }
    )


def _flag_dicts(flags, mode: ModeLabel | None) -> list[dict]:
    out = []
    for f in flags:
        d = {
            "iso_year": f.iso_year,
            "iso_week": f.iso_week,
            "rule": f.rule,
            "value": f.value,
        }
        if mode is not None:
            d["mode"] = mode.value
        out.append(d)
    return out


def run_monitor(cfg: RunConfig) -> dict:
    """Fit ratio models, gate modes, build charts, and flag drift."""
    assignments = _discover_assignments(cfg)
    out = cfg.output_dir

    def work(item: tuple[str, str]) -> tuple[str, dict]:
        tid, path = item
        df = pd.read_csv(path, comment="#")
        df["timestamp"] = pd.to_datetime(df["timestamp"], utc=True)
        rotor = df["rotor_rpm_avg"].to_numpy(dtype=np.float64)
        gen = df["gen_rpm_avg"].to_numpy(dtype=np.float64)
        is_train = (df["year_role"] == "train").to_numpy()
        mode_col = df["mode"].astype(str).to_numpy()

        fitted = []
        unfit = []
        for mode in ModeLabel:
            mask = is_train & (mode_col == mode.value)
            n = int(mask.sum())
            if n == 0:
                continue
            try:
                fitted.append(
                    fit_ratio_model(rotor[mask], gen[mask], tid, mode,
                                    cfg.train_year)
                )
            except (InsufficientDataError, DegenerateModeError) as exc:
                log.warning("%s/%s not fitted: %s", tid, mode.value, exc)
                unfit.append({"mode": mode.value, "reason": str(exc), "n": n})

        gate = gate_modes(fitted, cfg.r2_threshold, tid)
        entry: dict = {
            "status": "monitored" if gate.retained else "excluded",
            "r2_threshold": cfg.r2_threshold,
            "ratio_models": [m.to_dict() for m in gate.retained],
            "rejected": [
                {"mode": mode.value, "r2": r2} for mode, r2 in gate.rejected
            ],
            "unfit": unfit,
            "flags": [],
        }
        if not gate.retained:
            return tid, entry

        resid = np.full(len(df), np.nan)
        for rm in gate.retained:
            mask = mode_col == rm.mode.value
            resid[mask] = residuals(rm, rotor[mask], gen[mask])
        observed = np.isfinite(resid)
        ts = df["timestamp"].to_numpy()

        if cfg.pooling == "pooled":
            base_mask = observed & is_train
            train_weeks = weekly_series(ts[base_mask], resid[base_mask], tid)
            all_weeks = weekly_series(ts[observed], resid[observed], tid)
            chart = DriftMonitor().fit(train_weeks)
            flags = chart.detect(all_weeks)
            write_atomic(
                os.path.join(out, f"drift_{tid}.csv"),
                _csv_with_units(_drift_rows(all_weeks, chart, flags),
                                DRIFT_COLUMNS, DRIFT_UNITS),
            )
            entry["chart"] = _chart_dict(chart)
            entry["flags"] = _flag_dicts(flags, None)
        else:
            charts = {}
            flags_out: list[dict] = []
            for rm in gate.retained:
                mask = mode_col == rm.mode.value
                base_mask = mask & is_train
                train_weeks = weekly_series(ts[base_mask], resid[base_mask],
                                            tid)
                all_weeks = weekly_series(ts[mask], resid[mask], tid)
                chart = DriftMonitor().fit(train_weeks)
                flags = chart.detect(all_weeks)
                write_atomic(
                    os.path.join(
                        out, f"drift_{tid}_{_mode_slug(rm.mode)}.csv"
                    ),
                    _csv_with_units(_drift_rows(all_weeks, chart, flags),
                                    DRIFT_COLUMNS, DRIFT_UNITS),
                )
                charts[rm.mode.value] = _chart_dict(chart)
                flags_out.extend(_flag_dicts(flags, rm.mode))
            entry["charts"] = charts
            entry["flags"] = flags_out
        return tid, entry

    results = _map_turbines(cfg.jobs, work, assignments)
    summary = {
        "train_year": cfg.train_year,
        "validate_year": cfg.validate_year,
        "pooling": cfg.pooling,
        "r2_threshold": cfg.r2_threshold,
        "turbines": {tid: entry for tid, entry in results},
    }
    write_atomic(os.path.join(out, "summary.json"), _json_text(summary))
    return summary


# --------------------------------------------------------------- report


def run_report(cfg: RunConfig) -> dict:
    """Join models, assignments, and monitoring into one report."""
    out = cfg.output_dir
    model_paths = sorted(glob.glob(os.path.join(out, "model_*.json")))
    summary_path = os.path.join(out, "summary.json")
    summary = None
    if os.path.isfile(summary_path):
        with open(summary_path) as fh:
            summary = json.load(fh)
    if not model_paths and summary is None:
        raise MonitoringError(
            f"nothing to report under {out}; run cluster or monitor first"
        )

    turbines: dict[str, dict] = {}
    for path in model_paths:
        with open(path) as fh:
            doc = json.load(fh)
        tid = doc["turbine"]
        sweep = doc.get("sweep", [])
        min_aic_k = None
        if sweep:
            min_aic_k = int(
                sweep[int(np.argmin([e["aic"] for e in sweep]))]["k"]
            )
        entry = {
            "selection": doc.get("selection"),
            "min_aic_k": min_aic_k,
            "cluster_labels": doc.get("cluster_labels"),
            "match_cost": doc.get("match_cost"),
        }
        assign_path = os.path.join(out, f"assign_{tid}.csv")
        if os.path.isfile(assign_path):
            adf = pd.read_csv(assign_path, comment="#")
            entry["mode_stats"] = [r.to_dict() for r in mode_stats(adf)]
            entry["n_records"] = int(len(adf))
        turbines[tid] = entry

    if summary is not None:
        for tid, mon in summary.get("turbines", {}).items():
            entry = turbines.setdefault(tid, {})
            entry["status"] = mon.get("status")
            entry["ratio_models"] = mon.get("ratio_models", [])
            entry["rejected"] = mon.get("rejected", [])
            entry["unfit"] = mon.get("unfit", [])
            entry["flags"] = mon.get("flags", [])
            if "chart" in mon:
                entry["chart"] = mon["chart"]
            if "charts" in mon:
                entry["charts"] = mon["charts"]

    report = {"turbines": {tid: turbines[tid] for tid in sorted(turbines)}}
    write_atomic(os.path.join(out, "report.json"), _json_text(report))
    write_atomic(os.path.join(out, "report.txt"), render_text(report))
    return report
