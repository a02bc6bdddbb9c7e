"""Run summary assembly: per-mode statistics and human-readable output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modes import SIGNATURE_FEATURES, ModeLabel

# original-unit assign-file columns backing each reported feature
_STATS_SOURCE = {
    "wind_speed": "wind_speed_avg",
    "rotor_rpm": "rotor_rpm_avg",
    "pitch_angle": "pitch_angle_avg",
    "power": "power_avg",
}


@dataclass(frozen=True)
class ModeStatsRow:
    """Count plus per-feature min/max/mean for one labeled mode."""

    mode: ModeLabel
    count: int
    stats: dict  # feature name -> {"min": , "max": , "mean": }

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "count": self.count,
            "features": {
                name: dict(vals) for name, vals in self.stats.items()
            },
        }


def mode_stats(frame, mode_column: str = "mode") -> list[ModeStatsRow]:
    """Aggregate an assignment frame into one row per mode present.

    The frame must carry original-unit feature columns plus a mode label
    column. Rows come back in label declaration order.
    """
    rows: list[ModeStatsRow] = []
    labels = frame[mode_column].astype(str)
    for mode in ModeLabel:
        mask = (labels == mode.value).to_numpy()
        n = int(mask.sum())
        if n == 0:
            continue
        stats = {}
        for feature in SIGNATURE_FEATURES:
            vals = frame.loc[mask, _STATS_SOURCE[feature]].to_numpy(
                dtype=np.float64
            )
            stats[feature] = {
                "min": float(vals.min()),
                "max": float(vals.max()),
                "mean": float(vals.mean()),
            }
        rows.append(ModeStatsRow(mode, n, stats))
    return rows


def render_text(report: dict) -> str:
    """Plain-text rendering of the report document."""
    lines: list[str] = []
    lines.append("gearwatch run report")
    lines.append("=" * 60)
    for tid in sorted(report.get("turbines", {})):
        entry = report["turbines"][tid]
        lines.append("")
        lines.append(f"turbine {tid}")
        lines.append("-" * 60)
        sel = entry.get("selection")
        if sel:
            lines.append(
                f"  clusters: k={sel['chosen_k']} ({sel['rule']}), "
                f"sweep {sel['k_range'][0]}..{sel['k_range'][1]}"
            )
        if entry.get("min_aic_k") is not None:
            lines.append(f"  min-AIC k in sweep: {entry['min_aic_k']}")
        stats = entry.get("mode_stats", [])
        if stats:
            lines.append("  operating modes (count | wind m/s | rotor RPM | "
                         "pitch deg | power kW, mean values):")
            for row in stats:
                f = row["features"]
                lines.append(
                    "    {:<18} {:>8} | {:7.2f} | {:7.2f} | {:7.2f} | {:9.1f}".format(
                        row["mode"],
                        row["count"],
                        f["wind_speed"]["mean"],
                        f["rotor_rpm"]["mean"],
                        f["pitch_angle"]["mean"],
                        f["power"]["mean"],
                    )
                )
        ratios = entry.get("ratio_models", [])
        if ratios:
            lines.append("  speed-ratio lines (gen ~ rotor, training year):")
            for rm in ratios:
                lines.append(
                    "    {:<18} slope {:10.4f}  intercept {:10.4f}  "
                    "R2 {:.6f}  n {}".format(
                        rm["mode"], rm["slope"], rm["intercept"],
                        rm["r2"], rm["n"],
                    )
                )
        rejected = entry.get("rejected", [])
        if rejected:
            for rj in rejected:
                r2 = rj.get("r2")
                shown = "n/a" if r2 is None else f"{r2:.4f}"
                lines.append(
                    f"    {rj['mode']:<18} rejected (R2 {shown})"
                )
        status = entry.get("status")
        if status:
            lines.append(f"  monitoring status: {status}")
        flags = entry.get("flags", [])
        if flags:
            lines.append("  drift flags:")
            for fl in flags:
                mode_part = f" [{fl['mode']}]" if fl.get("mode") else ""
                lines.append(
                    "    {}-W{:02d}  {}  mean {:+.4f}{}".format(
                        fl["iso_year"], fl["iso_week"], fl["rule"],
                        fl["value"], mode_part,
                    )
                )
        elif status == "monitored":
            lines.append("  drift flags: none")
    lines.append("")
    return "\n".join(lines)
