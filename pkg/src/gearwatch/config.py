"""Declarative run configuration.

One JSON document drives every subcommand; CLI flags override individual
keys. Unknown keys are rejected so typos fail loudly instead of silently
falling back to defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .simulate import DriftSpec, SynthConfig

SELECTION_RULES = ("min-aic", "fixed-k")
POOLING_MODES = ("pooled", "per-mode")

_EM_KEYS = ("tol", "max_iter", "n_restarts", "reg_scale", "kmeans_iters",
            "max_reseeds")

_SIMULATE_KEYS = ("n_turbines", "years", "slope", "noise_sigma",
                  "occupancy", "drift", "weeks_per_year")

_DRIFT_KEYS = ("turbine", "start_week", "shape", "magnitude", "end_week")


@dataclass
class RunConfig:
    """Everything a pipeline run needs to know."""

    inputs: list[str] = field(default_factory=list)
    profile: str = "edp"
    train_year: int = 2016
    validate_year: int = 2017
    k_range: tuple[int, int] = (6, 6)
    fixed_k: int = 6
    selection_rule: str = "fixed-k"
    r2_threshold: float = 0.99
    pooling: str = "pooled"
    seed: int = 0
    jobs: int = 1
    output_dir: str = "out"
    em: dict = field(default_factory=dict)
    simulate: SynthConfig = field(default_factory=SynthConfig)

    def validate(self) -> "RunConfig":
        if self.train_year == self.validate_year:
            raise ConfigError("train_year and validate_year must differ")
        lo, hi = self.k_range
        if not (1 <= lo <= hi <= 25):
            raise ConfigError(
                f"k_range must satisfy 1 <= lo <= hi <= 25, got {self.k_range}"
            )
        if self.selection_rule not in SELECTION_RULES:
            raise ConfigError(
                f"selection_rule must be one of {SELECTION_RULES}, "
                f"got {self.selection_rule!r}"
            )
        if self.selection_rule == "fixed-k" and not lo <= self.fixed_k <= hi:
            raise ConfigError(
                f"fixed_k {self.fixed_k} is outside k_range {self.k_range}"
            )
        if not 0.0 < self.r2_threshold < 1.0:
            raise ConfigError("r2_threshold must be in (0, 1)")
        if self.pooling not in POOLING_MODES:
            raise ConfigError(
                f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}"
            )
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        for key in self.em:
            if key not in _EM_KEYS:
                raise ConfigError(f"unknown em option {key!r}")
        try:
            self.simulate.validate()
        except ConfigError:
            raise
        return self


def _require_keys(d: dict, allowed, where: str) -> None:
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {where} keys: {unknown}")


def config_from_dict(data: dict) -> RunConfig:
    allowed = [f.name for f in fields(RunConfig)]
    _require_keys(data, allowed, "config")
    kwargs = dict(data)

    if "k_range" in kwargs:
        kr = kwargs["k_range"]
        if not (isinstance(kr, (list, tuple)) and len(kr) == 2):
            raise ConfigError("k_range must be a two-element list")
        kwargs["k_range"] = (int(kr[0]), int(kr[1]))
    if "inputs" in kwargs:
        if not isinstance(kwargs["inputs"], list):
            raise ConfigError("inputs must be a list of paths")
        kwargs["inputs"] = [str(p) for p in kwargs["inputs"]]
    if "em" in kwargs and not isinstance(kwargs["em"], dict):
        raise ConfigError("em must be an object")
    for key, caster in (("train_year", int), ("validate_year", int),
                        ("fixed_k", int), ("seed", int), ("jobs", int),
                        ("r2_threshold", float)):
        if key in kwargs:
            try:
                kwargs[key] = caster(kwargs[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(
                    f"bad config value for {key}: {kwargs[key]!r}"
                ) from exc

    if "simulate" in kwargs:
        sim = kwargs["simulate"]
        if not isinstance(sim, dict):
            raise ConfigError("simulate must be an object")
        _require_keys(sim, _SIMULATE_KEYS, "simulate")
        sim = dict(sim)
        drift_specs = []
        for entry in sim.pop("drift", []):
            if not isinstance(entry, dict):
                raise ConfigError("drift entries must be objects")
            _require_keys(entry, _DRIFT_KEYS, "drift")
            drift_specs.append(
                DriftSpec(
                    turbine_id=str(entry["turbine"]),
                    start_week=int(entry["start_week"]),
                    shape=str(entry.get("shape", "step")),
                    magnitude=float(entry.get("magnitude", 4.0)),
                    end_week=(None if entry.get("end_week") is None
                              else int(entry["end_week"])),
                )
            )
        if "years" in sim:
            sim["years"] = tuple(int(y) for y in sim["years"])
        if "occupancy" in sim and sim["occupancy"] is not None:
            sim["occupancy"] = tuple(float(v) for v in sim["occupancy"])
        kwargs["simulate"] = SynthConfig(drift=tuple(drift_specs), **sim)

    try:
        cfg = RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    # the generator follows the run seed unless a dedicated one was given
    cfg.simulate.seed = cfg.seed
    return cfg.validate()


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config file and apply CLI overrides.

    Args:
        path: config file path; None builds a default config.
        overrides: flat key/value pairs (seed, jobs, output_dir) that win
            over file contents.
    """
    data: dict = {}
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
    if overrides:
        for key, value in overrides.items():
            if value is not None:
                data[key] = value
    return config_from_dict(data)
