"""Strict JSON run configuration (schema 1).

A configuration names a preset or spells out a system explicitly::

    {
      "schema": 1,
      "preset": "binary_in_3body",
      "precision": "dd",
      "integrator": {"rel_tol": 1e-13},
      "analysis": {"rates": true, "spin": true, "window": [1e-8, 1e-4]},
      "output": {"trajectory": "trajectory.csv", "summary": "summary.json"}
    }

or, instead of ``preset``, ``masses``, ``positions``, ``velocities`` and
``cluster``.  Unknown keys are rejected with the offending path in the
message.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ClusterPartition, State
from .odeint import IntegratorConfig
from .scenarios import PRESETS, Scenario, preset

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "preset_config", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

_TOP = {"schema", "name", "preset", "masses", "positions", "velocities", "cluster", "precision", "seed",
        "integrator", "analysis", "output", "segment", "A_reference"}
_INTEGRATOR = {"rel_tol", "abs_tol", "max_step", "max_steps", "stop_ratio", "t_max", "dtau_out"}
_ANALYSIS = {"rates", "perturbation", "segment", "spin", "cc_residual", "window"}
_OUTPUT = {"trajectory", "summary", "rates", "segment", "spin"}
_SEGMENT = {"R", "gamma", "slices", "boundary_samples"}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, message, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@dataclass
class RunConfig:
    scenario: Scenario
    precision: str = "dd"
    seed: int = 0
    analysis: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    segment: dict = field(default_factory=dict)


_ANALYSIS_DEFAULTS = {"rates": True, "perturbation": True, "segment": False, "spin": True, "cc_residual": True,
                      "window": [1e-8, 1e-4]}
_OUTPUT_DEFAULTS = {"trajectory": "trajectory.csv", "summary": "summary.json", "rates": "rates.json",
                    "segment": "segment.json", "spin": "spin.json"}
_SEGMENT_DEFAULTS = {"R": 1e-2, "gamma": None, "slices": 64, "boundary_samples": 256}


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError("expected an object", where)
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown field (allowed: {', '.join(sorted(allowed))})", f"{where}.{k}" if where else k)


def _number(x, where, positive=False):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not np.isfinite(x):
        raise ConfigError("expected a finite number", where)
    if positive and not x > 0:
        raise ConfigError("expected a positive number", where)
    return float(x)


def _points(x, n, where):
    if not isinstance(x, list) or len(x) != n:
        raise ConfigError(f"expected a list of {n} [x, y] pairs", where)
    out = []
    for i, p in enumerate(x):
        if not isinstance(p, list) or len(p) != 2:
            raise ConfigError("expected an [x, y] pair", f"{where}[{i}]")
        out.append([_number(p[0], f"{where}[{i}][0]"), _number(p[1], f"{where}[{i}][1]")])
    return np.array(out)


def parse_config(data: dict, precision: Optional[str] = None, seed: Optional[int] = None) -> RunConfig:
    """Validate a decoded configuration; ``precision``/``seed`` override the file."""
    _check_keys(data, _TOP, "")
    if "schema" not in data:
        raise ConfigError("missing schema version", "schema")
    if data["schema"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema {data['schema']!r} (expected {SCHEMA_VERSION})", "schema")
    prec = precision or data.get("precision", "dd")
    if prec not in ("double", "dd"):
        raise ConfigError("expected 'double' or 'dd'", "precision")
    engine = "extended" if prec == "dd" else "double"
    sd = data.get("seed", 0) if seed is None else seed
    if isinstance(sd, bool) or not isinstance(sd, int) or sd < 0:
        raise ConfigError("expected a non-negative integer", "seed")

    explicit = {"masses", "positions", "velocities", "cluster"} & data.keys()
    if "preset" in data:
        if explicit:
            raise ConfigError("give either a preset or an explicit system, not both", sorted(explicit)[0])
        if data["preset"] not in PRESETS:
            raise ConfigError(f"unknown preset {data['preset']!r}; choose from {sorted(PRESETS)}", "preset")
        sc = preset(data["preset"], engine)
    else:
        for k in ("masses", "positions", "velocities"):
            if k not in data:
                raise ConfigError("required for an explicit system", k)
        ms = data["masses"]
        if not isinstance(ms, list) or len(ms) < 2:
            raise ConfigError("expected a list of at least two masses", "masses")
        m = np.array([_number(x, f"masses[{i}]", positive=True) for i, x in enumerate(ms)])
        n = m.size
        q = _points(data["positions"], n, "positions")
        v = _points(data["velocities"], n, "velocities")
        cl = data.get("cluster", list(range(n)))
        if not isinstance(cl, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in cl):
            raise ConfigError("expected a list of body indices", "cluster")
        try:
            part = ClusterPartition(tuple(cl), n)
        except ValueError as e:
            raise ConfigError(str(e), "cluster") from None
        try:
            sc = Scenario(str(data.get("name", "explicit")), m, part, IntegratorConfig(precision=engine),
                          state=State(q, v))
        except ValueError as e:
            raise ConfigError(str(e), "positions") from None

    integ = data.get("integrator", {})
    _check_keys(integ, _INTEGRATOR, "integrator")
    kw = {}
    for k, val in integ.items():
        if k == "max_steps":
            if isinstance(val, bool) or not isinstance(val, int) or val <= 0:
                raise ConfigError("expected a positive integer", "integrator.max_steps")
            kw[k] = val
        else:
            kw[k] = _number(val, f"integrator.{k}", positive=k != "abs_tol")
    try:
        cfg = replace(sc.config, precision=engine, **kw)
    except ValueError as e:
        raise ConfigError(str(e), "integrator") from None
    sc = replace(sc, config=cfg)
    if "name" in data:
        sc = replace(sc, name=str(data["name"]))
    if "A_reference" in data:
        sc = replace(sc, A_reference=_number(data["A_reference"], "A_reference", positive=True))

    an = data.get("analysis", {})
    _check_keys(an, _ANALYSIS, "analysis")
    analysis = dict(_ANALYSIS_DEFAULTS)
    for k, val in an.items():
        if k == "window":
            if not (isinstance(val, list) and len(val) == 2):
                raise ConfigError("expected [lo, hi]", "analysis.window")
            lo, hi = (_number(x, "analysis.window", positive=True) for x in val)
            if not lo < hi:
                raise ConfigError("lo must be below hi", "analysis.window")
            analysis[k] = [lo, hi]
        elif not isinstance(val, bool):
            raise ConfigError("expected true or false", f"analysis.{k}")
        else:
            analysis[k] = val

    out = data.get("output", {})
    _check_keys(out, _OUTPUT, "output")
    output = dict(_OUTPUT_DEFAULTS)
    for k, val in out.items():
        if not isinstance(val, str) or not val:
            raise ConfigError("expected a file name", f"output.{k}")
        output[k] = val

    seg = data.get("segment", {})
    _check_keys(seg, _SEGMENT, "segment")
    segment = dict(_SEGMENT_DEFAULTS)
    for k, val in seg.items():
        if k in ("slices", "boundary_samples"):
            if isinstance(val, bool) or not isinstance(val, int) or val < 2:
                raise ConfigError("expected an integer >= 2", f"segment.{k}")
            segment[k] = val
        elif k == "gamma" and val is None:
            segment[k] = None
        else:
            segment[k] = _number(val, f"segment.{k}", positive=k == "R")
    return RunConfig(sc, prec, sd, analysis, output, segment)


def load_config(path, precision: Optional[str] = None, seed: Optional[int] = None) -> RunConfig:
    """Read and validate a configuration file; decode errors report line and column."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}",
                          f"line {e.lineno}") from None
    return parse_config(data, precision, seed)


def preset_config(name: str, precision: Optional[str] = None, seed: Optional[int] = None) -> RunConfig:
    return parse_config({"schema": SCHEMA_VERSION, "preset": name}, precision, seed)

