"""Trajectory CSV and deterministic JSON output.

CSV layout (schema 1): one comment line ``# nbcollide-trajectory {json}``
carrying masses, the focus cluster and the precision, then a header row

    tau,t,t_left,x0,y0,...,x{n-1},y{n-1},vx0,vy0,...,vx{n-1},vy{n-1}

and one row per sample.  Values are written with the shortest decimal
string that round-trips at the trajectory's working precision.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .core import ClusterPartition
from .odeint import NBodyTrajectory

__all__ = ["CSV_SCHEMA", "write_trajectory_csv", "read_trajectory_csv", "to_jsonable", "dumps", "write_json"]

CSV_SCHEMA = 1
_MAGIC = "# nbcollide-trajectory "


def _fmt(x) -> str:
    return np.format_float_positional(x, unique=True, trim="-") if x == 0 else np.format_float_scientific(
        x, unique=True, trim="-")


def _columns(n):
    cols = ["tau", "t", "t_left"]
    cols += [f"{a}{i}" for i in range(n) for a in ("x", "y")]
    cols += [f"v{a}{i}" for i in range(n) for a in ("x", "y")]
    return cols


def write_trajectory_csv(traj: NBodyTrajectory, path) -> None:
    n = traj.n
    meta = {"schema": CSV_SCHEMA, "masses": [float(m) for m in traj.masses], "focus": list(traj.part.focus),
            "precision": "dd" if traj.q.dtype == np.longdouble else "double", "status": traj.status}
    buf = io.StringIO()
    buf.write(_MAGIC + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_columns(n))
    for i in range(len(traj)):
        row = [traj.tau[i], traj.t[i], traj.t_left[i], *traj.q[i].ravel(), *traj.qdot[i].ravel()]
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_trajectory_csv(path) -> NBodyTrajectory:
    """Load a trajectory written by :func:`write_trajectory_csv`.

    The result carries no dense output (``raw`` is ``None``), which the
    analysis routines do not need.
    """
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith(_MAGIC):
        raise ValueError(f"{path}: missing trajectory header line")
    meta = json.loads(text[0][len(_MAGIC):])
    if meta.get("schema") != CSV_SCHEMA:
        raise ValueError(f"{path}: unsupported trajectory schema {meta.get('schema')!r}")
    masses = np.array(meta["masses"], float)
    n = masses.size
    rows = list(csv.reader(text[1:]))
    if rows[0] != _columns(n):
        raise ValueError(f"{path}: unexpected column header")
    dt = np.longdouble if meta["precision"] == "dd" else np.float64
    data = np.array([[dt(v) for v in r] for r in rows[1:]], dtype=dt)
    if data.shape[0] < 2:
        raise ValueError(f"{path}: trajectory has fewer than two samples")
    q = data[:, 3 : 3 + 2 * n].reshape(-1, n, 2)
    qd = data[:, 3 + 2 * n :].reshape(-1, n, 2)
    part = ClusterPartition(tuple(meta["focus"]), n)
    g = list(part.focus)
    mg = masses[g].astype(dt)
    c = (mg[:, None] * q[0][g]).sum(0) / mg.sum()
    r0 = np.sqrt((mg * ((q[0][g] - c) ** 2).sum(1)).sum())
    return NBodyTrajectory(masses=masses.astype(dt), part=part, tau=data[:, 0], t=data[:, 1], t_left=data[:, 2],
                           q=q, qdot=qd, raw=None, status=meta.get("status", "unknown"), reason="loaded from csv",
                           r0=r0)


def to_jsonable(x):
    """Plain Python structure with finite floats; non-finite values become strings."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [to_jsonable(v) for v in x.tolist()] if x.dtype != np.longdouble else [
            to_jsonable(float(v)) for v in x.ravel()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        f = float(x)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if x is None or isinstance(x, str):
        return x
    if hasattr(x, "to_dict"):
        return to_jsonable(x.to_dict())
    if hasattr(x, "__dict__"):
        return to_jsonable(vars(x))
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))
