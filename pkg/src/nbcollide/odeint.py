"""Adaptive Dormand-Prince 8(5,3) integration with dense output.

The engine is dtype-generic: ``precision="double"`` runs in ``float64`` and
``precision="extended"`` (alias ``"dd"``) runs in ``np.longdouble``.  Each
accepted step records its exact increment, which lets callers accumulate
"time remaining" to the end of a run without cancellation.

Near a collision the Cartesian equations are integrated in the regularising
time ``tau`` with ``dt/dtau = r_G^{3/2}``, so that step sizes in ``tau`` stay
bounded while the physical step shrinks like ``T - t``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import _dop853_tableau as tab
from .core import ClusterPartition, MassSystem, SingularConfigurationError, State, accelerations

__all__ = [
    "IntegratorConfig",
    "Event",
    "DenseSegment",
    "Trajectory",
    "NBodyTrajectory",
    "ShootResult",
    "integrate",
    "newton_rhs",
    "integrate_to_collision",
    "shoot_to_collision",
    "translate_state",
]

_PRECISIONS = {"double": np.float64, "extended": np.longdouble, "dd": np.longdouble}

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 6.0
PI_BETA = 0.04
PI_ALPHA = 1.0 / 8 - 0.2 * PI_BETA


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and stopping rules.

    ``stop_ratio``, ``t_max`` and ``dtau_out`` are only used by the collision
    driver: integration stops once ``r_G`` drops below ``stop_ratio`` times its
    initial value, or physical time exceeds ``t_max``.
    """

    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_step: float = np.inf
    first_step: Optional[float] = None
    precision: str = "double"
    max_steps: int = 200_000
    stop_ratio: float = 1e-8
    t_max: float = 1e3
    dtau_out: float = 0.02

    def __post_init__(self):
        if self.precision not in _PRECISIONS:
            raise ValueError(f"unknown precision {self.precision!r}")
        if not (0 < self.rel_tol < 1) or self.abs_tol < 0:
            raise ValueError("tolerances must satisfy 0 < rel_tol < 1, abs_tol >= 0")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")

    @property
    def dtype(self):
        return np.dtype(_PRECISIONS[self.precision])


@dataclass
class Event:
    """Zero of ``fn(t, y)``; ``direction`` +1/-1 restricts the crossing sense."""

    fn: Callable
    terminal: bool = True
    direction: int = 0
    name: str = "event"


class DenseSegment:
    """7th-order interpolant on one accepted step."""

    __slots__ = ("t_old", "h", "y_old", "F")

    def __init__(self, t_old, h, y_old, F):
        self.t_old, self.h, self.y_old, self.F = t_old, h, y_old, F

    def _poly(self, t, with_derivative=False):
        x = (t - self.t_old) / self.h
        y = np.zeros_like(self.y_old)
        dy = np.zeros_like(self.y_old)
        for i, f in enumerate(self.F[::-1]):
            y = y + f
            if i % 2 == 0:
                dy = dy * x + y
                y = y * x
            else:
                dy = dy * (1 - x) - y
                y = y * (1 - x)
        return y, dy / self.h

    def delta(self, t):
        """``y(t) - y_old``, free of the cancellation in ``y(t) - y_old``."""
        return self._poly(t)[0]

    def __call__(self, t):
        return self.y_old + self._poly(t)[0]

    def derivative(self, t):
        return self._poly(t, True)[1]


@dataclass
class Trajectory:
    """Accepted steps of an integration.

    ``dy[i]`` is the exact increment of step ``i`` (``dy[0]`` is zero), so
    ``y[i] == y[i-1] + dy[i]`` up to rounding in the sum.
    """

    t: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    segments: list
    status: str
    message: str = ""
    nfev: int = 0
    events: list = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status in ("completed", "event")

    def _segment(self, t):
        if not self.segments:
            raise ValueError("trajectory has no dense output")
        tt = self.t
        forward = tt[-1] >= tt[0]
        if forward:
            i = bisect.bisect_right(tt, t) - 1
        else:
            i = len(tt) - bisect.bisect_right(tt[::-1], t) - 1
        return self.segments[min(max(i, 0), len(self.segments) - 1)]

    def sol(self, t):
        """Dense evaluation at scalar ``t``."""
        return self._segment(t)(t)

    def derivative(self, t):
        return self._segment(t).derivative(t)


def _rms(x):
    return np.sqrt(np.mean(x * x))


def _default_scale(y, y_new):
    return np.maximum(np.abs(y), np.abs(y_new))


def integrate(rhs, y0, t_span, config: IntegratorConfig = IntegratorConfig(), events: Sequence[Event] = (),
              scale: Optional[Callable] = None, dense: bool = True) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` over ``t_span``.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y) -> dy/dt`` operating on arrays of the working dtype.
    y0 : array_like
    t_span : (t0, t1)
        ``t1 < t0`` integrates backwards.
    config : IntegratorConfig
    events : sequence of Event
        Checked after every accepted step; roots are refined on the dense
        interpolant.
    scale : callable, optional
        ``scale(y, y_new)`` giving the magnitude each component's error is
        measured against (``abs_tol + rel_tol * scale``).  Defaults to
        ``max(|y|, |y_new|)``.
    dense : bool
        Keep the interpolant for every step.
    """
    dt = config.dtype
    C, A, B, E3, E5, D = tab.tableau(dt)
    t0, t1 = dt.type(t_span[0]), dt.type(t_span[1])
    y = np.asarray(y0).astype(dt)
    n = y.size
    direction = 1 if t1 >= t0 else -1
    rtol, atol = dt.type(config.rel_tol), dt.type(config.abs_tol)
    scale = scale or _default_scale
    eps = np.finfo(dt).eps
    nfev = 0

    def fun(t, yy):
        nonlocal nfev
        nfev += 1
        return np.asarray(rhs(t, yy), dtype=dt)

    t = t0
    f = fun(t, y)
    ts, ys, dys, segs, evs = [t], [y], [np.zeros_like(y)], [], []
    gvals = [ev.fn(t, y) for ev in events]

    if config.first_step is not None:
        h_abs = dt.type(config.first_step)
    else:
        sc = atol + rtol * np.abs(scale(y, y))
        d0, d1 = _rms(y / sc), _rms(f / sc)
        h0 = dt.type(1e-6) if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        f1 = fun(t + direction * h0, y + direction * h0 * f)
        d2 = _rms((f1 - f) / sc) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(dt.type(1e-6), h0 * dt.type(1e-3))
        else:
            h1 = (dt.type(0.01) / max(d1, d2)) ** (dt.type(1) / 8)
        h_abs = min(100 * h0, h1)
    h_abs = min(h_abs, dt.type(config.max_step), abs(t1 - t0))
    err_old = dt.type(1e-4)
    status, message = "completed", ""
    K = np.empty((tab.N_STAGES_EXTENDED, n), dtype=dt)

    while (t1 - t) * direction > 0:
        if len(ts) > config.max_steps:
            status, message = "max_steps", f"exceeded {config.max_steps} steps"
            break
        min_step = 10 * eps * max(abs(t), dt.type(np.finfo(np.float64).tiny))
        rejected = False
        while True:
            if h_abs < min_step:
                status, message = "step_underflow", f"step size underflow at t={float(t)!r}"
                break
            h = h_abs * direction
            if (t + h - t1) * direction > 0:
                h = t1 - t
            try:
                K[0] = f
                for s in range(1, tab.N_STAGES):
                    K[s] = fun(t + C[s] * h, y + h * (K[:s].T @ A[s, :s]))
                dy = h * (K[: tab.N_STAGES].T @ B)
                y_new = y + dy
                f_new = fun(t + h, y_new)
                ok = np.all(np.isfinite(f_new)) and np.all(np.isfinite(y_new))
            except (SingularConfigurationError, FloatingPointError, ZeroDivisionError):
                ok = False
            if not ok:
                h_abs *= dt.type(0.25)
                rejected = True
                continue
            K[tab.N_STAGES] = f_new
            sc = atol + rtol * np.abs(scale(y, y_new))
            err5 = (K[: tab.N_STAGES + 1].T @ E5) / sc
            err3 = (K[: tab.N_STAGES + 1].T @ E3) / sc
            e5, e3 = (err5 * err5).sum(), (err3 * err3).sum()
            if e5 == 0 and e3 == 0:
                err = dt.type(0)
            else:
                err = abs(h) * e5 / np.sqrt((e5 + dt.type(0.01) * e3) * n)
            if err <= 1:
                if err == 0:
                    factor = dt.type(MAX_FACTOR)
                else:
                    factor = SAFETY * err ** (-PI_ALPHA) * err_old ** PI_BETA
                    factor = min(dt.type(MAX_FACTOR), max(dt.type(MIN_FACTOR), factor))
                if rejected:
                    factor = min(factor, dt.type(1))
                err_old = max(err, dt.type(1e-4))
                h_next = h_abs * factor
                break
            h_abs *= max(dt.type(MIN_FACTOR), SAFETY * err ** (-PI_ALPHA))
            rejected = True
        if status == "step_underflow":
            break

        seg = None
        if dense or events:
            for s in range(tab.N_STAGES + 1, tab.N_STAGES_EXTENDED):
                K[s] = fun(t + C[s] * h, y + h * (K[:s].T @ A[s, :s]))
            F = np.empty((tab.INTERPOLATOR_POWER, n), dtype=dt)
            F[0] = dy
            F[1] = h * f - dy
            F[2] = 2 * dy - h * (f_new + f)
            F[3:] = h * (D @ K)
            seg = DenseSegment(t, h, y, F)

        t_new = t + h
        stop = False
        for j, ev in enumerate(events):
            g_new = ev.fn(t_new, y_new)
            g_old = gvals[j]
            gvals[j] = g_new
            up = g_old < 0 <= g_new
            down = g_old > 0 >= g_new
            if (ev.direction >= 0 and up) or (ev.direction <= 0 and down):
                gi = lambda tt, ev=ev: float(ev.fn(tt, seg(tt)))  # noqa: E731
                t_end = t + h
                if np.sign(gi(float(t_end))) == np.sign(float(g_old)):
                    # interpolant and step disagree at the end point: take the step end
                    te = t_end
                else:
                    te = dt.type(brentq(gi, float(t), float(t_end), xtol=1e-15 * max(1.0, abs(float(t)))))
                evs.append((te, ev.name))
                if ev.terminal and (not stop or (te - t_new) * direction < 0):
                    stop = True
                    t_new = te
                    stop_name = ev.name
        if stop:
            dy = seg.delta(t_new)
            y_new = y + dy
            status = "event"
            message = stop_name
        ts.append(t_new)
        ys.append(y_new)
        dys.append(dy)
        if dense:
            segs.append(seg)
        if stop:
            break
        t, y, f = t_new, y_new, f_new
        h_abs = min(h_next, dt.type(config.max_step))

    return Trajectory(
        t=np.array(ts, dtype=dt), y=np.array(ys, dtype=dt), dy=np.array(dys, dtype=dt),
        segments=segs, status=status, message=message, nfev=nfev, events=evs,
    )


def newton_rhs(masses):
    """Right-hand side for ``y = [q.ravel(), qdot.ravel()]`` in physical time."""
    m = np.asarray(masses)
    n = m.size

    def rhs(t, y):
        q = y[: 2 * n].reshape(n, 2)
        a = accelerations(q, m.astype(y.dtype, copy=False))
        return np.concatenate([y[2 * n :], a.ravel()])

    return rhs


def translate_state(state: State, shift) -> State:
    """Rigidly translate every position by ``shift``."""
    return State(state.q + np.asarray(shift, dtype=state.q.dtype), state.qdot, state.t)


@dataclass
class NBodyTrajectory:
    """Output of :func:`integrate_to_collision`.

    Samples lie on a uniform grid in the regularising time ``tau`` (which
    makes them geometric in ``T - t`` near the collision), plus the final
    state.  ``t_left`` is the physical time remaining to the final sample,
    accumulated from step increments so that it keeps full relative
    precision.
    """

    masses: np.ndarray
    part: ClusterPartition
    tau: np.ndarray
    t: np.ndarray
    t_left: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    raw: Trajectory
    status: str
    reason: str
    r0: float

    @property
    def collided(self) -> bool:
        return self.status == "collision"

    @property
    def n(self) -> int:
        return self.q.shape[1]

    def state(self, i) -> State:
        return State(self.q[i], self.qdot[i], self.t[i])

    def r_G(self):
        g = list(self.part.focus)
        m = self.masses[g].astype(self.q.dtype)
        qg = self.q[:, g, :]
        c = np.einsum("i,sik->sk", m, qg) / m.sum()
        rel = qg - c[:, None, :]
        return np.sqrt(np.einsum("i,sik,sik->s", m, rel, rel))

    def accelerations_dense(self, i):
        """``q''`` at sample ``i`` from the derivative of the interpolant."""
        n = self.n
        d = self.raw.derivative(self.tau[i])
        return (d[2 * n : 4 * n] / d[-1]).reshape(n, 2)

    def __len__(self):
        return self.tau.size


def _cluster_scale(masses, part: ClusterPartition, R0, V0):
    n = masses.size
    g = np.array(part.focus)
    inside = np.zeros(n, dtype=bool)
    inside[g] = True
    mg = masses[g]
    M = mg.sum()

    def scale(y, y_new):
        out = np.empty_like(y)
        for z, tgt in ((y, None), (y_new, out)):
            q = z[: 2 * n].reshape(n, 2)
            v = z[2 * n : 4 * n].reshape(n, 2)
            c = (mg[:, None] * q[g]).sum(0) / M
            cd = (mg[:, None] * v[g]).sum(0) / M
            rel = q[g] - c
            r = np.sqrt((mg * (rel * rel).sum(1)).sum())
            vrel = v[g] - cd
            vg = np.sqrt((mg * (vrel * vrel).sum(1)).sum() / M) + np.sqrt(M / max(r, 1e-300))
            ps = np.where(inside, 0 * r, np.sqrt((q * q).sum(1)) + R0)
            ps[g] = np.sqrt((rel * rel).sum(1)) + r
            vs = np.where(inside, 0 * r, np.sqrt((v * v).sum(1)) + V0)
            vs[g] = np.sqrt((vrel * vrel).sum(1)) + vg
            cur = np.concatenate([np.repeat(ps, 2), np.repeat(vs, 2), [r**1.5 / np.sqrt(M)]])
            if tgt is None:
                prev = cur
            else:
                out[:] = np.maximum(prev, cur)
        return out

    return scale


def _tau_rhs(masses, part: ClusterPartition):
    n = masses.size
    g = list(part.focus)
    mg = masses[g]
    M = mg.sum()

    def rhs(tau, y):
        q = y[: 2 * n].reshape(n, 2)
        v = y[2 * n : 4 * n]
        qg = q[g]
        c = (mg[:, None] * qg).sum(0) / M
        rel = qg - c
        s = (mg * (rel * rel).sum(1)).sum() ** 0.75
        a = accelerations(q, masses)
        out = np.empty_like(y)
        out[: 2 * n] = v * s
        out[2 * n : 4 * n] = a.ravel() * s
        out[-1] = s
        return out

    return rhs


def integrate_to_collision(state: State, masses, part: ClusterPartition,
                           config: IntegratorConfig = IntegratorConfig(),
                           events: Sequence[Event] = (), tau_max: float = 1e4) -> NBodyTrajectory:
    """Integrate towards a collision of the focus cluster.

    The run ends when ``r_G`` falls below ``config.stop_ratio * r_G(0)``
    (status ``"collision"``), when physical time passes ``config.t_max``
    (``"no_collision"``), at a terminal user event (``"event"``) or on step
    failure (``"step_underflow"``, ``"max_steps"``).  A partial trajectory is
    returned in every case; ``reason`` describes the outcome.

    User events receive ``(tau, y)`` with ``y = [q, qdot, t]`` flattened.
    """
    dt = config.dtype
    ms = MassSystem(np.asarray(masses, dtype=np.float64)).astype(dt)
    m = ms.masses
    n = m.size
    if state.n != n or part.n != n:
        raise ValueError("state, masses and partition disagree on n")
    q0 = np.asarray(state.q).astype(dt)
    v0 = np.asarray(state.qdot).astype(dt)
    y0 = np.concatenate([q0.ravel(), v0.ravel(), [dt.type(state.t)]])
    g = list(part.focus)
    mg = m[g]
    c0 = (mg[:, None] * q0[g]).sum(0) / mg.sum()
    r0 = np.sqrt((mg * ((q0[g] - c0) ** 2).sum(1)).sum())
    if not r0 > 0:
        raise SingularConfigurationError("initial cluster has zero size")
    R0 = np.sqrt((m * (q0 * q0).sum(1)).sum() / m.sum()) + r0
    accelerations(q0, m)  # raises on coincident bodies
    V0 = np.sqrt(m.sum() / R0)

    rhs = _tau_rhs(m, part)
    threshold = dt.type(config.stop_ratio) * r0

    def collision(tau, y):
        q = y[: 2 * n].reshape(n, 2)[g]
        c = (mg[:, None] * q).sum(0) / mg.sum()
        return np.log(np.sqrt((mg * ((q - c) ** 2).sum(1)).sum()) / threshold)

    def timeout(tau, y):
        return y[-1] - config.t_max

    evs = [Event(collision, True, -1, "collision"), Event(timeout, True, 1, "no_collision"), *events]
    # the cluster scale is strictly positive, so the tolerance is purely
    # relative; an absolute floor would dominate once r_G is small
    raw = integrate(rhs, y0, (0.0, tau_max), replace(config, abs_tol=0.0), evs,
                    scale=_cluster_scale(m, part, R0, V0))

    if raw.status == "event":
        status = raw.message
        reason = {"collision": "cluster size fell below stop threshold",
                  "no_collision": "no collision before t_max"}.get(status, f"terminal event {status}")
    elif raw.status == "completed":
        status, reason = "no_collision", "no collision before tau_max"
    else:
        status, reason = raw.status, raw.message

    # time remaining to the final accepted point, summed from the end
    inc_t = raw.dy[:, -1]
    left_steps = np.concatenate([np.cumsum(inc_t[::-1])[::-1][1:], [dt.type(0)]])

    tau_end = raw.t[-1]
    ngrid = int(np.floor(float(tau_end) / config.dtau_out))
    grid = dt.type(config.dtau_out) * np.arange(ngrid + 1, dtype=dt)
    grid = grid[grid < tau_end]
    idx = np.clip(np.searchsorted(raw.t, grid, side="right") - 1, 0, len(raw.segments) - 1)
    ys, lefts = [], []
    for tau_i, i in zip(grid, idx):
        seg = raw.segments[i]
        d = seg.delta(tau_i)
        ys.append(seg.y_old + d)
        lefts.append(left_steps[i] - d[-1])
    ys.append(raw.y[-1])
    lefts.append(dt.type(0))
    Y = np.array(ys, dtype=dt)
    taus = np.concatenate([grid, [tau_end]])
    return NBodyTrajectory(
        masses=m, part=part, tau=taus, t=Y[:, -1], t_left=np.array(lefts, dtype=dt),
        q=Y[:, : 2 * n].reshape(-1, n, 2), qdot=Y[:, 2 * n : 4 * n].reshape(-1, n, 2),
        raw=raw, status=status, reason=reason, r0=r0,
    )


@dataclass
class ShootResult:
    """Converged shooting parameter and the trajectory it produces."""

    param: float
    trajectory: NBodyTrajectory
    miss_history: list
    bracket: tuple
    shift: np.ndarray


def _default_miss(traj: NBodyTrajectory):
    g = list(traj.part.focus)
    m = traj.masses[g]
    q, v = traj.q[-1][g], traj.qdot[-1][g]
    c = (m[:, None] * q).sum(0) / m.sum()
    cd = (m[:, None] * v).sum(0) / m.sum()
    rel, vr = q - c, v - cd
    return float((m * (rel[:, 0] * vr[:, 1] - rel[:, 1] * vr[:, 0])).sum())


def _pericentre_event(masses, part: ClusterPartition, n):
    g = list(part.focus)

    def rdot(tau, y):
        m = masses[g].astype(y.dtype)
        q = y[: 2 * n].reshape(n, 2)[g]
        v = y[2 * n : 4 * n].reshape(n, 2)[g]
        c = (m[:, None] * q).sum(0) / m.sum()
        cd = (m[:, None] * v).sum(0) / m.sum()
        return (m * ((q - c) * (v - cd)).sum(1)).sum()

    return Event(rdot, True, 1, "pericentre")


def _secant_refine(f, p, dtype, max_iter: int = 8):
    p0 = dtype(p)
    f0 = dtype(f(p0))
    if f0 == 0:
        return p0
    p1 = p0 + dtype(1e-12) * max(dtype(1), abs(p0))
    f1 = dtype(f(p1))
    best, fbest = (p0, f0) if abs(f0) <= abs(f1) else (p1, f1)
    for _ in range(max_iter):
        if f1 == f0:
            break
        p2 = p1 - f1 * (p1 - p0) / (f1 - f0)
        f2 = dtype(f(p2))
        if abs(f2) < abs(fbest):
            best, fbest = p2, f2
        elif abs(f2) >= abs(fbest) and abs(p2 - best) <= 4 * np.finfo(dtype).eps * abs(best):
            break
        p0, f0, p1, f1 = p1, f1, p2, f2
        if f2 == 0:
            break
    return best


def shoot_to_collision(family: Callable[[float], State], bracket, masses, part: ClusterPartition,
                       config: IntegratorConfig = IntegratorConfig(), miss: Optional[Callable] = None,
                       events: Optional[Sequence[Event]] = None, xtol: float = 1e-15,
                       final_stop_ratio: float = 1e-11, recenter: bool = True,
                       refine: Optional[bool] = None) -> ShootResult:
    """Find a family parameter whose orbit ends in a collision of the cluster.

    Each trial orbit runs until the cluster's closest approach (or until
    ``events`` fire); ``miss(trajectory)`` must change sign across the
    bracket.  The default miss is the intrinsic angular momentum of the
    cluster at closest approach, suited to binary collisions.

    After convergence the orbit is rerun with ``final_stop_ratio``.  With
    ``recenter`` the family is then translated so that the collision happens
    near the origin, which keeps relative positions well resolved; the applied
    translation is returned as ``shift``.

    In extended precision a continuous miss function (``refine``, default:
    only for the built-in miss) is polished by secant steps with a long
    double parameter, since a double root leaves a residual angular momentum
    of about one ulp.
    """
    a, b = map(float, bracket)
    if not a < b:
        raise ValueError("bracket must be increasing")
    n = np.asarray(masses).size
    if refine is None:
        refine = miss is None
    miss = miss or _default_miss
    if events is None:
        events = [_pericentre_event(np.asarray(masses, dtype=np.float64), part, n)]
    history = []
    shift = np.zeros(2)

    def f(p):
        tr = integrate_to_collision(translate_state(family(p), shift), masses, part, config, events)
        if tr.raw.status != "event":
            raise RuntimeError(f"trial orbit failed: {tr.reason}")
        val = miss(tr)
        history.append((p, val))
        return val

    fa, fb = f(a), f(b)
    if fa == 0:
        b = a
    elif fb == 0:
        a = b
    elif np.sign(fa) == np.sign(fb):
        raise ValueError("miss function has the same sign at both bracket ends")
    else:
        a = brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    p = a
    final_cfg = replace(config, stop_ratio=final_stop_ratio)
    tr = integrate_to_collision(family(p), masses, part, final_cfg)
    if recenter and tr.collided:
        from .asymptotics import estimate_T_L

        # near the collision the relative positions are only resolved to one
        # ulp of the absolute ones, so refine and rerun about the origin
        shift = -np.asarray(estimate_T_L(tr).L_G, dtype=np.float64)
    if refine and config.dtype == np.longdouble:
        p = _secant_refine(f, p, np.longdouble)
    if recenter or refine:
        tr = integrate_to_collision(translate_state(family(p), shift), masses, part, final_cfg)
    return ShootResult(param=p, trajectory=tr, miss_history=history, bracket=tuple(map(float, bracket)), shift=shift)
