"""Sampled verification of isolating segments and shadowing.

Near a hyperbolic-ish equilibrium ``P`` of ``z' = f(z)`` the phase space is
split into a center-unstable part ``x`` and a stable part ``y``.  With the
cone constants

    mu_arrow = sup_U [ mu_log(df_y/dy) + |df_y/dx| ],
    xi_arrow = inf_U m_l(df_x/dx) - sup_U |df_x/dy|,

a perturbed orbit ``z_p' = f(z_p) + delta`` with ``|delta| <= a e^{alpha t}``
is surrounded by the tube ``W_t = z_p(t) + B_u(r e^{gamma t}) x B_s(r e^{gamma t})``.
The flow leaves ``W`` through the ``x``-sphere and enters through the
``y``-sphere once the margins below have the right sign.  Everything here is
sampled evidence, not a proof.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree
from scipy.special import ndtri
from scipy.stats import qmc

__all__ = [
    "SegmentError",
    "Split",
    "ConeConstants",
    "SegmentSpec",
    "SegmentReport",
    "ShadowResult",
    "logarithmic_norm",
    "m_l",
    "hyperbolic_split",
    "finite_difference_jacobian",
    "cone_constants",
    "delta_bound",
    "verify_segment",
    "shadow_distance",
    "spin_tail_table",
    "linear_saddle",
    "linear_saddle_selftest",
]


class SegmentError(ValueError):
    """Inconsistent split or a tube leaving the region of the cone constants."""


def logarithmic_norm(M):
    """Largest eigenvalue of the symmetric part of ``M`` (Euclidean matrix measure)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return -np.inf
    return float(np.linalg.eigvalsh((M + M.T) / 2)[-1])


def m_l(M):
    """Smallest eigenvalue of the symmetric part, ``inf_{|x|=1} Mx.x``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh((M + M.T) / 2)[0])


def _opnorm(M):
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


@dataclass(frozen=True)
class Split:
    """Adapted coordinates ``z = center + T @ (x, y)``.

    The first ``u`` columns of ``T`` span the center-unstable subspace, the
    remaining ``s`` the stable one.
    """

    T: np.ndarray
    Tinv: np.ndarray
    u: int
    s: int
    eigenvalues: np.ndarray

    def to_adapted(self, dz):
        return np.asarray(dz) @ self.Tinv.T

    def from_adapted(self, zeta):
        return np.asarray(zeta) @ self.T.T


def finite_difference_jacobian(field: Callable, z, h: float = 1e-6):
    z = np.asarray(z, dtype=float)
    n = z.size
    J = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h * max(1.0, abs(z[i]))
        J[:, i] = (np.asarray(field(z + e)) - np.asarray(field(z - e))) / (2 * e[i])
    return J


def hyperbolic_split(J, tol: float = 1e-9, dims: Optional[tuple] = None) -> Split:
    """Real eigenbasis split of ``J`` into ``Re >= -tol`` and ``Re < -tol`` blocks.

    Complex pairs contribute ``(Re v, Im v)`` columns, so each block of the
    linearisation becomes a direct sum of ``a`` and ``[[a, b], [-b, a]]``
    blocks whose symmetric parts are ``a I``.  ``dims = (u, s)`` is checked
    against the spectrum.
    """
    J = np.asarray(J, dtype=float)
    lam, V = np.linalg.eig(J)
    cols = {True: [], False: []}
    vals = {True: [], False: []}
    used = np.zeros(lam.size, bool)
    for i in np.argsort(-lam.real, kind="stable"):
        if used[i]:
            continue
        used[i] = True
        cu = bool(lam[i].real >= -tol)
        if abs(lam[i].imag) > tol:
            j = min((j for j in range(lam.size) if not used[j]), key=lambda j: abs(lam[j] - lam[i].conj()))
            used[j] = True
            v = V[:, i]
            cols[cu] += [v.real / np.linalg.norm(v.real), v.imag / np.linalg.norm(v.imag)]
            vals[cu] += [lam[i], lam[j]]
        else:
            v = V[:, i].real
            cols[cu].append(v / np.linalg.norm(v))
            vals[cu].append(lam[i].real)
    u, s = len(cols[True]), len(cols[False])
    if dims is not None and tuple(dims) != (u, s):
        raise SegmentError(f"requested split {tuple(dims)} but spectrum gives ({u}, {s})")
    T = np.column_stack(cols[True] + cols[False])
    if np.linalg.cond(T) > 1e10:
        raise SegmentError("eigenbasis is numerically singular; Jacobian not diagonalisable")
    return Split(T, np.linalg.inv(T), u, s, np.array(vals[True] + vals[False]))


@dataclass(frozen=True)
class ConeConstants:
    """Sampled cone constants on the ball of radius ``R`` about ``center``."""

    mu_arrow: float
    xi_arrow: float
    R: float
    center: np.ndarray
    split: Split
    sample_count: int
    sample_radius: float

    @property
    def holds(self) -> bool:
        return bool(self.mu_arrow < 0 and self.mu_arrow < self.xi_arrow)

    def to_dict(self):
        return {"mu_arrow": self.mu_arrow, "xi_arrow": self.xi_arrow, "R": self.R,
                "center": [float(c) for c in self.center], "split": [self.split.u, self.split.s],
                "sample_count": self.sample_count, "sample_radius": self.sample_radius, "holds": self.holds}


def _ball_points(n, count, seed):
    # quasi-random points in the closed unit ball: Gaussian directions, r = u^{1/n}
    sob = qmc.Sobol(d=n + 1, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(2, count))))
    p = sob.random_base2(m)[:count]
    p = np.clip(p, 1e-12, 1 - 1e-12)
    g = ndtri(p[:, :n])
    g /= np.linalg.norm(g, axis=1)[:, None]
    return g * p[:, n:] ** (1.0 / n)


def _sphere_points(n, count, seed):
    if n == 1:
        return np.array([[1.0], [-1.0]] * (count // 2) + [[1.0]] * (count % 2))
    sob = qmc.Sobol(d=n, scramble=True, seed=seed)
    p = np.clip(sob.random_base2(int(np.ceil(np.log2(max(2, count)))))[:count], 1e-12, 1 - 1e-12)
    g = ndtri(p)
    return g / np.linalg.norm(g, axis=1)[:, None]


def cone_constants(field: Callable, center, R: float, split: Optional[Split] = None, sample_count: int = 1024,
                   jacobian: Optional[Callable] = None, inflation: float = 0.1, seed: int = 0) -> ConeConstants:
    """Sampled ``mu_arrow`` and ``xi_arrow`` over the ball ``|zeta| <= R``.

    Samples are scrambled Sobol points in the ball of radius
    ``(1 + inflation) R`` in adapted coordinates, together with the centre
    and the ``2n`` axis points on the inflated sphere.  ``split`` defaults to
    :func:`hyperbolic_split` of the Jacobian at ``center``.
    """
    center = np.asarray(center, dtype=float)
    jac = jacobian or (lambda z: finite_difference_jacobian(field, z))
    if split is None:
        split = hyperbolic_split(jac(center))
    n, u = center.size, split.u
    if split.u + split.s != n:
        raise SegmentError("split dimensions do not match the phase space")
    rad = (1 + inflation) * R
    pts = [np.zeros(n)]
    pts += list(np.vstack([np.eye(n), -np.eye(n)]) * rad)
    pts += list(_ball_points(n, sample_count, seed) * rad)
    mu_a, mlx, nxy = -np.inf, np.inf, 0.0
    for zeta in pts:
        Jt = split.Tinv @ jac(center + split.T @ zeta) @ split.T
        Jxx, Jxy, Jyx, Jyy = Jt[:u, :u], Jt[:u, u:], Jt[u:, :u], Jt[u:, u:]
        if split.s:
            mu_a = max(mu_a, logarithmic_norm(Jyy) + _opnorm(Jyx))
        if u:
            mlx = min(mlx, m_l(Jxx))
            nxy = max(nxy, _opnorm(Jxy))
    return ConeConstants(float(mu_a), float(mlx - nxy), float(R), center, split, len(pts), float(rad))


@dataclass
class SegmentSpec:
    """Tube ``z_p(t) + B_u(r e^{gamma t}) x B_s(r e^{gamma t})``.

    ``z_p`` and ``delta`` are callables of ``t`` returning phase points and
    perturbation vectors in the original coordinates; ``delta_bound = (a,
    alpha)`` bounds ``|delta(t)| <= a e^{alpha t}``.
    """

    z_p: Callable
    delta: Callable
    r: float
    gamma: float
    t0: float
    t_end: float
    delta_bound: tuple
    cone: ConeConstants

    def __post_init__(self):
        a, alpha = self.delta_bound
        if not self.r > 0:
            raise SegmentError("tube radius must be positive")
        if not self.gamma < 0:
            raise SegmentError("gamma must be negative")
        if not alpha < self.gamma:
            raise SegmentError("need alpha < gamma")
        if not self.cone.mu_arrow < self.gamma < self.cone.xi_arrow:
            raise SegmentError("need mu_arrow < gamma < xi_arrow")
        if not self.t_end > self.t0:
            raise SegmentError("empty time interval")

    @classmethod
    def from_series(cls, t, Z, D, r, gamma, cone, delta_bound=None, t0=None, t_end=None):
        """Spec from sampled ``z_p`` (rows of ``Z``) and ``delta`` (rows of ``D``) via cubic splines."""
        t = np.asarray(t, dtype=float)
        zs = CubicSpline(t, np.asarray(Z, dtype=float), axis=0)
        ds = CubicSpline(t, np.asarray(D, dtype=float), axis=0)
        if delta_bound is None:
            delta_bound = globals()["delta_bound"](t, np.linalg.norm(D, axis=1), gamma)
        return cls(zs, ds, r, gamma, float(t[0] if t0 is None else t0), float(t[-1] if t_end is None else t_end),
                   tuple(delta_bound), cone)


def delta_bound(t, delta_norm, gamma, alpha=None):
    """``(a, alpha)`` with ``|delta(t_i)| <= a e^{alpha t_i}`` on every sample.

    ``alpha`` defaults to the least-squares decay rate of ``log |delta|``,
    capped just below ``gamma``.
    """
    t = np.asarray(t, dtype=float)
    d = np.abs(np.asarray(delta_norm, dtype=float))
    nz = d > 0
    if not nz.any():
        return 0.0, (gamma - 1.0 if alpha is None else alpha)
    if alpha is None:
        alpha = float(np.polyfit(t[nz], np.log(d[nz]), 1)[0]) if nz.sum() > 1 else gamma - 1.0
        alpha = min(alpha, gamma - 1e-3 * abs(gamma))
    a = float(np.max(d[nz] * np.exp(-alpha * t[nz])))
    return a, float(alpha)


@dataclass
class SegmentReport:
    """Sampled margins of the exit (``W^-``) and entry (``W^+``) conditions.

    ``min_exit_margin`` and ``max_entry_margin`` are taken over slices with
    ``t >= max(t_thresholds)`` (and ``t >= t_U``).  ``direct_t0`` is the
    earliest slice from which all later slices pass with the sampled margins.
    """

    min_exit_margin: float
    max_entry_margin: float
    t_thresholds: tuple
    t_U: float
    verified: bool
    sample_count: int
    direct_t0: float
    sufficient_implies_direct: bool
    lipschitz_slack: float
    conservative_verified: bool
    slices: dict = field(default_factory=dict)

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items() if k != "slices"}
        d["t_thresholds"] = list(self.t_thresholds)
        return d


def _threshold(r, gap, a, alpha, gamma):
    # smallest t with r * gap * e^{gamma t} >= a e^{alpha t}
    if a == 0:
        return -np.inf
    if gap <= 0:
        return np.inf
    return float(np.log(a / (r * gap)) / (gamma - alpha))


def _slack(points, values):
    # Lipschitz estimate along nearest neighbours times half the typical spacing
    if len(points) < 3:
        return 0.0
    tree = cKDTree(points)
    dist, idx = tree.query(points, k=2)
    d = dist[:, 1]
    ok = d > 0
    if not ok.any():
        return 0.0
    L = np.max(np.abs(values[ok] - values[idx[ok, 1]]) / d[ok])
    return float(L * np.median(d[ok]) / 2)


def verify_segment(spec: SegmentSpec, field: Callable, slices: int = 64, boundary_samples: int = 256,
                   seed: int = 0) -> SegmentReport:
    """Evaluate the exit and entry conditions on a ``(t x sphere)`` grid.

    Exit margin at ``z = z_p + T(xbar, ybar)``, ``|xbar| = rho``, ``|ybar| <= rho``::

        2 xbar . (f_x(z) - f_x(z_p) - delta_x) - 2 gamma rho^2

    and the entry analogue with the roles of ``x`` and ``y`` swapped.  Both
    must be positive (exit) and negative (entry).  The closed-form sufficient
    margins built from the cone constants are reported alongside.
    """
    cone = spec.cone
    sp = cone.split
    u, s = sp.u, sp.s
    a, alpha = spec.delta_bound
    g = spec.gamma
    ts = np.linspace(spec.t0, spec.t_end, slices)
    rho = spec.r * np.exp(g * ts)

    # t_U: first slice from which the whole tube lies in the ball of radius R
    inside = np.array([np.linalg.norm(sp.to_adapted(np.asarray(spec.z_p(t)) - cone.center)) + np.sqrt(2) * rh
                       <= cone.R for t, rh in zip(ts, rho)])
    tail = np.flatnonzero(~inside)
    if tail.size == slices:
        raise SegmentError("tube exits the cone-constant region on every slice")
    t_U = float(ts[tail[-1] + 1]) if tail.size else float(ts[0])

    t1 = _threshold(spec.r, cone.xi_arrow - g, a, alpha, g) if u else -np.inf
    t2 = _threshold(spec.r, g - cone.mu_arrow, a, alpha, g) if s else -np.inf

    sx = _sphere_points(u, boundary_samples, seed) if u else np.zeros((0, 0))
    sy = _sphere_points(s, boundary_samples, seed + 1) if s else np.zeros((0, 0))
    bx = _ball_points(u, boundary_samples, seed + 2) if u else np.zeros((boundary_samples, 0))
    by = _ball_points(s, boundary_samples, seed + 3) if s else np.zeros((boundary_samples, 0))

    exit_min = np.full(slices, np.inf)
    entry_max = np.full(slices, -np.inf)
    suff_exit = 2 * rho * (spec.r * (cone.xi_arrow - g) * np.exp(g * ts) - a * np.exp(alpha * ts))
    suff_entry = -2 * rho * (spec.r * (g - cone.mu_arrow) * np.exp(g * ts) - a * np.exp(alpha * ts))
    slack = 0.0
    for i, (t, rh) in enumerate(zip(ts, rho)):
        zp = np.asarray(spec.z_p(t), dtype=float)
        fp = sp.to_adapted(np.asarray(field(zp)))
        dl = sp.to_adapted(np.asarray(spec.delta(t)))
        if u:
            bar = np.hstack([sx * rh, by[: sx.shape[0]] * rh])
            m = np.empty(len(bar))
            for j, zb in enumerate(bar):
                fz = sp.to_adapted(np.asarray(field(zp + sp.from_adapted(zb))))
                m[j] = 2 * zb[:u] @ (fz[:u] - fp[:u] - dl[:u]) - 2 * g * rh * rh
            exit_min[i] = m.min()
            if t >= t_U:
                slack = max(slack, _slack(bar / rh, m / rh**2))
        if s:
            bar = np.hstack([bx[: sy.shape[0]] * rh, sy * rh])
            m = np.empty(len(bar))
            for j, zb in enumerate(bar):
                fz = sp.to_adapted(np.asarray(field(zp + sp.from_adapted(zb))))
                m[j] = 2 * zb[u:] @ (fz[u:] - fp[u:] - dl[u:]) - 2 * g * rh * rh
            entry_max[i] = m.max()
            if t >= t_U:
                slack = max(slack, _slack(bar / rh, m / rh**2))

    ok = (exit_min > 0) & (entry_max < 0)
    bad = np.flatnonzero(~ok & (ts >= t_U))
    direct_t0 = float(ts[bad[-1] + 1]) if bad.size and bad[-1] + 1 < slices else (
        float("inf") if bad.size else t_U)
    t_star = max(t1, t2, t_U)
    sel = ts >= t_star
    if sel.any():
        emin, nmax = float(exit_min[sel].min()), float(entry_max[sel].max())
        verified = bool(emin > 0 and nmax < 0)
        cons = bool(np.all(exit_min[sel] > slack * rho[sel] ** 2) and np.all(entry_max[sel] < -slack * rho[sel] ** 2))
    else:
        emin, nmax, verified, cons = float("nan"), float("nan"), False, False
    in_u = ts >= t_U
    suff_ok = in_u & (suff_exit > 0 if u else True) & (suff_entry < 0 if s else True)
    implies = bool(np.all(ok[suff_ok]))
    return SegmentReport(
        min_exit_margin=emin, max_entry_margin=nmax, t_thresholds=(float(t1), float(t2)), t_U=t_U,
        verified=verified, sample_count=int(slices * boundary_samples * ((u > 0) + (s > 0))),
        direct_t0=direct_t0, sufficient_implies_direct=implies, lipschitz_slack=slack,
        conservative_verified=cons,
        slices={"t": ts, "rho": rho, "exit_min": exit_min, "entry_max": entry_max,
                "sufficient_exit": suff_exit, "sufficient_entry": suff_entry},
    )


def linear_saddle(lam_u: float = 1.0, lam_s: float = -1.0):
    """Field and Jacobian of ``x' = lam_u x, y' = lam_s y``."""
    J = np.diag([lam_u, lam_s])
    return (lambda z: J @ np.asarray(z, dtype=float)), (lambda z: J)


def linear_saddle_selftest(lam_u: float = 1.0, lam_s: float = -1.0, gamma: float = -0.5, r: float = 0.3,
                           t_end: float = 10.0, slices: int = 64, boundary_samples: int = 256, seed: int = 0) -> dict:
    """Segment verification of the unperturbed linear saddle against closed forms.

    With ``z_p = 0`` and ``delta = 0`` the exit margin is exactly
    ``2 rho^2 (lam_u - gamma)`` and the entry margin ``-2 rho^2 (gamma -
    lam_s)`` with ``rho = r e^{gamma t}``.  Returns the report together with
    the largest deviation from those closed forms.
    """
    f, J = linear_saddle(lam_u, lam_s)
    cone = cone_constants(f, np.zeros(2), 1.0, jacobian=J, seed=seed)
    zero = np.zeros(2)
    spec = SegmentSpec(lambda t: zero, lambda t: zero, r, gamma, 0.0, t_end, (0.0, gamma - 1.0), cone)
    rep = verify_segment(spec, f, slices=slices, boundary_samples=boundary_samples, seed=seed)
    rho2 = rep.slices["rho"] ** 2
    dev = max(float(np.abs(rep.slices["exit_min"] - 2 * rho2 * (lam_u - gamma)).max()),
              float(np.abs(rep.slices["entry_max"] + 2 * rho2 * (gamma - lam_s)).max()))
    return {"cone": cone, "report": rep, "closed_form_deviation": dev}


@dataclass(frozen=True)
class ShadowResult:
    sup_ratio: float
    tau: np.ndarray
    distance: np.ndarray
    ratio: np.ndarray
    tail_slope: float


def shadow_distance(tau_p, Zp, tau_1, Z1, gamma: float, tail_fraction: float = 0.5) -> ShadowResult:
    """``sup_tau |z_p - z_1| e^{-gamma tau}`` on the overlap of both grids.

    ``z_1`` is linearly interpolated onto the ``tau_p`` samples that fall in
    its range.  ``tail_slope`` is the least-squares slope of ``log |z_p -
    z_1|`` over the final ``tail_fraction`` of the overlap.
    """
    tau_p = np.asarray(tau_p, dtype=float)
    tau_1 = np.asarray(tau_1, dtype=float)
    Zp = np.asarray(Zp, dtype=float).reshape(tau_p.size, -1)
    Z1 = np.asarray(Z1, dtype=float).reshape(tau_1.size, -1)
    o1 = np.argsort(tau_1)
    tau_1, Z1 = tau_1[o1], Z1[o1]
    lo, hi = max(tau_p.min(), tau_1[0]), min(tau_p.max(), tau_1[-1])
    sel = (tau_p >= lo) & (tau_p <= hi)
    if not hi > lo or sel.sum() < 2:
        raise ValueError("trajectory grids do not overlap")
    tau = tau_p[sel]
    Zi = np.column_stack([np.interp(tau, tau_1, Z1[:, j]) for j in range(Z1.shape[1])])
    d = np.linalg.norm(Zp[sel] - Zi, axis=1)
    ratio = d * np.exp(-gamma * tau)
    tail = (tau >= hi - tail_fraction * (hi - lo)) & (d > 0)
    slope = float(np.polyfit(tau[tail], np.log(d[tail]), 1)[0]) if tail.sum() >= 2 else float("nan")
    return ShadowResult(float(ratio.max()), tau, d, ratio, slope)


def spin_tail_table(tau, thetap, tau_max=None):
    """Spin tails ``S(tau_j) - S(tau_j / 2)`` over successive doublings.

    Returns a list of ``(tau_lo, tau_hi, tail)`` rows with ``tau_hi`` running
    over ``tau_max, tau_max / 2, ...`` while ``tau_hi / 2 >= tau[0]``.  For a
    converging spin angle the tails shrink as ``tau_hi`` grows.
    """
    from .asymptotics import spin_integral

    tau = np.asarray(tau, dtype=float)
    S = spin_integral(tau, thetap)
    hi = float(tau[-1] if tau_max is None else tau_max)
    rows = []
    while hi / 2 >= tau[0] and hi > 0:
        Sh = np.interp(hi, tau, S)
        Sl = np.interp(hi / 2, tau, S)
        rows.append((hi / 2, hi, float(Sh - Sl)))
        hi /= 2
        if len(rows) > 60:
            break
    return rows[::-1]
