"""Collision time estimation, power-law fits and rate verification.

Near a collision of the focus cluster ``G`` at time ``T`` and point ``L_G``

    J_G / (T-t)^{4/3} -> A,          J_G' / (T-t)^{1/3} -> -4A/3,
    J_G'' (T-t)^{2/3} -> 4A/9,       U_G (T-t)^{2/3}, K_G (T-t)^{2/3} -> 2A/9,

with ``J_G = sum m_i |q_i - L_G|^2``, while the intrinsic angular momentum
obeys ``mu = O((T-t)^{7/3})`` and ``mudot = O((T-t)^{4/3})``.  These routines
measure all of that on trajectories from
:func:`nbcollide.odeint.integrate_to_collision`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ClusterPartition, grad_external, grad_potential, potential_terms
from .odeint import NBodyTrajectory

__all__ = [
    "FitError",
    "PowerLawFit",
    "TLEstimate",
    "RatioCheck",
    "RateReport",
    "ExpFit",
    "fit_power",
    "fit_exp",
    "estimate_T_L",
    "collision_series",
    "cc_residual",
    "spin_integral",
    "verify_collision_rates",
    "verify_perturbation_decay",
    "decay_chains",
    "tau_window",
    "DECAY_CHAINS",
]


class FitError(ValueError):
    """Not enough usable data for a fit."""


@dataclass(frozen=True)
class PowerLawFit:
    """``y ~ constant * x**exponent`` fitted on ``window`` of ``x = T - t``."""

    exponent: float
    constant: float
    window: tuple
    r_squared: float
    n_points: int


def fit_power(x, y, window=None, min_points: int = 10) -> PowerLawFit:
    """Least-squares line through ``(log x, log y)`` restricted to ``window``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = np.isfinite(x) & np.isfinite(y) & (x > 0)
    if window is not None:
        sel &= (x >= window[0]) & (x <= window[1])
    if np.any(y[sel] <= 0):
        raise FitError("power-law fit needs positive values")
    if sel.sum() < min_points:
        raise FitError(f"only {int(sel.sum())} points in window")
    lx, ly = np.log(x[sel]), np.log(y[sel])
    p, c = np.polyfit(lx, ly, 1)
    res = ly - (p * lx + c)
    sse = (res**2).sum()
    sst = ((ly - ly.mean()) ** 2).sum()
    # a fit exact to rounding counts as perfect even for a constant series
    exact = sse <= (64 * np.finfo(float).eps) ** 2 * (ly**2).sum()
    r2 = 1.0 if exact or sst == 0 else max(0.0, 1 - sse / sst)
    win = (float(x[sel].min()), float(x[sel].max()))
    return PowerLawFit(float(p), float(np.exp(c)), win, float(r2), int(sel.sum()))


@dataclass(frozen=True)
class ExpFit:
    """``|y| ~ C exp(-E tau)``; ``exact_zero`` marks identically vanishing terms."""

    C: float
    E: float
    n_points: int
    exact_zero: bool = False


def fit_exp(tau, y, min_points: int = 10) -> ExpFit:
    tau = np.asarray(tau, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if y.size and np.all(y == 0):
        return ExpFit(0.0, np.inf, y.size, True)
    sel = y > 0
    if sel.sum() < min_points:
        raise FitError(f"only {int(sel.sum())} nonzero points")
    slope, c = np.polyfit(tau[sel], np.log(y[sel]), 1)
    return ExpFit(float(np.exp(c)), float(-slope), int(sel.sum()))


@dataclass(frozen=True)
class TLEstimate:
    """Collision time and point.

    ``left_end`` is ``T - t`` at the final sample, so that ``T - t_i`` is
    ``traj.t_left[i] + left_end`` without cancellation.
    """

    T: float
    L_G: np.ndarray
    left_end: float
    T_uncertainty: float
    L_uncertainty: float
    a: float


def _weighted_fit(cols, y):
    """Minimise ``sum ((cols @ beta - y) / y)^2`` at the working precision of ``y``."""
    X = np.column_stack(cols) / y[:, None]
    one = np.ones_like(y)
    # normal equations; numpy.linalg does not support longdouble
    G = X.T @ X
    rhs = X.T @ one
    n = G.shape[0]
    M = np.concatenate([G, rhs[:, None]], axis=1)
    for i in range(n):
        piv = i + int(np.argmax(np.abs(M[i:, i])))
        M[[i, piv]] = M[[piv, i]]
        M[i] = M[i] / M[i, i]
        for j in range(n):
            if j != i:
                M[j] = M[j] - M[j, i] * M[i]
    return M[:, -1]


def _c_G(traj: NBodyTrajectory):
    g = list(traj.part.focus)
    m = traj.masses[g]
    c = np.einsum("i,sik->sk", m, traj.q[:, g, :]) / m.sum()
    cd = np.einsum("i,sik->sk", m, traj.qdot[:, g, :]) / m.sum()
    return c, cd


def estimate_T_L(traj: NBodyTrajectory, decades: float = 2.0) -> TLEstimate:
    """Fit ``r_G^{3/2} = a (T - t)`` on the final ``decades`` of ``r_G``.

    The fit is linear in ``(a, a (T - t_end))`` with relative weights.  It is
    repeated on a window one decade longer to quote an uncertainty.  ``L_G``
    is extrapolated from the cluster centre of mass, ``c_G(T) ~ c_G(t_end) +
    cdot_G(t_end) (T - t_end)``.
    """
    r = traj.r_G()
    if r.size < 10 or not r[-1] * 10**3 <= r.max():
        raise FitError("cluster does not collapse over three decades")
    dt = r.dtype
    y = r**1.5

    def fit(dec):
        sel = r <= r[-1] * dt.type(10.0) ** dt.type(dec)
        if sel.sum() < 8:
            raise FitError("too few samples near the collision")
        xl, yy = traj.t_left[sel], y[sel]
        a, b = _weighted_fit([xl, np.ones_like(xl)], yy)
        left = b / a
        # leading correction r^{3/2} = a x (1 + k x^{2/3}); refine twice
        for _ in range(2):
            x = np.maximum(xl + left, dt.type(0))
            a, b, _k = _weighted_fit([xl, np.ones_like(xl), x ** (dt.type(5) / 3)], yy)
            left = b / a
        return a, left

    a, left = fit(decades)
    a2, left2 = fit(decades + 1)
    c, cd = _c_G(traj)
    L = c[-1] + cd[-1] * left
    T = traj.t[-1] + left
    L_unc = float(np.abs(cd[-1] * (left - left2)).max()) + float(np.finfo(dt).eps * np.abs(c[-1]).max())
    return TLEstimate(T=T, L_G=L, left_end=left, T_uncertainty=float(abs(left - left2)),
                      L_uncertainty=L_unc, a=a)


def collision_series(traj: NBodyTrajectory, est: TLEstimate, dtype=np.float64) -> dict:
    """Cluster series needed by the rate checks, at working precision.

    Keys: ``x`` (= T - t), ``J``, ``Jdot``, ``Jddot`` (virial identity),
    ``U``, ``K``, ``H``, ``mu``, ``mudot``, ``r``.
    """
    part = traj.part
    g = list(part.focus)
    m = traj.masses
    mg = m[g]
    wd = traj.q.dtype
    L = np.asarray(est.L_G, dtype=wd)
    out = {k: [] for k in ("J", "Jdot", "Jddot", "U", "K", "H", "mu", "mudot", "r")}
    for i in range(len(traj)):
        q, v = traj.q[i], traj.qdot[i]
        dl = q[g] - L
        U_G, _, _ = potential_terms(q, m, part)
        K = 0.5 * (mg * (v[g] ** 2).sum(1)).sum()
        gext = grad_external(q, m, part)[g]
        c = (mg[:, None] * q[g]).sum(0) / mg.sum()
        cd = (mg[:, None] * v[g]).sum(0) / mg.sum()
        rel, vr = q[g] - c, v[g] - cd
        out["J"].append((mg * (dl * dl).sum(1)).sum())
        out["Jdot"].append(2 * (mg * (v[g] * dl).sum(1)).sum())
        out["Jddot"].append(4 * K - 2 * U_G + 2 * (gext * dl).sum())
        out["U"].append(U_G)
        out["K"].append(K)
        out["H"].append(K - U_G)
        out["mu"].append((mg * (rel[:, 0] * vr[:, 1] - rel[:, 1] * vr[:, 0])).sum())
        out["mudot"].append((rel[:, 0] * gext[:, 1] - rel[:, 1] * gext[:, 0]).sum())
        out["r"].append(np.sqrt((mg * (rel * rel).sum(1)).sum()))
    res = {k: np.array(v, dtype=wd).astype(dtype) for k, v in out.items()}
    res["x"] = (traj.t_left + wd.type(est.left_end)).astype(dtype)
    res["tau"] = np.asarray(traj.tau, dtype=dtype)
    return res


def cc_residual(q, masses, members, L, x):
    """``|| (2/9) m_i xi_i + dU/dxi_i ||`` with ``xi = (q - L) / x^{2/3}``."""
    g = list(members)
    q = np.asarray(q)
    xi = (q[g] - np.asarray(L, dtype=q.dtype)) / np.asarray(x, dtype=q.dtype) ** (2 / 3)
    m = np.asarray(masses, dtype=q.dtype)[g]
    res = (2 / 9) * m[:, None] * xi + grad_potential(xi, m)
    return float(np.sqrt((res * res).sum()))


def spin_integral(tau, thetap):
    """Cumulative ``S(tau) = int |theta'| dtau`` (trapezoid rule)."""
    tau = np.asarray(tau, dtype=float)
    f = np.abs(np.asarray(thetap, dtype=float))
    return np.concatenate([[0.0], np.cumsum(np.diff(tau) * (f[1:] + f[:-1]) / 2)])


@dataclass(frozen=True)
class RatioCheck:
    """One of the limits ``quantity * (T-t)^p -> coefficient * A``."""

    expected: float
    limit: float
    max_rel_dev: float


@dataclass
class RateReport:
    """Outcome of :func:`verify_collision_rates`; every entry is reported, none clamped."""

    A_hat: float
    A_reference: float
    ratio_checks: dict
    exponents: dict
    H_G_limit: float
    H_G_oscillation: float
    mu_bound: float
    mu_residual_slope: float
    mudot_bound: float
    mudot_residual_slope: float
    r_tau_slope: float
    E1: float
    E2: float
    spin_tail: Optional[float]
    cc_residual_tail: float
    cc_residual_decades: list
    window: tuple
    n_points: int
    T: float
    L_G: list
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        d = dict(self.__dict__)
        d["ratio_checks"] = {k: v.__dict__ for k, v in self.ratio_checks.items()}
        d["exponents"] = {k: v.__dict__ for k, v in self.exponents.items()}
        return d


_RATIOS = {
    # name: (series key, power of (T-t), coefficient of A)
    "J/(T-t)^(4/3)": ("J", -4 / 3, 1.0),
    "Jdot/(T-t)^(1/3)": ("Jdot", -1 / 3, -4 / 3),
    "Jddot*(T-t)^(2/3)": ("Jddot", 2 / 3, 4 / 9),
    "U*(T-t)^(2/3)": ("U", 2 / 3, 2 / 9),
    "K*(T-t)^(2/3)": ("K", 2 / 3, 2 / 9),
}

_EXPONENTS = {"J": 4 / 3, "Jdot": 1 / 3, "Jddot": -2 / 3, "U": -2 / 3, "K": -2 / 3}


def _limit_fit(x, ratio):
    # ratio = lim + b x^{2/3}
    X = np.column_stack([np.ones_like(x), x ** (2 / 3)])
    coef, *_ = np.linalg.lstsq(X, ratio, rcond=None)
    return float(coef[0])


def _residual_slope(x, y, p):
    """Growth rate of ``|y| / x^p`` towards the collision (d log / d log(1/x))."""
    sel = np.abs(y) > 0
    if sel.sum() < 3:
        return -np.inf
    slope, _ = np.polyfit(np.log(x[sel]), np.log(np.abs(y[sel]) / x[sel] ** p), 1)
    return float(-slope)


def _convergence_slope(x, y, p):
    """Slope of ``log |ratio - lim|`` against ``log(1/x)`` for ``ratio = |y| / x^p``.

    Negative when the ratio converges to its fitted limit; ``-inf`` for an
    identically vanishing or exactly constant ratio.
    """
    sel = np.abs(y) > 0
    if sel.sum() < 3:
        return -np.inf
    xs = x[sel]
    ratio = np.abs(y[sel]) / xs**p
    res = np.abs(ratio - _limit_fit(xs, ratio))
    ok = res > 1e-14 * np.abs(ratio).max()
    if ok.sum() < 3:
        return -np.inf
    slope, _ = np.polyfit(np.log(1 / xs[ok]), np.log(res[ok]), 1)
    return float(slope)


def verify_collision_rates(traj: NBodyTrajectory, est: Optional[TLEstimate] = None,
                           window=(1e-8, 1e-4), A_reference: Optional[float] = None,
                           series=None, blowup=None, subtract_mu_floor: bool = False) -> RateReport:
    """Measure every asymptotic law of the cluster on ``window`` of ``T - t``.

    ``A_reference`` (a closed-form ``A`` when known) is used for the ratio
    deviations; otherwise the fitted ``A_hat`` is.  ``blowup`` may pass a
    precomputed :class:`nbcollide.blowup.BlowupSeries` for the spin tail.

    A shot orbit keeps a residual angular momentum ``mu(T)`` set by the
    precision of the shooting parameter; once the tidal torque has died out
    it is the terminal value of ``mu``.  With ``subtract_mu_floor`` the
    ``mu`` bound is measured on ``mu - mu(T)``, the angular momentum of the
    neighbouring exact collision orbit to first order, and only samples with
    ``|mu - mu(T)| > 100 |mu(T)|`` enter the ``mu`` checks.  Raw values are
    kept in ``extras``.

    The residual slopes are the slopes of ``log |ratio - limit|`` against
    ``log(1/(T-t))`` for ``|mu| / (T-t)^{7/3}`` and ``|mudot| / (T-t)^{4/3}``;
    a negative slope means the ratio converges (so the bound is finite).
    """
    est = est or estimate_T_L(traj)
    S = dict(series or collision_series(traj, est))
    x = S["x"]
    sel = (x >= window[0]) & (x <= window[1])
    if sel.sum() < 10 or x[sel].max() < 100 * x[sel].min():
        raise FitError("window insufficient: need 10 points over two decades of T - t")
    xs = x[sel]
    A_hat = _limit_fit(xs, S["J"][sel] / xs ** (4 / 3))
    A_ref = A_hat if A_reference is None else A_reference
    checks = {}
    for name, (key, p, coef) in _RATIOS.items():
        ratio = S[key][sel] * xs**p
        expected = coef * A_ref
        checks[name] = RatioCheck(expected, _limit_fit(xs, ratio),
                                  float(np.max(np.abs(ratio / expected - 1))))
    exps = {k: fit_power(x, np.abs(S[k]), window) for k in _EXPONENTS}

    last = sel & (x <= 10 * window[0])
    H = S["H"]
    H_lim = float(H[last][-1]) if last.any() else float(H[sel][-1])
    H_osc = float(np.ptp(H[last])) if last.any() else float("nan")

    mu_raw = S["mu"]
    mu_floor = float(mu_raw[-1])
    mu = mu_raw - mu_floor if subtract_mu_floor else mu_raw
    # below ~100x the terminal residual the x^{7/3} law of mu is not resolved
    res_mu = sel & (np.abs(mu) > 100 * abs(mu_floor)) if subtract_mu_floor else sel
    if res_mu.sum() < 10:
        res_mu = sel
    xm = x[res_mu]
    mu_b = float(np.max(np.abs(mu[res_mu]) / xm ** (7 / 3)))
    mud_b = float(np.max(np.abs(S["mudot"][sel]) / xs ** (4 / 3)))
    mu_slope = _convergence_slope(xm, mu[res_mu], 7 / 3)
    mud_slope = _convergence_slope(xs, S["mudot"][sel], 4 / 3)

    tau = S["tau"][sel]
    lr = np.log(S["r"][sel])
    slope = float(np.polyfit(tau, lr, 1)[0])
    nloc = max(3, tau.size // 8)
    loc = [np.polyfit(tau[i : i + nloc], lr[i : i + nloc], 1)[0] for i in range(0, tau.size - nloc + 1, nloc)]
    E1, E2 = -float(max(loc)), -float(min(loc))

    spin = None
    if blowup is not None:
        Sint = spin_integral(blowup.tau, blowup.thetap)
        xb = blowup.t_left + float(est.left_end)
        lo = np.searchsorted(-xb, -10 * window[0])
        hi = np.searchsorted(-xb, -window[0], side="right") - 1
        spin = float(Sint[hi] - Sint[lo]) if hi > lo else 0.0

    g = traj.part.focus
    cc_term = cc_residual(traj.q[-1], traj.masses, g, est.L_G, traj.t_left[-1] + est.left_end)
    dec = []
    lx = np.log10(x[x > 0])
    for d in range(int(np.floor(lx.min())), int(np.ceil(lx.max()))):
        idx = np.nonzero((x >= 10.0**d) & (x < 10.0 ** (d + 1)))[0]
        if idx.size:
            vals = [cc_residual(traj.q[i], traj.masses, g, est.L_G, traj.t_left[i] + est.left_end) for i in idx]
            dec.append((d, float(np.median(vals))))

    return RateReport(
        A_hat=A_hat, A_reference=float(A_ref), ratio_checks=checks, exponents=exps,
        H_G_limit=H_lim, H_G_oscillation=H_osc, mu_bound=mu_b, mu_residual_slope=mu_slope,
        mudot_bound=mud_b, mudot_residual_slope=mud_slope, r_tau_slope=slope, E1=E1, E2=E2,
        spin_tail=spin, cc_residual_tail=cc_term, cc_residual_decades=dec, window=tuple(window),
        n_points=int(sel.sum()), T=float(est.T), L_G=[float(v) for v in est.L_G],
        extras={"mu_floor": mu_floor, "mu_floor_subtracted": bool(subtract_mu_floor),
                "mu_bound_raw": float(np.max(np.abs(mu_raw[sel]) / xs ** (7 / 3))),
                "mu_resolved_window": [float(xm.min()), float(xm.max())],
                "mu_growth_slope": _residual_slope(xm, mu[res_mu], 7 / 3),
                "mudot_growth_slope": _residual_slope(xs, S["mudot"][sel], 4 / 3)},
    )


def verify_perturbation_decay(series, pert: dict, tau_window=None) -> dict:
    """Exponential decay fits of the perturbation terms along a blow-up series.

    ``pert`` is the output of :func:`nbcollide.blowup.perturbation_series`.
    Returns an :class:`ExpFit` per term, including ``r`` itself so that the
    rates can be compared with the decay chains (see :func:`decay_chains`).
    """
    tau = np.asarray(series.tau, float)
    sel = np.ones_like(tau, dtype=bool)
    if tau_window is not None:
        sel = (tau >= tau_window[0]) & (tau <= tau_window[1])
    t = tau[sel]
    zero = ExpFit(0.0, np.inf, int(sel.sum()), True)
    return {
        "delta": fit_exp(t, pert["delta_norm"][sel]),
        "delta_v": fit_exp(t, pert["delta_v"][sel]),
        "delta_w": fit_exp(t, pert["delta_w_norm"][sel]) if series.s.shape[1] else zero,
        "delta_theta": fit_exp(t, pert["delta_theta"][sel]),
        "mu2_over_r": fit_exp(t, pert["mu2_over_r"][sel]),
        "r2_dUdr": fit_exp(t, pert["r2_dUdr"][sel]),
        "r": fit_exp(t, series.r[sel]),
    }


# multiples k of the decay rate E_1 of r: term = O(e^{-k E_1 tau})
DECAY_CHAINS = {"delta": 2, "delta_v": 2, "delta_w": 2, "r2_dUdr": 2, "delta_theta": 2, "mu2_over_r": 6}
SHARP_CHAINS = ("mu2_over_r",)


def decay_chains(fits: dict, tolerance: float = 0.15) -> dict:
    """Compare fitted decay rates with the chains ``O(e^{-k E_1 tau})``.

    Each entry reports ``ratio = E / (k E_1)`` with ``E_1`` the fitted rate
    of ``r``.  The bounds are one-sided, so a term passes when ``ratio >= 1 -
    tolerance``; for the sharp chain ``mu^2/r ~ r^6`` the ratio must also stay
    below ``1 + tolerance``.  Identically vanishing terms pass.
    """
    E1 = fits["r"].E
    out = {}
    for name, k in DECAY_CHAINS.items():
        f = fits.get(name)
        if f is None:
            continue
        if f.exact_zero:
            out[name] = {"E": float("inf"), "k": k, "ratio": float("inf"), "ok": True}
            continue
        ratio = f.E / (k * E1)
        ok = ratio >= 1 - tolerance and f.E > 0
        if name in SHARP_CHAINS:
            ok = ok and ratio <= 1 + tolerance
        out[name] = {"E": f.E, "k": k, "ratio": float(ratio), "ok": bool(ok)}
    return out


def tau_window(series, est: TLEstimate, window=(1e-8, 1e-4)):
    """``tau`` range of the samples of ``series`` with ``T - t`` inside ``window``."""
    x = np.asarray(series.t_left, float) + float(est.left_end)
    sel = (x >= window[0]) & (x <= window[1])
    if not sel.any():
        raise FitError("no samples in window")
    tau = np.asarray(series.tau, float)[sel]
    return float(tau.min()), float(tau.max())
