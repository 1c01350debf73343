"""End-to-end checks built from the lower-level modules.

These are the pipelines behind the command-line tool and the acceptance
tests: rate verification of a collapse, the identity suite, spin tails,
shadowing against a reversed ejection orbit and isolating-segment
verification near a collision restpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .asymptotics import (
    FitError, RateReport, decay_chains, estimate_T_L, spin_integral, tau_window, verify_collision_rates,
    verify_perturbation_decay,
)
from .blowup import (
    BlowupSeries, ejection_reference, field_autonomous, jacobian_autonomous, mcgehee_observables,
    perturbation_series, restpoints,
)
from .cc import solve_cc
from .coords import energy_shape, mu_shape, shape_forward, shape_inverse
from .core import ClusterPartition, State, cluster_observables, mutual_distance_identity, sundman_constant
from .odeint import IntegratorConfig, NBodyTrajectory, integrate, newton_rhs
from .segment import (
    SegmentReport, SegmentSpec, cone_constants, hyperbolic_split, shadow_distance, spin_tail_table,
    verify_segment,
)

__all__ = [
    "CollapseAnalysis",
    "analyze_collapse",
    "identity_suite",
    "spin_report",
    "shadow_report",
    "restpoint_segment",
    "kepler_baseline",
]


@dataclass
class CollapseAnalysis:
    """Everything measured on one collapse run."""

    rates: RateReport
    blowup: BlowupSeries
    decay_fits: dict
    chains: dict
    tau_window: tuple
    est: object
    perturbation: dict = field(repr=False, default_factory=dict)

    def to_dict(self):
        return {
            "rates": self.rates.to_dict(),
            "decay_fits": {k: v.__dict__ for k, v in self.decay_fits.items()},
            "chains": self.chains,
            "tau_window": list(self.tau_window),
        }


def analyze_collapse(traj: NBodyTrajectory, A_reference: Optional[float] = None, window=(1e-8, 1e-4),
                     subtract_mu_floor: Optional[bool] = None) -> CollapseAnalysis:
    """Rates, perturbation decay fits and decay chains of a collapse.

    ``subtract_mu_floor`` defaults to true when the cluster has external
    bodies (shot orbits carry a residual angular momentum of rounding size).
    """
    if subtract_mu_floor is None:
        subtract_mu_floor = bool(traj.part.external)
    est = estimate_T_L(traj)
    bs = mcgehee_observables(traj)
    rep = verify_collision_rates(traj, est, window=window, A_reference=A_reference, blowup=bs,
                                 subtract_mu_floor=subtract_mu_floor)
    floor = rep.extras["mu_floor"] if subtract_mu_floor else 0.0
    pert = perturbation_series(bs, mu_offset=floor)
    tw = tau_window(bs, est, window)
    fits, chains = {}, {}
    if traj.part.external:
        fits = verify_perturbation_decay(bs, pert, tw)
        chains = decay_chains(fits)
    return CollapseAnalysis(rep, bs, fits, chains, tw, est, pert)


def _scaled(a, b, scale):
    return float(abs(a - b) / scale) if scale > 0 else float(abs(a - b))


def identity_suite(traj: NBodyTrajectory, est=None, stride: int = 1) -> dict:
    """Check the exact identities on every ``stride``-th sample.

    Positions are taken relative to the collision point ``L_G`` at working
    precision before rounding to ``float64``, so the checks do not inherit
    the quantisation of absolute coordinates.  Each entry holds the worst
    value over the samples; relative errors are measured against the natural
    scale of the quantity (``r_G |v|`` for angular momenta, ``K + U`` for
    energies, ``r_G`` for positions).
    """
    est = est or estimate_T_L(traj)
    part = traj.part
    g = list(part.focus)
    m = np.asarray(traj.masses, float)
    mg = m[g]
    M = mg.sum()
    D = sundman_constant(m, g)
    L_w = np.asarray(est.L_G, dtype=traj.q.dtype)
    out = {"schwarz_margin_min": np.inf, "sundman_margin_min": np.inf, "mutual_distance_rel": 0.0,
           "mu_three_way_rel": 0.0, "energy_shape_rel": 0.0, "roundtrip_rel": 0.0, "samples": 0,
           "sundman_D": float(D)}
    L0 = np.zeros(2)
    for i in range(0, len(traj), stride):
        q = np.asarray(traj.q[i] - L_w, float)
        v = np.asarray(traj.qdot[i], float)
        ob = cluster_observables(State(q, v), m, part, L0)
        J, Jd, K, U = ob.J_G, ob.Jdot_G, ob.K_G, ob.U_G
        # J'^2/4 <= 2 J K and sqrt(J) U >= D, reported as relative margins;
        # both are equalities for radial (resp. two-body) motion, so the
        # margins sit at rounding level there; at rest the Schwarz one is 0/0
        if J * K > 0:
            out["schwarz_margin_min"] = min(out["schwarz_margin_min"], float((2 * J * K - Jd * Jd / 4) / (2 * J * K)))
        out["sundman_margin_min"] = min(out["sundman_margin_min"], float(np.sqrt(J) * U / D - 1))
        lhs, rhs = mutual_distance_identity(q, m, part, L0)
        out["mutual_distance_rel"] = max(out["mutual_distance_rel"], _scaled(lhs, rhs, abs(lhs)))
        st = shape_forward(q[g], v[g], mg)
        vrel = v[g] - ob.cdot_G
        mscale = float((mg * np.linalg.norm(q[g] - ob.c_G, axis=1) * np.linalg.norm(vrel, axis=1)).sum())
        mscale = max(mscale, ob.r_G * np.sqrt(2 * K * M) * 1e-3)
        mus = (ob.mu, st.mu, mu_shape(st))
        out["mu_three_way_rel"] = max(out["mu_three_way_rel"],
                                      max(_scaled(a, b, mscale) for a, b in ((mus[0], mus[1]), (mus[0], mus[2]))))
        out["energy_shape_rel"] = max(out["energy_shape_rel"], _scaled(energy_shape(st), ob.H_G, K + U))
        qb, vb = shape_inverse(st)
        pos = float(np.abs(qb - q[g]).max() / max(ob.r_G / np.sqrt(M), np.abs(ob.c_G).max()))
        vs = np.sqrt(2 * K / M)
        vel = float(np.abs(vb - v[g]).max() / vs) if vs > 0 else 0.0
        out["roundtrip_rel"] = max(out["roundtrip_rel"], pos, vel)
        out["samples"] += 1
    return out


def spin_report(bs: BlowupSeries, mu_floor: float = 0.0, tau_min: Optional[float] = None) -> dict:
    """Spin tails ``S(tau) - S(tau/2)`` over doublings of ``tau``.

    Only doublings with ``tau / 2 >= tau_min`` are kept (default: the last
    three), so the table describes the collapse regime.  ``decreasing`` asks
    every tail to be at most half the previous one, or to be at rounding
    level.  ``mu_floor`` removes the residual angular momentum of a shot
    orbit from ``theta' = mu / sqrt(r)``.
    """
    thp = bs.thetap - (mu_floor / np.sqrt(bs.r) if mu_floor else 0.0)
    if tau_min is None:
        tau_min = bs.tau[-1] / 8
    rows = [r for r in spin_tail_table(bs.tau, thp) if r[0] >= tau_min * (1 - 1e-12)]
    tails = [r[2] for r in rows]
    total = float(spin_integral(bs.tau, thp)[-1])
    floor = 1e-12 * max(1.0, total)
    ok = all(b <= a / 2 or b <= floor for a, b in zip(tails, tails[1:]))
    return {"rows": [list(r) for r in rows], "decreasing": bool(ok and len(rows) >= 2), "total": total,
            "tau_min": float(tau_min)}


def shadow_report(bs: BlowupSeries, tail_fraction: float = 0.5) -> dict:
    """Distance between the phase series and the exact collision orbit through its end.

    The reference is the time-reversed ejection orbit of the autonomous
    field.  ``gamma0`` is the fitted log-distance slope; ``sup_ratio`` is
    taken at ``gamma0 / 2``.
    """
    Z = bs.phase()
    ref = ejection_reference(Z[-1], bs.tau, bs.basis)
    first = shadow_distance(bs.tau, Z, bs.tau, ref, 0.0, tail_fraction)
    g0 = first.tail_slope
    sh = shadow_distance(bs.tau, Z, bs.tau, ref, g0 / 2, tail_fraction)
    return {"gamma0": float(g0), "sup_ratio": float(sh.sup_ratio), "finite": bool(np.isfinite(sh.sup_ratio)),
            "tau": [float(bs.tau[0]), float(bs.tau[-1])]}


def restpoint_segment(bs: BlowupSeries, pert: dict, R: float = 1e-2, gamma: Optional[float] = None,
                      slices: int = 64, boundary_samples: int = 256, seed: int = 0):
    """Isolating-segment verification of a recorded orbit near its collision restpoint.

    The restpoint is the collision restpoint ``(0, -sqrt(2 V*), s*, 0)`` of
    the CC nearest to the final shape.  The perturbed orbit is the recorded
    phase series with ``delta = (0, delta_v, 0, delta_w)``.  The segment
    starts once ``z_p`` lies within ``R / 4`` of the restpoint (in adapted
    coordinates) with an initial tube radius ``R / 4``.  ``gamma`` defaults
    to half the cone constant ``mu_arrow``.

    Returns ``(cone, report)``.
    """
    basis = bs.basis
    cc = solve_cc(bs.s[-1], basis.masses, basis.order)
    P, _ = restpoints(cc.s_star, basis)

    def f(z):
        return field_autonomous(z, basis)

    def jac(z):
        return jacobian_autonomous(z, basis)

    split = hyperbolic_split(jac(P))
    cone = cone_constants(f, P, R, split, sample_count=512, jacobian=jac, seed=seed)
    if gamma is None:
        gamma = 0.5 * cone.mu_arrow
    Z = bs.phase()
    Dl = np.zeros_like(Z)
    Dl[:, 1] = pert["delta_v"]
    ns = bs.s.shape[1]
    if ns:
        Dl[:, 2 + ns :] = np.asarray(pert["delta_w"]).reshape(len(Z), ns)
    zeta = np.linalg.norm((Z - P) @ split.Tinv.T, axis=1)
    inside = np.flatnonzero(zeta < R / 4)
    if inside.size == 0:
        raise FitError("recorded orbit never enters the restpoint neighbourhood")
    i0 = inside[0]
    t0 = bs.tau[i0]
    r = (R / 4) * np.exp(-gamma * t0)
    spec = SegmentSpec.from_series(bs.tau[i0:], Z[i0:], Dl[i0:], r, gamma, cone)
    return cone, verify_segment(spec, f, slices=slices, boundary_samples=boundary_samples, seed=seed)


def kepler_baseline(periods: int = 100, rel_tol: float = 1e-12, precision: str = "double",
                    reverse_periods: int = 10) -> dict:
    """Integrator baseline on the circular Kepler problem.

    Two unit masses on a circle of separation 1 (period ``pi / sqrt(2)``).
    Reports the relative energy drift after ``periods`` orbits, the error of
    a forward-then-backward run over ``reverse_periods`` in units of
    ``rel_tol`` (the same over all ``periods`` is reported as
    ``reversibility_full_in_tol``; it grows quadratically with the span
    through the phase drift), and the worst error
    of the dense interpolant at step midpoints against a run with a 100
    times tighter tolerance, also in units of ``rel_tol``.
    """
    m = np.ones(2)
    w = np.sqrt(2.0)
    q = np.array([[-0.5, 0.0], [0.5, 0.0]])
    v = np.array([[0.0, -w / 2], [0.0, w / 2]])
    y0 = np.concatenate([q.ravel(), v.ravel()])
    P = np.pi / np.sqrt(2.0)
    rhs = newton_rhs(m)
    cfg = IntegratorConfig(rel_tol=rel_tol, abs_tol=rel_tol * 1e-2, precision=precision, max_steps=10**7)

    def energy(y):
        y = np.asarray(y, float)
        vv = y[4:].reshape(2, 2)
        d = np.linalg.norm(y[2:4] - y[0:2])
        return 0.5 * (vv * vv).sum() - 1.0 / d

    fw = integrate(rhs, y0, (0.0, periods * P), cfg)
    E0 = energy(y0)
    drift = float(max(abs(energy(y) - E0) for y in fw.y) / abs(E0))
    bw = integrate(rhs, fw.y[-1], (periods * P, 0.0), cfg, dense=False)
    rev_full = float(np.abs(np.asarray(bw.y[-1], float) - y0).max() / rel_tol)
    fw_r = integrate(rhs, y0, (0.0, reverse_periods * P), cfg, dense=False)
    bw_r = integrate(rhs, fw_r.y[-1], (reverse_periods * P, 0.0), cfg, dense=False)
    rev = float(np.abs(np.asarray(bw_r.y[-1], float) - y0).max() / rel_tol)

    span = (0.0, 2 * P)
    coarse = integrate(rhs, y0, span, cfg)
    fine = integrate(rhs, y0, span, replace(cfg, rel_tol=rel_tol * 1e-2, abs_tol=rel_tol * 1e-4))
    tm = (np.asarray(coarse.t[1:], float) + np.asarray(coarse.t[:-1], float)) / 2
    err = max(float(np.abs(np.asarray(coarse.sol(t), float) - np.asarray(fine.sol(t), float)).max()) for t in tm)
    step_err = max(float(np.abs(np.asarray(coarse.y[i], float) - np.asarray(fine.sol(coarse.t[i]), float)).max())
                   for i in range(len(coarse.t)))
    return {"periods": periods, "energy_drift_rel": drift, "reversibility_in_tol": rev,
            "reverse_periods": reverse_periods, "reversibility_full_in_tol": rev_full,
            "dense_error_in_tol": err / rel_tol, "step_error_in_tol": step_err / rel_tol,
            "steps": int(len(fw.t) - 1), "status": fw.status}

