"""McGehee blow-up of a colliding cluster.

With ``v = sqrt(r) rho``, ``w = r^{3/2} omega`` and ``dtau = r^{-3/2} dt`` the
cluster obeys

    r' = v r
    v' = v^2/2 + F(s, w) - V(s)                                 + delta_v
    s' = w
    w' = -v w/2 + A^{-1} grad V + A^{-1} grad_s F(s, w)/2
         - A^{-1} (DA(s)[w]) w                                   + delta_w

which extends analytically to the collision manifold ``r = 0``.  The
perturbation couples the cluster to its angular momentum ``mu`` and to the
external bodies through ``U_ext``:

    delta_v = mu^2 / r + r^2 dU_ext/dr
    delta_w = r A^{-1} dU_ext/ds - r mudot A^{-1} B / N
              + (mu / sqrt(r)) A^{-1} (M^T - M) w,     M = D_s(B / N)

together with ``theta' = mu / sqrt(r) - Omega(s, w)/N``, ``mu' = r^{3/2} mudot``
and ``t' = r^{3/2}``; here ``mudot = dU_ext/dtheta``.  The last term of
``delta_w`` is a gyroscopic coupling that survives whenever ``mu != 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .coords import (
    JacobiBasis, best_order, dA_dir, dB_over_N, fubini_eval, grad_F, grad_V, jacobi_basis,
    potential_V, shape_forward, to_complex,
)
from .odeint import IntegratorConfig, NBodyTrajectory, integrate

__all__ = [
    "BlowupState",
    "PerturbationEval",
    "BlowupSeries",
    "pack",
    "unpack",
    "field_autonomous",
    "jacobian_autonomous",
    "field_full",
    "perturbation_eval",
    "restpoints",
    "energy_relation",
    "mcgehee_observables",
    "mcgehee_time",
    "perturbation_series",
    "ejection_reference",
]


@dataclass(frozen=True)
class BlowupState:
    """Blown-up cluster state; ``s`` and ``w`` are flat real vectors."""

    r: float
    v: float
    s: np.ndarray
    w: np.ndarray
    theta: float = 0.0
    mu: float = 0.0
    tau: float = 0.0
    t: float = 0.0

    @classmethod
    def from_shape(cls, st, tau=0.0, t=0.0) -> "BlowupState":
        r = st.r
        return cls(r, np.sqrt(r) * st.rho, np.asarray(st.s), r**1.5 * np.asarray(st.omega),
                   st.theta, st.mu, tau, t)


def pack(b: BlowupState):
    """Autonomous phase vector ``[r, v, s, w]``."""
    return np.concatenate([[b.r, b.v], b.s, b.w]).astype(float)


def unpack(z):
    z = np.asarray(z, dtype=float)
    n = (z.size - 2) // 2
    return z[0], z[1], z[2 : 2 + n], z[2 + n :]


def _solve(A, x):
    return np.linalg.solve(A, x) if x.size else x


def _autonomous_parts(r, v, s, w, basis):
    fe = fubini_eval(s, w, basis)
    V = potential_V(s, basis)
    dv = v * v / 2 + fe.F - V
    if s.size:
        rhs = grad_V(s, basis) + grad_F(s, w, basis) / 2 - dA_dir(s, w, basis)
        dw = -v * w / 2 + _solve(fe.A, rhs)
    else:
        dw = w.copy()
    return fe, V, dv, dw


def field_autonomous(z, basis: JacobiBasis):
    """Autonomous blow-up vector field on ``[r, v, s, w]``."""
    r, v, s, w = unpack(z)
    _, _, dv, dw = _autonomous_parts(r, v, s, w, basis)
    return np.concatenate([[v * r, dv], w, dw])


def jacobian_autonomous(z, basis: JacobiBasis, h: float = 1e-6):
    """Central-difference Jacobian of :func:`field_autonomous`."""
    z = np.asarray(z, dtype=float)
    n = z.size
    J = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        step = h * max(1.0, abs(z[i]))
        e[i] = step
        J[:, i] = (field_autonomous(z + e, basis) - field_autonomous(z - e, basis)) / (2 * step)
    return J


def restpoints(s_star, basis: JacobiBasis):
    """Collision (``v < 0``) and ejection (``v > 0``) rest points over ``s_star``."""
    s_star = np.asarray(s_star, dtype=float)
    V = potential_V(s_star, basis)
    zero = np.zeros_like(s_star)
    v = np.sqrt(2 * V)
    return (np.concatenate([[0.0, -v], s_star, zero]), np.concatenate([[0.0, v], s_star, zero]))


@dataclass(frozen=True)
class PerturbationEval:
    """Non-autonomous terms of the blow-up field at one state."""

    delta_v: float
    delta_w: np.ndarray
    delta_theta: float
    mudot: float
    dU_dr: float
    dU_ds: np.ndarray


def _external_derivatives(r, theta, s, c, q_ext, m_G, m_ext, basis):
    """``dU_ext/dr``, ``dU_ext/dtheta`` and ``dU_ext/ds`` at fixed ``c`` and externals."""
    s = np.asarray(s, dtype=float)
    zeta = np.concatenate([to_complex(s), [1.0]])
    ms = basis.mu_s
    N = (ms * s * s).sum() + basis.mu[-1]
    e = np.exp(1j * theta)
    z = r * e * zeta / np.sqrt(N)
    P = np.asarray(basis.P, dtype=float)
    cc = complex(c[0], c[1])
    qa = cc + P[:, :-1] @ z
    qb = np.asarray(q_ext, dtype=float)
    qb = qb[:, 0] + 1j * qb[:, 1]
    if qb.size == 0:
        return 0.0, 0.0, np.zeros_like(s)
    d = qb[None, :] - qa[:, None]
    grad = (np.asarray(m_G, float)[:, None] * np.asarray(m_ext, float)[None, :] * d / np.abs(d) ** 3).sum(1)

    def along(dz):
        return float((grad.conj() * (P[:, :-1] @ dz)).real.sum())

    dr = along(z / r) if r > 0 else along(e * zeta / np.sqrt(N))
    dth = along(1j * z)
    ds = np.empty_like(s)
    for j in range(s.size // 2):
        ej = np.zeros(zeta.size, dtype=complex)
        ej[j] = 1.0
        base = r * e / np.sqrt(N)
        ds[2 * j] = along(base * (ej - zeta * ms[2 * j] * s[2 * j] / N))
        ds[2 * j + 1] = along(base * (1j * ej - zeta * ms[2 * j] * s[2 * j + 1] / N))
    return dr, dth, ds


def perturbation_eval(b: BlowupState, c, q_ext, m_ext, basis: JacobiBasis) -> PerturbationEval:
    """Evaluate ``delta_v``, ``delta_w``, ``delta_theta = mu/sqrt(r)`` and ``mudot``.

    ``c`` is the cluster centre of mass and ``q_ext``/``m_ext`` the positions
    and masses of the external bodies, all held fixed.
    """
    r, s, w, mu = float(b.r), np.asarray(b.s, float), np.asarray(b.w, float), float(b.mu)
    m_G = np.asarray(basis.masses, float)
    dr, dth, ds = _external_derivatives(r, b.theta, s, c, q_ext, m_G, m_ext, basis)
    dv = mu * mu / r + r * r * dr
    if s.size:
        fe = fubini_eval(s, w, basis)
        M = np.asarray(dB_over_N(s, basis), float)
        rhs = r * ds - r * dth * fe.B / fe.N + mu / np.sqrt(r) * ((M.T - M) @ w)
        dw = _solve(fe.A, rhs)
    else:
        dw = np.zeros(0)
    return PerturbationEval(dv, dw, mu / np.sqrt(r), dth, dr, ds)


def field_full(b: BlowupState, c, q_ext, m_ext, basis: JacobiBasis) -> dict:
    """Full blow-up field including external and angular-momentum terms.

    Returns derivatives with respect to ``tau`` keyed by ``r, v, s, w, theta,
    mu, t``.
    """
    r, v, s, w = float(b.r), float(b.v), np.asarray(b.s, float), np.asarray(b.w, float)
    fe, _, dv, dw = _autonomous_parts(r, v, s, w, basis)
    pe = perturbation_eval(b, c, q_ext, m_ext, basis)
    return {
        "r": v * r,
        "v": dv + pe.delta_v,
        "s": w.copy(),
        "w": dw + pe.delta_w,
        "theta": pe.delta_theta - fe.Omega / fe.N,
        "mu": r**1.5 * pe.mudot,
        "t": r**1.5,
    }


def energy_relation(b: BlowupState, basis: JacobiBasis, H_G, M_G, cdot2):
    """Both sides of ``v^2/2 + F/2 - V + mu^2/(2r) = r (H_G - M_G |cdot|^2 / 2)``."""
    fe = fubini_eval(b.s, b.w, basis)
    lhs = b.v**2 / 2 + fe.F / 2 - potential_V(b.s, basis) + b.mu**2 / (2 * b.r)
    return lhs, b.r * (H_G - M_G * cdot2 / 2)


@dataclass
class BlowupSeries:
    """Blow-up observables sampled along a Cartesian trajectory.

    ``thetap`` is ``dtheta/dtau``; ``c`` and ``q_ext`` hold the cluster
    centre and the external positions needed to evaluate perturbations.
    """

    tau: np.ndarray
    t: np.ndarray
    t_left: np.ndarray
    r: np.ndarray
    v: np.ndarray
    s: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    mu: np.ndarray
    thetap: np.ndarray
    c: np.ndarray
    q_ext: np.ndarray
    m_ext: np.ndarray
    basis: JacobiBasis

    def state(self, i) -> BlowupState:
        return BlowupState(self.r[i], self.v[i], self.s[i], self.w[i], self.theta[i], self.mu[i],
                           self.tau[i], self.t[i])

    def phase(self):
        """``(n, dim)`` array of autonomous phase vectors ``[r, v, s, w]``."""
        return np.column_stack([self.r, self.v, self.s, self.w])

    def __len__(self):
        return self.tau.size


def mcgehee_time(t, r, T=None):
    """``tau(t) = int r^{-3/2} dt`` from the first sample.

    With a collision time ``T`` the quadrature runs in ``u = -log(T - t)``
    where the integrand ``r^{-3/2} (T - t)`` stays bounded.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if T is None:
        f = r**-1.5
        return np.concatenate([[0.0], np.cumsum(np.diff(t) * (f[1:] + f[:-1]) / 2)])
    left = T - t
    u = -np.log(left)
    f = r**-1.5 * left
    return np.concatenate([[0.0], np.cumsum(np.diff(u) * (f[1:] + f[:-1]) / 2)])


def mcgehee_observables(traj: NBodyTrajectory, order=None, stride: int = 1) -> BlowupSeries:
    """Blow-up observables along a trajectory from :func:`integrate_to_collision`.

    Shape coordinates are computed at the trajectory's working precision and
    then rounded to ``float64``.
    """
    g = list(traj.part.focus)
    ext = list(traj.part.external)
    mg = traj.masses[g]
    if order is None:
        order = best_order(np.asarray(traj.q[0][g], float), np.asarray(mg, float))
    idx = np.arange(0, len(traj), stride)
    if idx[-1] != len(traj) - 1:
        idx = np.append(idx, len(traj) - 1)
    rows = []
    for i in idx:
        st = shape_forward(traj.q[i][g], traj.qdot[i][g], mg, order)
        r = st.r
        rows.append((float(r), float(np.sqrt(r) * st.rho), np.asarray(st.s, float),
                     np.asarray(r**1.5 * st.omega, float), float(st.theta), float(st.mu),
                     float(r**1.5 * st.thetadot), np.asarray(st.c, float)))
    r, v, s, w, th, mu, thp, c = (list(x) for x in zip(*rows))
    k = len(g)
    basis = jacobi_basis(np.asarray(mg, float), order)
    return BlowupSeries(
        tau=np.asarray(traj.tau[idx], float), t=np.asarray(traj.t[idx], float),
        t_left=np.asarray(traj.t_left[idx], float), r=np.array(r), v=np.array(v),
        s=np.array(s).reshape(len(idx), 2 * (k - 2)), w=np.array(w).reshape(len(idx), 2 * (k - 2)),
        theta=np.unwrap(np.array(th)), mu=np.array(mu), thetap=np.array(thp), c=np.array(c),
        q_ext=np.asarray(traj.q[idx][:, ext, :], float), m_ext=np.asarray(traj.masses[ext], float),
        basis=basis,
    )


def perturbation_series(series: BlowupSeries, mu_offset: float = 0.0) -> dict:
    """Perturbation terms at every sample of ``series``.

    ``mu_offset`` is subtracted from the angular momentum first (see
    :func:`nbcollide.asymptotics.verify_collision_rates` on the residual
    angular momentum of shot orbits).
    """
    out = {"delta_v": [], "delta_w": [], "delta_theta": [], "mudot": [], "delta_w_norm": [],
           "r2_dUdr": [], "mu2_over_r": [], "delta_norm": []}
    for i in range(len(series)):
        st = series.state(i)
        if mu_offset:
            st = replace(st, mu=st.mu - mu_offset)
        pe = perturbation_eval(st, series.c[i], series.q_ext[i], series.m_ext, series.basis)
        r = series.r[i]
        out["r2_dUdr"].append(r * r * pe.dU_dr)
        out["mu2_over_r"].append(st.mu ** 2 / r)
        out["delta_norm"].append(float(np.sqrt(pe.delta_v**2 + np.sum(np.square(pe.delta_w)))))
        out["delta_v"].append(pe.delta_v)
        out["delta_w"].append(pe.delta_w)
        out["delta_theta"].append(pe.delta_theta)
        out["mudot"].append(pe.mudot)
        out["delta_w_norm"].append(float(np.linalg.norm(pe.delta_w)))
    return {k: np.array(v) for k, v in out.items()}


def ejection_reference(z_end, tau_grid, basis: JacobiBasis, rel_tol: float = 1e-12):
    """Exact collision orbit of the autonomous field through ``z_end``.

    Built as an ejection orbit from the time-reversed terminal state
    ``(r, -v, s, -w)``, integrated forward and reversed back.  Returns phase
    vectors at ``tau_grid`` (increasing, ending at the terminal time).
    """
    tau_grid = np.asarray(tau_grid, float)
    r, v, s, w = unpack(z_end)
    flip = np.concatenate([[r, -v], s, -w])
    n = s.size
    sigma_end = tau_grid[-1] - tau_grid[0]
    tr = integrate(lambda t, z: field_autonomous(z, basis), flip, (0.0, sigma_end),
                   IntegratorConfig(rel_tol=rel_tol, abs_tol=1e-300))
    if tr.status != "completed":
        raise RuntimeError(f"ejection integration failed: {tr.message}")
    out = np.empty((tau_grid.size, flip.size))
    for i, tg in enumerate(tau_grid):
        y = tr.sol(tau_grid[-1] - tg)
        out[i] = y
        out[i, 1] = -y[1]
        out[i, 2 + n :] = -y[2 + n :]
    return out
