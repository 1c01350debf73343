"""Jacobi coordinates and the projective shape chart of a cluster.

A cluster of ``k`` bodies is described by ``k - 1`` complex Jacobi vectors
``z_j`` and its centre of mass ``c``.  With the reduced masses ``mu_j`` the
mass metric is ``<<u, v>> = sum_j mu_j conj(u_j) v_j`` and

    z = r exp(i theta) (s, 1) / ||(s, 1)||,

where ``r = ||z||``, ``theta = arg z_{k-1}`` and ``s_j = z_j / z_{k-1}``.
Shape points ``s`` and their velocities ``omega`` are exposed as flat real
vectors ``(Re s_1, Im s_1, Re s_2, ...)`` of length ``2(k-2)``.

Writing ``N = ||(s, 1)||^2`` and ``<<(s, 1), (omega, 0)>> = G + i Omega``,
the kinetic energy splits as

    K_rel = rho^2/2 + mu^2/(2 r^2) + (r^2/2) F(s, omega),
    F = ||omega||^2 / N - (G^2 + Omega^2) / N^2 = omega^T A(s) omega,

and the potential is ``U = V(s) / r`` with ``V(s) = ||(s, 1)|| U(s, 1)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "ChartError",
    "JacobiBasis",
    "JacobiFrame",
    "ShapeState",
    "FubiniEval",
    "jacobi_basis",
    "jacobi_forward",
    "jacobi_inverse",
    "best_order",
    "shape_forward",
    "shape_inverse",
    "shape_velocity",
    "fubini_eval",
    "fubini_matrix_polarized",
    "potential_V",
    "grad_V",
    "hess_V",
    "grad_F",
    "dA_dir",
    "dB_over_N",
    "energy_shape",
    "mu_shape",
    "to_complex",
    "to_real",
]


class ChartError(ValueError):
    """The last Jacobi vector is too small for the chart to be reliable."""


def to_complex(x):
    x = np.asarray(x)
    return x[0::2] + 1j * x[1::2]


def to_real(z):
    z = np.asarray(z)
    out = np.empty(2 * z.size, dtype=z.real.dtype)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


@dataclass(frozen=True, eq=False)
class JacobiBasis:
    """Linear algebra of sequential Jacobi coordinates for fixed masses.

    ``order`` lists cluster-local body indices in the order they are added.
    ``P[a, j]`` expresses body ``a`` (original cluster index) through the
    Jacobi vectors (``j < k-1``) and the centre of mass (``j = k-1``).
    ``pair_coef[p]`` gives ``q_a - q_b`` for ``pairs[p] = (a, b)`` in terms of
    the Jacobi vectors alone.
    """

    masses: np.ndarray
    order: tuple
    mu: np.ndarray
    P: np.ndarray
    pairs: tuple
    pair_coef: np.ndarray
    pair_mass: np.ndarray

    @property
    def k(self) -> int:
        return self.masses.size

    @property
    def mu_s(self):
        """Reduced masses of the shape coordinates, repeated per real component."""
        return np.repeat(self.mu[:-1], 2)


def _forward(q, m, order):
    # prefix centre of mass recursion; q is complex of length k
    qo = q[list(order)]
    mo = m[list(order)]
    k = mo.size
    Cj = qo[0]
    Mj = mo[0]
    z = np.empty(k - 1, dtype=q.dtype)
    for j in range(k - 1):
        z[j] = qo[j + 1] - Cj
        Mn = Mj + mo[j + 1]
        Cj = Cj + mo[j + 1] * z[j] / Mn
        Mj = Mn
    return z, Cj


def _inverse(z, c, m, order):
    mo = m[list(order)]
    k = mo.size
    M = np.cumsum(mo)
    qo = np.empty(k, dtype=np.result_type(z, c))
    Cj = c
    for j in range(k - 2, -1, -1):
        Cj = Cj - mo[j + 1] * z[j] / M[j + 1]
        qo[j + 1] = Cj + z[j]
    qo[0] = Cj
    q = np.empty_like(qo)
    q[list(order)] = qo
    return q


@lru_cache(maxsize=256)
def _basis_cached(mkey, order, dtname):
    dt = np.dtype(dtname)
    m = np.array([dt.type(x) for x in mkey], dtype=dt)
    k = m.size
    mo = m[list(order)]
    M = np.cumsum(mo)
    mu = np.array([mo[j + 1] * M[j] / M[j + 1] for j in range(k - 1)], dtype=dt)
    P = np.empty((k, k), dtype=dt)
    for j in range(k):
        e = np.zeros(k, dtype=dt)
        e[j] = 1
        P[:, j] = _inverse(e[:-1], e[-1], m, order)
    pairs = tuple(itertools.combinations(range(k), 2))
    coef = np.array([P[a, :-1] - P[b, :-1] for a, b in pairs], dtype=dt)
    pm = np.array([m[a] * m[b] for a, b in pairs], dtype=dt)
    for arr in (m, mu, P, coef, pm):
        arr.setflags(write=False)
    return JacobiBasis(m, tuple(order), mu, P, pairs, coef, pm)


def jacobi_basis(masses, order: Optional[Sequence[int]] = None, dtype=None) -> JacobiBasis:
    """Cached :class:`JacobiBasis` for cluster ``masses`` (length ``k >= 2``)."""
    masses = np.asarray(masses)
    dt = np.dtype(dtype or masses.dtype)
    if dt.kind != "f":
        dt = np.dtype(np.float64)
    order = tuple(range(masses.size)) if order is None else tuple(int(i) for i in order)
    if sorted(order) != list(range(masses.size)):
        raise ValueError("order must be a permutation of the cluster bodies")
    if dt == np.longdouble:
        key = tuple(str(x) for x in masses.astype(np.longdouble))
    else:
        key = tuple(float(x) for x in masses)
    return _basis_cached(key, order, dt.name)


@dataclass(frozen=True)
class JacobiFrame:
    """Jacobi vectors ``z`` (complex, length ``k-1``) and centre ``c`` (complex)."""

    z: np.ndarray
    c: complex
    basis: JacobiBasis

    @property
    def r(self):
        return np.sqrt((self.basis.mu * (self.z * self.z.conj()).real).sum())


def _as_complex_positions(q):
    q = np.asarray(q)
    return q[:, 0] + 1j * q[:, 1]


def jacobi_forward(q, masses, order=None) -> JacobiFrame:
    """Jacobi frame of cluster positions ``q`` (``(k, 2)``)."""
    q = np.asarray(q)
    b = jacobi_basis(masses, order, q.dtype)
    z, c = _forward(_as_complex_positions(q), b.masses, b.order)
    return JacobiFrame(z, c, b)


def jacobi_inverse(frame: JacobiFrame):
    """Cluster positions ``(k, 2)`` of a Jacobi frame."""
    qc = _inverse(frame.z, frame.c, frame.basis.masses, frame.basis.order)
    return np.stack([qc.real, qc.imag], axis=1)


def best_order(q, masses):
    """Jacobi order maximising the chart condition ``|z_{k-1}| / r``."""
    k = len(masses)
    best, score = None, -1.0
    for perm in itertools.permutations(range(k)):
        fr = jacobi_forward(np.asarray(q, dtype=np.float64), np.asarray(masses, dtype=np.float64), perm)
        val = float(np.sqrt(fr.basis.mu[-1]) * abs(fr.z[-1]) / fr.r)
        if val > score + 1e-12:
            best, score = perm, val
    return best


@dataclass(frozen=True)
class ShapeState:
    """Chart coordinates of a cluster and their time derivatives."""

    r: float
    theta: float
    s: np.ndarray
    rho: float
    thetadot: float
    omega: np.ndarray
    mu: float
    c: np.ndarray
    cdot: np.ndarray
    basis: JacobiBasis


def shape_velocity(frame: JacobiFrame, frame_dot: JacobiFrame, chart_eps: float = 1e-10):
    """``(r, theta, s, rho, thetadot, omega, mu)`` from Jacobi positions and velocities."""
    b = frame.basis
    z, zd = frame.z, frame_dot.z
    r = frame.r
    if not r > 0:
        raise ChartError("cluster has collapsed to a point")
    zl = z[-1]
    if np.sqrt(b.mu[-1]) * abs(zl) < chart_eps * r:
        raise ChartError("last Jacobi vector vanishes; choose another order")
    s = z[:-1] / zl
    omega = (zd[:-1] * zl - z[:-1] * zd[-1]) / (zl * zl)
    inner = (b.mu * z.conj() * zd).sum()
    rho = inner.real / r
    mu = inner.imag
    theta = np.angle(zl)
    thetadot = (zd[-1] / zl).imag
    return r, theta, to_real(s), rho, thetadot, to_real(omega), mu


def shape_forward(q, qdot, masses, order=None, chart_eps: float = 1e-10) -> ShapeState:
    """Shape-chart state of a cluster from Cartesian positions and velocities."""
    fr = jacobi_forward(q, masses, order)
    frd = jacobi_forward(qdot, masses, fr.basis.order)
    r, theta, s, rho, thd, om, mu = shape_velocity(fr, frd, chart_eps)
    c = np.array([fr.c.real, fr.c.imag])
    cd = np.array([frd.c.real, frd.c.imag])
    return ShapeState(r, theta, s, rho, thd, om, mu, c, cd, fr.basis)


def shape_inverse(st: ShapeState):
    """Cartesian ``(q, qdot)`` of a shape state."""
    b = st.basis
    one = np.ones(1, dtype=b.masses.dtype)
    zeta = np.concatenate([to_complex(st.s), one])
    om = np.concatenate([to_complex(st.omega), 0 * one])
    N = (b.mu * (zeta * zeta.conj()).real).sum()
    G = (b.mu * (zeta.conj() * om).real).sum()
    e = np.exp(1j * st.theta)
    z = st.r * e * zeta / np.sqrt(N)
    zd = (st.rho / st.r + 1j * st.thetadot - G / N) * z + st.r * e * om / np.sqrt(N)
    c = st.c[0] + 1j * st.c[1]
    cd = st.cdot[0] + 1j * st.cdot[1]
    q = jacobi_inverse(JacobiFrame(z, c, b))
    qd = jacobi_inverse(JacobiFrame(zd, cd, b))
    return q, qd


@dataclass(frozen=True)
class FubiniEval:
    """Chart metric quantities at ``(s, omega)``.

    ``A`` is the symmetric matrix with ``F = omega^T A omega`` and ``B`` the
    vector with ``Omega = B . omega``.
    """

    N: float
    G: float
    Omega: float
    F: float
    A: np.ndarray
    B: np.ndarray


def _gb(s, b):
    ms = b.mu_s
    g = ms * s
    bb = np.empty_like(s)
    bb[0::2] = -ms[1::2] * s[1::2]
    bb[1::2] = ms[0::2] * s[0::2]
    return g, bb


def fubini_eval(s, omega, basis: JacobiBasis) -> FubiniEval:
    s = np.asarray(s)
    omega = np.asarray(omega)
    ms = basis.mu_s
    N = (ms * s * s).sum() + basis.mu[-1]
    g, bb = _gb(s, basis)
    G = g @ omega
    Om = bb @ omega
    A = np.diag(ms) / N - (np.outer(g, g) + np.outer(bb, bb)) / N**2
    F = (ms * omega * omega).sum() / N - (G * G + Om * Om) / N**2
    return FubiniEval(N, G, Om, F, A, bb)


def fubini_matrix_polarized(s, basis: JacobiBasis):
    """``A(s)`` recovered from the quadratic form ``F`` by polarisation."""
    s = np.asarray(s, dtype=float)
    n = s.size
    E = np.eye(n)

    def F(w):
        return fubini_eval(s, w, basis).F

    A = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            A[i, j] = (F(E[i] + E[j]) - F(E[i] - E[j])) / 4
    return A


def _pair_terms(s, basis):
    one = np.ones(1, dtype=basis.masses.dtype)
    zeta = np.concatenate([to_complex(s), one])
    u = basis.pair_coef @ zeta  # q_a - q_b for each pair
    return u


def potential_V(s, basis: JacobiBasis):
    """``V(s) = ||(s, 1)|| U(s, 1)``."""
    s = np.asarray(s)
    N = (basis.mu_s * s * s).sum() + basis.mu[-1]
    u = _pair_terms(s, basis)
    return np.sqrt(N) * (basis.pair_mass / np.abs(u)).sum()


def _U_derivs(s, basis, hessian=False):
    u = _pair_terms(s, basis)
    ur = np.stack([u.real, u.imag], axis=1)
    d = np.abs(u)
    U = (basis.pair_mass / d).sum()
    C = basis.pair_coef[:, :-1]  # pairs x (k-2)
    # d(1/|u|)/d s_j = -C_pj u / |u|^3  (u as a real 2-vector)
    w = basis.pair_mass / d**3
    gU = -np.einsum("p,pj,pc->jc", w, C, ur).reshape(-1)
    if not hessian:
        return U, gU, None
    blk = 3 * np.einsum("p,pc,pd->pcd", basis.pair_mass / d**5, ur, ur) - np.einsum(
        "p,cd->pcd", w, np.eye(2))
    H = np.einsum("pj,pl,pcd->jcld", C, C, blk)
    n = C.shape[1] * 2
    return U, gU, H.reshape(n, n)


def grad_V(s, basis: JacobiBasis):
    s = np.asarray(s)
    ms = basis.mu_s
    N = (ms * s * s).sum() + basis.mu[-1]
    U, gU, _ = _U_derivs(s, basis)
    gN = 2 * ms * s
    return U * gN / (2 * np.sqrt(N)) + np.sqrt(N) * gU


def hess_V(s, basis: JacobiBasis):
    s = np.asarray(s)
    ms = basis.mu_s
    N = (ms * s * s).sum() + basis.mu[-1]
    U, gU, HU = _U_derivs(s, basis, True)
    gN = 2 * ms * s
    HN = np.diag(2 * ms)
    sq = np.sqrt(N)
    return (sq * HU + (np.outer(gU, gN) + np.outer(gN, gU)) / (2 * sq)
            + U * (HN / (2 * sq) - np.outer(gN, gN) / (4 * N * sq)))


def grad_F(s, omega, basis: JacobiBasis):
    """Gradient of ``F(s, omega)`` in ``s`` at fixed ``omega``."""
    s = np.asarray(s)
    om = np.asarray(omega)
    ms = basis.mu_s
    N = (ms * s * s).sum() + basis.mu[-1]
    g, bb = _gb(s, basis)
    G, Om = g @ om, bb @ om
    gN = 2 * ms * s
    gG = ms * om
    gO = np.empty_like(om)
    gO[0::2] = ms[0::2] * om[1::2]
    gO[1::2] = -ms[1::2] * om[0::2]
    w2 = (ms * om * om).sum()
    return -w2 * gN / N**2 - 2 * (G * gG + Om * gO) / N**2 + 2 * (G * G + Om * Om) * gN / N**3


def dA_dir(s, w, basis: JacobiBasis):
    """Directional derivative ``(D A(s)[w]) w``."""
    s = np.asarray(s)
    w = np.asarray(w)
    ms = basis.mu_s
    N = (ms * s * s).sum() + basis.mu[-1]
    g, bb = _gb(s, basis)
    gw, bw = _gb(w, basis)
    dN = 2 * (ms * s * w).sum()
    Gw, Bw = g @ w, bb @ w
    gww, bww = gw @ w, bw @ w
    return (-ms * w * dN / N**2
            - (gw * Gw + g * gww + bw * Bw + bb * bww) / N**2
            + 2 * (g * Gw + bb * Bw) * dN / N**3)


def dB_over_N(s, basis: JacobiBasis):
    """Jacobian matrix of ``B(s) / N(s)``."""
    s = np.asarray(s)
    ms = basis.mu_s
    N = (ms * s * s).sum() + basis.mu[-1]
    _, bb = _gb(s, basis)
    n = s.size
    Jb = np.zeros((n, n), dtype=s.dtype)
    for j in range(n // 2):
        Jb[2 * j, 2 * j + 1] = -ms[2 * j]
        Jb[2 * j + 1, 2 * j] = ms[2 * j]
    return Jb / N - np.outer(bb, 2 * ms * s) / N**2


def mu_shape(st: ShapeState):
    """Angular momentum from chart quantities: ``r^2 thetadot + r^2 Omega / N``."""
    fe = fubini_eval(st.s, st.omega, st.basis)
    return st.r**2 * st.thetadot + st.r**2 * fe.Omega / fe.N


def energy_shape(st: ShapeState):
    """Cluster energy ``K_G - U_G`` evaluated in chart coordinates."""
    fe = fubini_eval(st.s, st.omega, st.basis)
    M = st.basis.masses.sum()
    V = potential_V(st.s, st.basis)
    return (st.rho**2 / 2 + st.mu**2 / (2 * st.r**2) + st.r**2 * fe.F / 2 - V / st.r
            + M * (st.cdot * st.cdot).sum() / 2)
