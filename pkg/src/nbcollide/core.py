"""Planar Newtonian N-body primitives and cluster observables.

Units have G = 1 and the potential is the positive force function

    U(q) = sum_{i<j} m_i m_j / |q_i - q_j|,

so that ``m_i q_i'' = dU/dq_i``. Every routine works with ``float64`` and
``np.longdouble`` arrays alike; the dtype of the positions is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "SingularConfigurationError",
    "MassSystem",
    "State",
    "ClusterPartition",
    "ClusterObservables",
    "pairwise_potential",
    "potential_terms",
    "accelerations",
    "grad_potential",
    "grad_external",
    "cluster_observables",
    "lagrange_jacobi_residual",
    "sundman_constant",
    "mutual_distance_identity",
    "cross2",
]

#: pairwise distances below this are treated as a collision
SINGULAR_DISTANCE = 1e-300


class SingularConfigurationError(ValueError):
    """Raised when two bodies coincide."""


def cross2(a, b):
    """z-component of the planar cross product, broadcast over leading axes."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True)
class MassSystem:
    """Positive masses of an ``n``-body system."""

    masses: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses)
        if m.ndim != 1 or m.size < 2:
            raise ValueError("need a 1-d array of at least two masses")
        if not np.all(np.isfinite(m)) or np.any(m <= 0):
            raise ValueError("masses must be positive and finite")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @property
    def n(self) -> int:
        return self.masses.size

    @property
    def total(self):
        return self.masses.sum()

    def astype(self, dtype) -> "MassSystem":
        if dtype == np.longdouble and self.masses.dtype != np.longdouble:
            # exact decimal round-trip so that 1/3 etc. keep 64-bit mantissas
            m = np.array([np.longdouble(repr(float(x))) for x in self.masses])
            return MassSystem(m)
        return MassSystem(self.masses.astype(dtype))


@dataclass(frozen=True)
class State:
    """Positions ``q`` and velocities ``qdot`` (both ``(n, 2)``) at time ``t``."""

    q: np.ndarray
    qdot: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.array(self.q)
        qd = np.array(self.qdot)
        if q.ndim != 2 or q.shape[1] != 2 or qd.shape != q.shape:
            raise ValueError("q and qdot must both have shape (n, 2)")
        for a in (q, qd):
            a.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qd)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def pack(self) -> np.ndarray:
        """Flat vector ``[q.ravel(), qdot.ravel()]``."""
        return np.concatenate([self.q.ravel(), self.qdot.ravel()])

    @classmethod
    def unpack(cls, y, t=0.0) -> "State":
        n = (len(y)) // 4
        return cls(np.reshape(y[: 2 * n], (n, 2)), np.reshape(y[2 * n : 4 * n], (n, 2)), t)


@dataclass(frozen=True)
class ClusterPartition:
    """A focus cluster ``G`` inside an ``n``-body system.

    Only the focus cluster is needed by the analyses; the remaining bodies are
    lumped together as the external system.
    """

    focus: tuple
    n: int
    clusters: tuple = field(default=())

    def __post_init__(self):
        focus = tuple(int(i) for i in self.focus)
        if len(focus) < 2:
            raise ValueError("the focus cluster needs at least two bodies")
        if len(set(focus)) != len(focus):
            raise ValueError("focus cluster has repeated indices")
        if min(focus) < 0 or max(focus) >= self.n:
            raise ValueError("focus cluster index out of range")
        clusters = tuple(tuple(int(i) for i in c) for c in self.clusters) or (focus,)
        seen = [i for c in clusters for i in c]
        if len(seen) != len(set(seen)):
            raise ValueError("clusters must be disjoint")
        if focus not in clusters:
            raise ValueError("focus cluster must be one of the clusters")
        object.__setattr__(self, "focus", focus)
        object.__setattr__(self, "clusters", clusters)

    @property
    def k(self) -> int:
        return len(self.focus)

    @property
    def external(self) -> tuple:
        inside = set(self.focus)
        return tuple(i for i in range(self.n) if i not in inside)

    @classmethod
    def whole(cls, n: int) -> "ClusterPartition":
        return cls(tuple(range(n)), n)


@dataclass(frozen=True)
class ClusterObservables:
    """Cluster quantities at a single instant.

    ``mu`` is the intrinsic angular momentum about the cluster centre of mass,
    ``mu_G`` the angular momentum about the origin.  ``J_G`` and ``Jdot_G`` are
    only populated when a reference point ``L`` was supplied.
    """

    U_G: float
    U_ext: float
    K_G: float
    H_G: float
    M_G: float
    c_G: np.ndarray
    cdot_G: np.ndarray
    I0_G: float
    r_G: float
    mu_G: float
    mu: float
    mudot: float
    J_G: Optional[float] = None
    Jdot_G: Optional[float] = None


def _pair_geometry(q):
    d = q[None, :, :] - q[:, None, :]  # d[i, j] = q_j - q_i
    r2 = np.einsum("ijk,ijk->ij", d, d)
    n = q.shape[0]
    off = ~np.eye(n, dtype=bool)
    if np.any(r2[off] <= SINGULAR_DISTANCE**2):
        raise SingularConfigurationError("coincident bodies")
    np.fill_diagonal(r2, 1)
    return d, r2


def pairwise_potential(q, masses):
    """Matrix of ``m_i m_j / |q_i - q_j|`` with a zero diagonal."""
    _, r2 = _pair_geometry(np.asarray(q))
    m = np.asarray(masses)
    P = np.outer(m, m) / np.sqrt(r2)
    np.fill_diagonal(P, 0)
    return P


def potential_terms(q, masses, part: ClusterPartition):
    """Return ``(U_G, U_ext, U_total)``.

    ``U_ext`` couples the focus cluster to bodies outside it.
    """
    P = pairwise_potential(q, masses)
    g = list(part.focus)
    e = list(part.external)
    U_G = P[np.ix_(g, g)].sum() / 2
    U_ext = P[np.ix_(g, e)].sum() if e else P.dtype.type(0)
    U = P.sum() / 2
    return U_G, U_ext, U


def accelerations(q, masses):
    """Newtonian accelerations ``(n, 2)``."""
    q = np.asarray(q)
    m = np.asarray(masses)
    d, r2 = _pair_geometry(q)
    w = r2 ** (-1.5)
    np.fill_diagonal(w, 0)
    return np.einsum("ijk,ij->ik", d, w * m[None, :])


def grad_potential(q, masses, pairs_mask=None):
    """Gradient ``dU/dq_i`` ``(n, 2)``; ``pairs_mask`` restricts the pair sum."""
    q = np.asarray(q)
    m = np.asarray(masses)
    d, r2 = _pair_geometry(q)
    w = np.outer(m, m) * r2 ** (-1.5)
    np.fill_diagonal(w, 0)
    if pairs_mask is not None:
        w = np.where(pairs_mask, w, 0)
    return np.einsum("ijk,ij->ik", d, w)


def _external_mask(part: ClusterPartition):
    inside = np.zeros(part.n, dtype=bool)
    inside[list(part.focus)] = True
    return inside[:, None] != inside[None, :]


def grad_external(q, masses, part: ClusterPartition):
    """``dU_ext/dq_i`` for every body (rows of non-members included)."""
    return grad_potential(q, masses, _external_mask(part))


def cluster_observables(state: State, masses, part: ClusterPartition, L=None) -> ClusterObservables:
    """Evaluate the focus-cluster quantities of ``state``."""
    q, qd = state.q, state.qdot
    m = np.asarray(masses)
    if m.dtype != q.dtype:
        m = m.astype(q.dtype)
    g = list(part.focus)
    mg, qg, vg = m[g], q[g], qd[g]
    U_G, U_ext, _ = potential_terms(q, m, part)
    M = mg.sum()
    c = (mg[:, None] * qg).sum(0) / M
    cd = (mg[:, None] * vg).sum(0) / M
    K = 0.5 * (mg * (vg * vg).sum(1)).sum()
    rel, vrel = qg - c, vg - cd
    I0 = (mg * (rel * rel).sum(1)).sum()
    mu_G = (mg * cross2(qg, vg)).sum()
    mu = (mg * cross2(rel, vrel)).sum()
    gext = grad_external(q, m, part)[g]
    mudot = cross2(rel, gext).sum()
    J = Jd = None
    if L is not None:
        L = np.asarray(L, dtype=q.dtype)
        dl = qg - L
        J = (mg * (dl * dl).sum(1)).sum()
        Jd = 2 * (mg * (dl * vg).sum(1)).sum()
    return ClusterObservables(
        U_G=U_G, U_ext=U_ext, K_G=K, H_G=K - U_G, M_G=M, c_G=c, cdot_G=cd,
        I0_G=I0, r_G=np.sqrt(I0), mu_G=mu_G, mu=mu, mudot=mudot, J_G=J, Jdot_G=Jd,
    )


def lagrange_jacobi_residual(state: State, qddot, masses, part: ClusterPartition, L):
    """Difference between a directly computed ``J_G''`` and the virial identity.

    ``qddot`` is an independent estimate of the accelerations (for instance the
    derivative of a dense-output interpolant).  The identity is

        J'' = 4 K_G - 2 U_G + 2 sum_{i in G} dU_ext/dq_i . (q_i - L).

    Returns ``(residual, Jddot_direct, Jddot_identity)``.
    """
    q, qd = state.q, state.qdot
    m = np.asarray(masses, dtype=q.dtype)
    g = list(part.focus)
    L = np.asarray(L, dtype=q.dtype)
    dl = q[g] - L
    direct = 2 * (m[g] * ((qd[g] ** 2).sum(1) + (dl * np.asarray(qddot)[g]).sum(1))).sum()
    U_G, _, _ = potential_terms(q, m, part)
    K = 0.5 * (m[g] * (qd[g] ** 2).sum(1)).sum()
    gext = grad_external(q, m, part)[g]
    ident = 4 * K - 2 * U_G + 2 * (gext * dl).sum()
    return direct - ident, direct, ident


def sundman_constant(masses, members: Sequence[int]):
    """Lower bound ``D`` with ``sqrt(J) U >= D`` for the bodies ``members``.

    ``D = M^{-1/2} sum_{j<k} m_j^{3/2} m_k^{3/2}``, pairs taken inside ``members``.
    """
    m = np.asarray(masses)[list(members)]
    s = 0.0
    for a in range(m.size):
        for b in range(a + 1, m.size):
            s += (m[a] * m[b]) ** 1.5
    return s / np.sqrt(m.sum())


def mutual_distance_identity(q, masses, part: ClusterPartition, L):
    """Both sides of ``J_G = M^{-1} sum m_j m_k |q_jk|^2 + M |c_G - L|^2``."""
    m = np.asarray(masses, dtype=np.asarray(q).dtype)
    g = list(part.focus)
    qg, mg = np.asarray(q)[g], m[g]
    M = mg.sum()
    L = np.asarray(L, dtype=qg.dtype)
    lhs = (mg * ((qg - L) ** 2).sum(1)).sum()
    d = qg[None, :, :] - qg[:, None, :]
    pair = (np.outer(mg, mg) * (d**2).sum(-1)).sum() / 2
    c = (mg[:, None] * qg).sum(0) / M
    rhs = pair / M + M * ((c - L) ** 2).sum()
    return lhs, rhs
