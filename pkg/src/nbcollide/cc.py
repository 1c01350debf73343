"""Central configurations as critical points of ``V`` on the shape chart.

A configuration is central when ``dU/dq_i + lambda m_i (q_i - c) = 0``.  In
the chart this is ``grad V(s) = 0`` and, for the normalised representative
(``c = 0``, ``I = 1``), ``lambda = U = V(s)``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .coords import (
    ChartError, JacobiFrame, best_order, grad_V, hess_V, jacobi_basis, jacobi_forward, jacobi_inverse,
    potential_V, to_complex, to_real,
)
from .core import grad_potential, pairwise_potential

__all__ = [
    "CCSolveError",
    "CCResult",
    "solve_cc",
    "enumerate_cc",
    "normalized_configuration",
    "shape_distance",
    "cc_distance",
    "catalog_to_json",
    "catalog_from_json",
]


class CCSolveError(RuntimeError):
    """Newton iteration failed to reach a central configuration."""


@dataclass
class CCResult:
    """A central configuration.

    ``s_star`` lives in the chart of Jacobi ``order``; ``normalized_q`` is the
    chart-free representative with centre of mass 0 and ``I = 1``.
    ``residual`` is ``|grad V(s_star)|``.
    """

    masses: np.ndarray
    order: tuple
    s_star: np.ndarray
    lam: float
    spectrum: np.ndarray
    residual: float
    normalized_q: np.ndarray
    degenerate: bool
    isolated: bool
    iterations: int = 0
    cartesian_residual: float = field(default=np.nan)

    def to_dict(self):
        return {
            "masses": [float(m) for m in self.masses],
            "order": list(self.order),
            "s_star": [float(x) for x in self.s_star],
            "lambda": float(self.lam),
            "spectrum": [float(x) for x in self.spectrum],
            "residual": float(self.residual),
            "normalized_q": [[float(a), float(b)] for a, b in self.normalized_q],
            "degenerate": bool(self.degenerate),
            "isolated": bool(self.isolated),
        }


def normalized_configuration(s, basis):
    """Cartesian representative of chart point ``s`` with ``c = 0``, ``I = 1``."""
    zeta = np.concatenate([to_complex(s), [1.0]])
    N = (basis.mu * np.abs(zeta) ** 2).sum()
    q = jacobi_inverse(JacobiFrame(zeta / np.sqrt(N), 0j, basis))
    return q


def _chart_quality(s, basis):
    N = (basis.mu_s * s * s).sum() + basis.mu[-1]
    return np.sqrt(basis.mu[-1] / N)


def _rechart(s, basis, masses):
    q = normalized_configuration(s, basis)
    order = best_order(q, masses)
    nb = jacobi_basis(masses, order)
    fr = jacobi_forward(q, masses, order)
    return to_real(fr.z[:-1] / fr.z[-1]), nb


def solve_cc(s0, masses, order: Optional[Sequence[int]] = None, tol: float = 1e-12, max_iter: int = 100,
             degeneracy_tol: float = 1e-8, min_separation: float = 1e-3, polish: int = 3) -> CCResult:
    """Damped Newton iteration for ``grad V = 0`` from chart point ``s0``.

    Steps are Newton steps with backtracking on ``|grad V|^2``; when the
    Hessian is nearly singular or backtracking fails a Levenberg-Marquardt
    step is used instead.  The chart is switched to a better-conditioned Jacobi
    order whenever the last Jacobi vector becomes small.
    """
    masses = np.asarray(masses, dtype=float)
    basis = jacobi_basis(masses, order)
    s = np.asarray(s0, dtype=float).copy()
    if s.size != 2 * (masses.size - 2):
        raise ValueError("s0 has the wrong dimension for these masses")
    lm = 1e-3
    it = 0
    for it in range(1, max_iter + 1):
        if _chart_quality(s, basis) < 0.3:
            s, basis = _rechart(s, basis, masses)
        q = normalized_configuration(s, basis)
        d = np.sqrt(((q[:, None] - q[None]) ** 2).sum(-1)) + np.eye(masses.size)
        if d.min() < min_separation:
            raise CCSolveError("iteration approached a collision")
        g = grad_V(s, basis)
        V = potential_V(s, basis)
        gn = np.linalg.norm(g)
        if gn < tol * V:
            break
        H = hess_V(s, basis)
        phi = gn * gn
        step = None
        if np.linalg.cond(H) < 1e12:
            dn = -np.linalg.solve(H, g)
            lim = 0.5 * (1 + np.linalg.norm(s))
            if np.linalg.norm(dn) > lim:
                dn *= lim / np.linalg.norm(dn)
            a = 1.0
            for _ in range(30):
                gt = grad_V(s + a * dn, basis)
                if gt @ gt <= (1 - 1e-4 * a) * phi:
                    step = a * dn
                    break
                a /= 2
        if step is None:
            for _ in range(30):
                dl = -np.linalg.solve(H.T @ H + lm * np.eye(s.size), H.T @ g)
                gt = grad_V(s + dl, basis)
                if gt @ gt < phi:
                    step = dl
                    lm = max(lm / 3, 1e-12)
                    break
                lm *= 10
        if step is None:
            raise CCSolveError("no descent direction found")
        s = s + step
    else:
        raise CCSolveError(f"no convergence in {max_iter} iterations (|grad V| = {gn:.3e})")

    # polish: undamped Newton steps while they still reduce the residual
    gn = np.linalg.norm(grad_V(s, basis))
    for _ in range(polish):
        try:
            st = s - np.linalg.solve(hess_V(s, basis), grad_V(s, basis))
        except np.linalg.LinAlgError:
            break
        gt = np.linalg.norm(grad_V(st, basis))
        if not gt < gn:
            break
        s, gn = st, gt
    g = grad_V(s, basis)
    spec = np.linalg.eigvalsh(hess_V(s, basis))
    q = normalized_configuration(s, basis)
    lam = float(pairwise_potential(q, masses).sum() / 2)
    cart = float(np.abs(grad_potential(q, masses) + lam * masses[:, None] * q).max())
    scale = np.abs(spec).max() if spec.size else 1.0
    degenerate = bool(spec.size and np.abs(spec).min() < degeneracy_tol * scale)
    isolated = True
    if degenerate:
        isolated = _shell_isolated(s, basis, float(np.linalg.norm(g)))
    return CCResult(masses=masses, order=basis.order, s_star=s, lam=lam, spectrum=spec,
                    residual=float(np.linalg.norm(g)), normalized_q=q, degenerate=degenerate,
                    isolated=isolated, iterations=it, cartesian_residual=cart)


def _shell_isolated(s, basis, res, radius=1e-4, count=64):
    # a degenerate critical point counts as isolated when no nearby point on a
    # small sphere is itself (nearly) critical
    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(count, s.size))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    for d in dirs:
        if np.linalg.norm(grad_V(s + radius * d, basis)) < 10 * max(res, 1e-14):
            return False
    return True


def shape_distance(q1, q2, masses):
    """Rotation-invariant (Fubini-Study) distance between two configurations."""
    m = np.asarray(masses, dtype=float)
    z1 = np.asarray(q1)[:, 0] + 1j * np.asarray(q1)[:, 1]
    z2 = np.asarray(q2)[:, 0] + 1j * np.asarray(q2)[:, 1]
    z1 = z1 - (m * z1).sum() / m.sum()
    z2 = z2 - (m * z2).sum() / m.sum()
    z1 = z1 / np.sqrt((m * np.abs(z1) ** 2).sum())
    z2 = z2 / np.sqrt((m * np.abs(z2) ** 2).sum())
    inner = (m * z1.conj() * z2).sum()
    perp = z2 - inner * z1
    return float(np.arcsin(min(1.0, np.sqrt((m * np.abs(perp) ** 2).sum()))))


def _label_perms(masses):
    k = len(masses)
    return [p for p in itertools.permutations(range(k)) if np.array_equal(np.asarray(masses)[list(p)], masses)]


def _class_distance(q1, q2, masses, relabel):
    if not relabel:
        return shape_distance(q1, q2, masses)
    return min(shape_distance(q1, np.asarray(q2)[list(p)], masses) for p in _label_perms(masses))


def enumerate_cc(masses, multistart_count: int = 256, seed: int = 0, dedup_tol: float = 1e-6,
                 modulo_relabeling: bool = False, tol: float = 1e-12) -> list:
    """Multistart search for central configurations.

    Seeds are quasi-random (scrambled Sobol) planar configurations.  Results
    are deduplicated by Fubini-Study distance, which quotients rotations but
    not reflections; with ``modulo_relabeling`` bodies of equal mass are also
    treated as interchangeable.  Sorted by ``lambda``.
    """
    masses = np.asarray(masses, dtype=float)
    k = masses.size
    if k < 3:
        raise ValueError("need at least three bodies for a nontrivial shape space")
    sob = qmc.Sobol(d=2 * k, scramble=True, seed=seed)
    n2 = 1 << int(np.ceil(np.log2(max(2, multistart_count))))
    pts = sob.random(n2)[:multistart_count] * 2 - 1
    found: list = []
    for p in pts:
        q = p.reshape(k, 2)
        try:
            order = best_order(q, masses)
            fr = jacobi_forward(q, masses, order)
            s0 = to_real(fr.z[:-1] / fr.z[-1])
            res = solve_cc(s0, masses, order, tol=tol)
        except (CCSolveError, ChartError, np.linalg.LinAlgError, FloatingPointError):
            continue
        if any(_class_distance(f.normalized_q, res.normalized_q, masses, False) < dedup_tol for f in found):
            continue
        found.append(res)
    if modulo_relabeling:
        reduced: list = []
        for f in found:
            if not any(_class_distance(r.normalized_q, f.normalized_q, masses, True) < dedup_tol for r in reduced):
                reduced.append(f)
        found = reduced
    found.sort(key=lambda c: (c.lam, tuple(np.round(c.normalized_q.ravel(), 6))))
    return found


def cc_distance(s, catalog, order: Optional[Sequence[int]] = None):
    """Distance from chart point ``s`` to the nearest catalog entry.

    Returns ``(distance, index)``; ``s`` is interpreted in the chart of
    ``order`` for the catalog's masses.
    """
    if not catalog:
        raise ValueError("empty catalog")
    masses = catalog[0].masses
    q = normalized_configuration(np.asarray(s, float), jacobi_basis(masses, order))
    d = [shape_distance(q, c.normalized_q, masses) for c in catalog]
    i = int(np.argmin(d))
    return d[i], i


def catalog_to_json(catalog) -> str:
    return json.dumps([c.to_dict() for c in catalog], indent=2, sort_keys=True)


def catalog_from_json(text: str) -> list:
    out = []
    for d in json.loads(text):
        masses = np.array(d["masses"], float)
        out.append(CCResult(masses=masses, order=tuple(d["order"]), s_star=np.array(d["s_star"], float),
                            lam=d["lambda"], spectrum=np.array(d["spectrum"], float), residual=d["residual"],
                            normalized_q=np.array(d["normalized_q"], float), degenerate=d["degenerate"],
                            isolated=d["isolated"]))
    return out
