"""Named collision scenarios.

Each preset expands to explicit masses, a focus cluster, an integrator
configuration and either an initial state or a one-parameter family with a
bracket for shooting.  Homothetic presets carry the closed-form constant
``A = (9 lambda / 2)^{2/3}`` of their central configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import ClusterPartition, State, accelerations
from .odeint import Event, IntegratorConfig, NBodyTrajectory, integrate_to_collision, shoot_to_collision

__all__ = [
    "Scenario",
    "PRESETS",
    "preset",
    "homothetic_A",
    "run_scenario",
    "ScenarioRun",
    "validate_state",
]


def homothetic_A(lam):
    """``A`` of a homothetic collapse onto a CC with normalised potential ``lam``."""
    return (4.5 * lam) ** (2.0 / 3.0)


@dataclass
class Scenario:
    """A fully explicit collision experiment.

    Exactly one of ``state`` and ``family`` is set.  ``family(p)`` returns the
    initial state for shooting parameter ``p``; ``miss`` and ``events`` go to
    :func:`nbcollide.odeint.shoot_to_collision`.
    """

    name: str
    masses: np.ndarray
    part: ClusterPartition
    config: IntegratorConfig
    state: Optional[State] = None
    family: Optional[Callable[[float], State]] = None
    bracket: Optional[tuple] = None
    miss: Optional[Callable] = None
    events: Optional[list] = None
    final_stop_ratio: float = 1e-11
    A_reference: Optional[float] = None
    T_reference: Optional[float] = None
    lam: Optional[float] = None
    notes: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.state is None) == (self.family is None):
            raise ValueError("give exactly one of state and family")
        if self.family is not None and self.bracket is None:
            raise ValueError("shooting scenarios need a bracket")
        if self.state is not None:
            validate_state(self.state, self.masses)

    @property
    def shooting(self) -> bool:
        return self.family is not None


def validate_state(state: State, masses):
    """Reject non-finite data and coincident bodies."""
    if np.asarray(masses).size != state.n:
        raise ValueError("number of masses does not match the state")
    if not (np.all(np.isfinite(np.asarray(state.q, float))) and np.all(np.isfinite(np.asarray(state.qdot, float)))):
        raise ValueError("state contains non-finite values")
    accelerations(np.asarray(state.q), np.asarray(masses, dtype=float))


def _rest(q):
    q = np.asarray(q)
    return State(q, np.zeros_like(q))


def _kepler_pair(precision="extended"):
    m = np.array([1.0, 1.0])
    return Scenario(
        "kepler_pair", m, ClusterPartition.whole(2),
        IntegratorConfig(rel_tol=1e-13, precision=precision, stop_ratio=1e-10),
        state=_rest(np.array([[-1.0, 0.0], [1.0, 0.0]])),
        A_reference=9 ** (2 / 3) / 2, T_reference=np.pi / np.sqrt(2), lam=1 / np.sqrt(2),
        notes="unit masses at rest, separation 2; radial free fall",
    )


def _lagrange_homothetic(precision="extended"):
    # mirror-symmetric data built in long double so the shape stays on the
    # (unstable) equilateral restpoint as long as possible
    ld = np.longdouble
    h = np.sqrt(ld(3)) / 2
    q = np.array([[-ld(0.5), -h / 3], [ld(0.5), -h / 3], [ld(0), 2 * h / 3]], dtype=ld)
    return Scenario(
        "lagrange_homothetic", np.ones(3), ClusterPartition.whole(3),
        IntegratorConfig(rel_tol=1e-13, precision=precision, stop_ratio=1e-8),
        state=_rest(q), A_reference=homothetic_A(3.0), lam=3.0,
        notes="equilateral triangle of unit masses at rest",
    )


def _euler_homothetic(precision="extended"):
    lam = 5 * np.sqrt(2) / 2
    return Scenario(
        "euler_homothetic", np.ones(3), ClusterPartition.whole(3),
        IntegratorConfig(rel_tol=1e-13, precision=precision, stop_ratio=1e-10),
        state=_rest(np.array([[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])), A_reference=homothetic_A(lam), lam=lam,
        notes="equally spaced collinear unit masses at rest",
    )


def _binary_family(q_ext, m_ext):
    q_ext = np.atleast_2d(np.asarray(q_ext, dtype=float))

    def family(p):
        # keeps the parameter's precision when it is a long double
        dt = np.result_type(p, np.float64)
        q = np.vstack([[[-1.0, 0.0], [1.0, 0.0]], q_ext]).astype(dt)
        v = np.zeros_like(q)
        v[0, 1] = -p / 2
        v[1, 1] = p / 2
        return State(q, v)

    return family


def _binary_in_3body(precision="extended"):
    m = np.ones(3)
    return Scenario(
        "binary_in_3body", m, ClusterPartition((0, 1), 3),
        IntegratorConfig(rel_tol=1e-13, precision=precision),
        family=_binary_family([[2.0, 4.0]], [1.0]), bracket=(-0.2, 0.2), final_stop_ratio=1e-11,
        notes="binary (0, 1) with a third body off its axis; shoot the relative tangential velocity",
    )


def _binary_in_4body(precision="extended"):
    m = np.ones(4)
    return Scenario(
        "binary_in_4body", m, ClusterPartition((0, 1), 4),
        IntegratorConfig(rel_tol=1e-13, precision=precision),
        family=_binary_family([[2.0, 4.0], [-3.0, 2.5]], [1.0, 1.0]), bracket=(-0.2, 0.2),
        final_stop_ratio=1e-11,
        notes="binary (0, 1) with two external bodies",
    )


def _isosceles_deviation(threshold):
    # signed departure of the triple (0, 1, 2) from its equilateral shape,
    # measured by the apex height relative to the base
    def dev(y, n):
        q = y[: 2 * n].reshape(n, 2)
        base = q[1] - q[0]
        mid = (q[0] + q[1]) / 2
        bl = np.sqrt(base @ base)
        h = (base[0] * (q[2] - mid)[1] - base[1] * (q[2] - mid)[0]) / bl
        return h / bl - np.sqrt(q.dtype.type(3)) / 2

    return dev


def _lagrange_in_4body(precision="extended", threshold=0.1):
    """Triple collision near the Lagrange shape perturbed by a fourth body.

    The triple is isosceles about the y axis and the fourth body sits on that
    axis, so the mirror symmetry persists and the shooting parameter (the apex
    height) only has to cancel the one unstable shape mode.
    """
    m = np.ones(4)
    n = 4
    dev = _isosceles_deviation(threshold)
    ld = np.longdouble

    def family(p):
        q = np.array([[-ld(0.5), ld(0)], [ld(0.5), ld(0)], [ld(0), ld(p)], [ld(0), ld(-4)]], dtype=ld)
        return State(q, np.zeros_like(q))

    def miss(traj: NBodyTrajectory):
        return float(np.sign(dev(np.concatenate([traj.q[-1].ravel(), traj.qdot[-1].ravel()]), n)))

    events = [Event(lambda tau, y: dev(y, n) ** 2 - threshold**2, True, 1, "shape_departure")]
    return Scenario(
        "lagrange_in_4body", m, ClusterPartition((0, 1, 2), 4),
        IntegratorConfig(rel_tol=1e-13, precision=precision, stop_ratio=1e-8),
        family=family, bracket=(0.80, 0.92), miss=miss, events=events, final_stop_ratio=1e-9,
        A_reference=None, lam=3.0,
        notes="isosceles triple shot onto the equilateral restpoint with a fourth body on the symmetry axis",
    )


PRESETS = {
    "kepler_pair": _kepler_pair,
    "lagrange_homothetic": _lagrange_homothetic,
    "euler_homothetic": _euler_homothetic,
    "binary_in_3body": _binary_in_3body,
    "binary_in_4body": _binary_in_4body,
    "lagrange_in_4body": _lagrange_in_4body,
}


def preset(name: str, precision: str = "extended") -> Scenario:
    try:
        return PRESETS[name](precision)
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass
class ScenarioRun:
    scenario: Scenario
    trajectory: NBodyTrajectory
    param: Optional[float] = None
    shift: Optional[np.ndarray] = None
    miss_history: list = field(default_factory=list)


def run_scenario(sc: Scenario, config: Optional[IntegratorConfig] = None) -> ScenarioRun:
    """Integrate a scenario to collision, shooting first when it is a family."""
    cfg = config or sc.config
    if not sc.shooting:
        tr = integrate_to_collision(sc.state, sc.masses, sc.part, cfg)
        return ScenarioRun(sc, tr)
    res = shoot_to_collision(sc.family, sc.bracket, sc.masses, sc.part, cfg, miss=sc.miss, events=sc.events,
                             final_stop_ratio=sc.final_stop_ratio, recenter=True)
    return ScenarioRun(sc, res.trajectory, res.param, res.shift, res.miss_history)
