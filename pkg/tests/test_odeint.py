import numpy as np
import pytest

from nbcollide.analysis import kepler_baseline
from nbcollide.asymptotics import estimate_T_L
from nbcollide.core import ClusterPartition, SingularConfigurationError, State
from nbcollide.odeint import Event, IntegratorConfig, integrate, integrate_to_collision, newton_rhs, shoot_to_collision

PAIR = ClusterPartition.whole(2)
T_KEPLER = np.pi / np.sqrt(2)  # unit masses at rest, separation 2


def decay(t, y):
    return -y


def oscillator(t, y):
    return np.array([y[1], -y[0]])


class TestIntegrate:
    def test_exponential_decay(self):
        tr = integrate(decay, [1.0], (0.0, 1.0), IntegratorConfig(rel_tol=1e-12, abs_tol=1e-16))
        assert tr.status == "completed"
        assert tr.y[-1][0] == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_backwards(self):
        tr = integrate(decay, [np.exp(-1.0)], (1.0, 0.0), IntegratorConfig(rel_tol=1e-12, abs_tol=1e-16))
        assert tr.y[-1][0] == pytest.approx(1.0, rel=1e-12)

    def test_increments_sum_to_states(self):
        tr = integrate(oscillator, [1.0, 0.0], (0.0, 5.0), IntegratorConfig(rel_tol=1e-10))
        np.testing.assert_allclose(tr.y[0] + np.cumsum(tr.dy, axis=0), tr.y, rtol=0, atol=1e-14)

    def test_dense_output(self):
        tol = 1e-10
        tr = integrate(oscillator, [1.0, 0.0], (0.0, 10.0), IntegratorConfig(rel_tol=tol, abs_tol=tol))
        ts = np.linspace(0.0, 10.0, 777)
        err = max(abs(tr.sol(t)[0] - np.cos(t)) for t in ts)
        assert err < 100 * tol
        np.testing.assert_allclose(tr.derivative(2.0), [-np.sin(2.0), -np.cos(2.0)], atol=100 * tol)

    def test_terminal_event(self):
        ev = Event(lambda t, y: y[0] - 0.5, name="half")
        tr = integrate(decay, [1.0], (0.0, 5.0), IntegratorConfig(rel_tol=1e-12, abs_tol=1e-16), events=[ev])
        assert tr.status == "event"
        assert tr.t[-1] == pytest.approx(np.log(2.0), rel=1e-10)

    def test_longdouble(self):
        cfg = IntegratorConfig(rel_tol=1e-17, abs_tol=1e-20, precision="extended")
        tr = integrate(decay, [1.0], (0.0, 1.0), cfg)
        assert tr.y.dtype == np.longdouble
        exact = np.exp(np.longdouble(-1))
        assert abs(tr.y[-1][0] - exact) / exact < 1e-16

    def test_tolerance_refinement_reduces_error(self):
        errs = []
        for tol in (1e-6, 1e-9, 1e-12):
            tr = integrate(oscillator, [1.0, 0.0], (0.0, 10.0), IntegratorConfig(rel_tol=tol, abs_tol=tol))
            errs.append(abs(tr.y[-1][0] - np.cos(10.0)))
        assert errs[0] > errs[1] > errs[2]

    @pytest.mark.parametrize("bad", [{"rel_tol": 0.0}, {"precision": "quad"}])
    def test_config_validation(self, bad):
        with pytest.raises(ValueError):
            IntegratorConfig(**bad)


class TestKepler:
    def test_circular_baseline(self):
        rep = kepler_baseline(periods=10, reverse_periods=1)
        assert rep["status"] == "completed"
        assert rep["energy_drift_rel"] < 1e-10
        assert rep["reversibility_in_tol"] < 10
        assert rep["dense_error_in_tol"] < 10
        assert rep["step_error_in_tol"] < 10

    def test_newton_rhs_shape(self):
        y = np.array([-0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(newton_rhs(np.ones(2))(0.0, y)[4:], [1.0, 0.0, -1.0, 0.0])


class TestCollision:
    @pytest.mark.parametrize("precision", ["double", "extended"])
    def test_free_fall_time(self, precision):
        st = State(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.zeros((2, 2)))
        tr = integrate_to_collision(st, np.ones(2), PAIR, IntegratorConfig(rel_tol=1e-13, precision=precision,
                                                                           stop_ratio=1e-10))
        assert tr.status == "collision"
        assert float(tr.t[0] + tr.t_left[0]) == pytest.approx(T_KEPLER, rel=1e-12)
        assert float(estimate_T_L(tr).T) == pytest.approx(T_KEPLER, rel=1e-10)
        assert tr.r_G()[-1] <= 1e-10 * tr.r_G()[0]

    def test_t_left_is_monotone(self, runs):
        tr = runs("kepler_pair").trajectory
        assert np.all(np.diff(np.asarray(tr.t_left, float)) < 0)
        assert tr.t_left[-1] == 0

    def test_step_size_proportional_to_time_left(self, runs):
        tr = runs("kepler_pair").trajectory
        raw_t = np.asarray(tr.raw.y[:, -1], float)
        h = np.diff(raw_t)
        left = raw_t[-1] - raw_t[:-1]
        sel = left < 1e-4 * left[0]
        ratio = h[sel][:-3] / left[sel][:-3]
        assert ratio.max() / ratio.min() < 3

    def test_transverse_velocity_misses(self):
        eps = 0.05
        st = State(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.array([[0.0, -eps], [0.0, eps]]))
        tr = integrate_to_collision(st, np.ones(2), PAIR, IntegratorConfig(rel_tol=1e-12, t_max=3.0))
        assert tr.status == "no_collision"
        # relative orbit: M = 2, specific energy and angular momentum of the separation vector
        M, h, E = 2.0, 2.0 * 2 * eps, (2 * eps) ** 2 / 2 - 2.0 / 2.0
        a, e = -M / (2 * E), np.sqrt(1 + 2 * E * h**2 / M**2)
        d = np.linalg.norm(np.asarray(tr.q[:, 0] - tr.q[:, 1], float), axis=1)
        assert d.min() > 0.5 * a * (1 - e)

    def test_coincident_bodies_rejected(self):
        st = State(np.zeros((2, 2)), np.zeros((2, 2)))
        with pytest.raises(SingularConfigurationError):
            integrate_to_collision(st, np.ones(2), PAIR)


class TestShooting:
    def test_symmetric_family_root_is_zero(self):
        def family(p):
            return State(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.array([[0.0, -p], [0.0, p]]))

        res = shoot_to_collision(family, (-0.05, 0.2), np.ones(2), PAIR, IntegratorConfig(rel_tol=1e-12),
                                 final_stop_ratio=1e-8)
        assert abs(res.param) < 1e-12
        assert res.trajectory.status == "collision"

    def test_bracket_without_sign_change(self):
        def family(p):
            return State(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.array([[0.0, -p], [0.0, p]]))

        with pytest.raises(ValueError):
            shoot_to_collision(family, (0.05, 0.2), np.ones(2), PAIR, IntegratorConfig(rel_tol=1e-10))
