import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbcollide.blowup import (
    BlowupState, field_autonomous, field_full, jacobian_autonomous, mcgehee_observables, mcgehee_time, pack,
    perturbation_eval, restpoints, energy_relation, unpack,
)
from nbcollide.coords import jacobi_basis, potential_V, shape_forward

# equilateral triangle in chart order (0, 1, 2): s = z1 / z2 = -2i/sqrt(3)
S_LAGRANGE = np.array([0.0, -2 / np.sqrt(3)])
B3 = jacobi_basis(np.ones(3))
B2 = jacobi_basis(np.ones(2))


def random_phase(rng, dim_s=2):
    return np.concatenate([[rng.uniform(0.01, 2.0), rng.normal()], rng.normal(size=dim_s) + [0.0, 1.0],
                           rng.normal(size=dim_s)])


class TestAutonomousField:
    def test_pack_unpack(self, rng):
        b = BlowupState(0.3, -1.0, rng.normal(size=2), rng.normal(size=2))
        r, v, s, w = unpack(pack(b))
        assert (r, v) == (0.3, -1.0)
        np.testing.assert_array_equal(s, b.s)
        np.testing.assert_array_equal(w, b.w)

    @pytest.mark.parametrize("which", [0, 1])
    def test_lagrange_restpoints(self, which):
        z = restpoints(S_LAGRANGE, B3)[which]
        assert abs(z[1]) == pytest.approx(np.sqrt(2 * potential_V(S_LAGRANGE, B3)), rel=1e-15)
        assert np.abs(field_autonomous(z, B3)).max() < 1e-12

    def test_restpoint_potential_is_cc_value(self):
        # normalised potential of the unit equilateral triangle is 3
        assert potential_V(S_LAGRANGE, B3) == pytest.approx(3.0, rel=1e-14)

    @pytest.mark.parametrize("r,v", [(1.0, -1.0), (0.3, 0.7), (0.0, 2.0)])
    def test_two_body_field(self, r, v):
        V = potential_V(np.zeros(0), B2)
        np.testing.assert_allclose(field_autonomous([r, v], B2), [v * r, v * v / 2 - V], rtol=1e-15)

    def test_two_body_jacobian(self):
        J = jacobian_autonomous([0.4, -0.9], B2)
        np.testing.assert_allclose(J, [[-0.9, 0.4], [0.0, -0.9]], rtol=1e-8, atol=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_time_reversal(self, seed):
        z = random_phase(np.random.default_rng(seed))
        flip = np.array([1, -1, 1, 1, -1, -1.0])
        np.testing.assert_allclose(field_autonomous(flip * z, B3), -flip * field_autonomous(z, B3),
                                   rtol=1e-12, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_collision_manifold_invariant(self, seed):
        z = random_phase(np.random.default_rng(seed))
        z[0] = 0.0
        assert field_autonomous(z, B3)[0] == 0.0


class TestPerturbation:
    def test_isolated_cluster_unperturbed(self, rng):
        b = BlowupState(0.2, -1.0, rng.normal(size=2), rng.normal(size=2), theta=0.4, mu=0.0)
        pe = perturbation_eval(b, [0.0, 0.0], np.zeros((0, 2)), np.zeros(0), B3)
        assert pe.delta_v == 0.0
        assert np.all(pe.delta_w == 0.0)
        assert pe.mudot == 0.0

    def test_mu_squared_over_r(self):
        pe = perturbation_eval(BlowupState(1e-4, -1.0, np.zeros(0), np.zeros(0), mu=1e-6), [0.0, 0.0],
                               np.zeros((0, 2)), np.zeros(0), B2)
        assert pe.delta_v == pytest.approx(1e-8, rel=1e-14)
        assert pe.delta_theta == pytest.approx(1e-4, rel=1e-14)

    def test_full_minus_autonomous(self, rng):
        for _ in range(10):
            z = random_phase(rng)
            r, v, s, w = unpack(z)
            b = BlowupState(r, v, s, w, theta=rng.uniform(-3, 3), mu=rng.normal() * 0.1)
            c, q_ext, m_ext = rng.normal(size=2), rng.normal(size=(2, 2)) * 5, np.array([1.0, 2.0])
            full = field_full(b, c, q_ext, m_ext, B3)
            auto = field_autonomous(z, B3)
            pe = perturbation_eval(b, c, q_ext, m_ext, B3)
            assert full["v"] - auto[1] == pytest.approx(pe.delta_v, rel=1e-10, abs=1e-13)
            np.testing.assert_allclose(full["w"] - auto[4:], pe.delta_w, rtol=1e-9, atol=1e-12)
            assert full["r"] == auto[0]
            assert full["t"] == pytest.approx(r**1.5)

    def test_external_derivatives_finite_difference(self, rng):
        # dU_ext/dr, dU_ext/dtheta against the Cartesian external potential
        from nbcollide.coords import shape_inverse
        q = np.array([[0.0, 0.0], [0.3, 0.1], [0.1, 0.35]])
        st_ = shape_forward(q, np.zeros((3, 2)), np.ones(3))
        q_ext, m_ext = np.array([[2.0, 1.0], [-1.5, 2.5]]), np.array([1.0, 0.5])

        def U_ext(r, theta):
            from dataclasses import replace
            qq, _ = shape_inverse(replace(st_, r=r, theta=theta))
            d = np.linalg.norm(qq[:, None] - q_ext[None], axis=-1)
            return (m_ext[None] / d).sum()

        b = BlowupState(st_.r, 0.0, st_.s, np.zeros(2), theta=st_.theta)
        pe = perturbation_eval(b, st_.c, q_ext, m_ext, st_.basis)
        h = 1e-6
        assert pe.dU_dr == pytest.approx((U_ext(st_.r + h, st_.theta) - U_ext(st_.r - h, st_.theta)) / (2 * h),
                                         rel=1e-6)
        assert pe.mudot == pytest.approx((U_ext(st_.r, st_.theta + h) - U_ext(st_.r, st_.theta - h)) / (2 * h),
                                         rel=1e-6)


class TestTime:
    @pytest.mark.parametrize("T,a", [(1.0, 1.0), (2.5, 0.7)])
    def test_mcgehee_time_closed_form(self, T, a):
        # r = a (T - t)^{2/3} gives tau = a^{-3/2} log(T / (T - t))
        t = T - np.logspace(0, -8, 4000) * T
        r = a * (T - t) ** (2 / 3)
        tau = mcgehee_time(t, r, T)
        exact = a**-1.5 * np.log(T / (T - t))
        assert np.abs(tau - exact).max() / exact.max() < 1e-6


class TestAlongRuns:
    def test_kepler_velocity_limit(self, runs):
        bs = mcgehee_observables(runs("kepler_pair").trajectory)
        v_star = restpoints(np.zeros(0), bs.basis)[0][1]
        assert bs.v[-1] == pytest.approx(v_star, rel=1e-2)
        assert bs.r[-1] < 1e-9

    def test_energy_relation_kepler(self, runs):
        traj = runs("kepler_pair").trajectory
        bs = mcgehee_observables(traj)
        m = np.asarray(traj.masses, float)
        q0, v0 = np.asarray(traj.q[0], float), np.asarray(traj.qdot[0], float)
        H = 0.5 * (m * (v0**2).sum(1)).sum() - m[0] * m[1] / np.linalg.norm(q0[0] - q0[1])
        for i in range(0, len(bs), max(1, len(bs) // 20)):
            lhs, rhs = energy_relation(bs.state(i), bs.basis, H, m.sum(), 0.0)
            assert lhs == pytest.approx(rhs, abs=1e-9 * max(1.0, abs(bs.v[i]) ** 2))

    def test_lagrange_shape_frozen(self, runs):
        bs = mcgehee_observables(runs("lagrange_homothetic").trajectory)
        assert np.abs(bs.w).max() < 1e-8
        assert np.ptp(bs.s, axis=0).max() < 1e-8
        assert bs.v[-1] == pytest.approx(-np.sqrt(6.0), rel=1e-2)
