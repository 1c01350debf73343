import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbcollide.coords import (
    ChartError, best_order, dA_dir, dB_over_N, energy_shape, fubini_eval, fubini_matrix_polarized, grad_F, grad_V,
    hess_V, jacobi_basis, jacobi_forward, jacobi_inverse, mu_shape, potential_V, shape_forward, shape_inverse,
    to_complex, to_real,
)
from nbcollide.core import ClusterPartition, State, cluster_observables, potential_terms


def rot(a):
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


def cluster(rng, k, spread=1.0):
    while True:
        q = rng.uniform(-spread, spread, size=(k, 2))
        d = np.linalg.norm(q[:, None] - q[None], axis=-1) + np.eye(k)
        if d.min() > 0.1:
            return q, rng.normal(size=(k, 2)), rng.uniform(0.3, 3.0, k)


def central_diff(f, x, h=1e-6):
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


class TestJacobi:
    def test_pair_example(self):
        fr = jacobi_forward(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.ones(2))
        assert fr.z[0] == 2
        assert fr.c == 0
        np.testing.assert_allclose(fr.basis.mu, [0.5])
        assert (fr.basis.mu * abs(fr.z) ** 2).sum() == pytest.approx(2.0)

    @pytest.mark.parametrize("k", [2, 3, 4, 5])
    def test_inertia_identity(self, rng, k):
        for _ in range(10):
            q, _, m = cluster(rng, k)
            fr = jacobi_forward(q, m)
            c = (m[:, None] * q).sum(0) / m.sum()
            I0 = (m * ((q - c) ** 2).sum(1)).sum()
            assert fr.r**2 == pytest.approx(I0, rel=1e-13)
            np.testing.assert_allclose([fr.c.real, fr.c.imag], c, rtol=1e-13, atol=1e-15)

    def test_roundtrip_random_4body(self, rng):
        worst = 0.0
        for _ in range(100):
            q, _, m = cluster(rng, 4)
            order = tuple(rng.permutation(4))
            qb = jacobi_inverse(jacobi_forward(q, m, order))
            worst = max(worst, np.abs(qb - q).max() / np.abs(q).max())
        assert worst < 1e-12

    def test_zero_frame_gives_centre(self):
        fr = jacobi_forward(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.ones(3))
        zero = type(fr)(np.zeros_like(fr.z), 0.3 + 0.2j, fr.basis)
        np.testing.assert_allclose(jacobi_inverse(zero), [[0.3, 0.2]] * 3)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-np.pi, np.pi), st.integers(0, 2**32 - 1))
    def test_rotation_equivariance(self, alpha, seed):
        rng = np.random.default_rng(seed)
        q, _, m = cluster(rng, 4)
        z1 = jacobi_forward(q, m).z
        z2 = jacobi_forward(q @ rot(alpha).T, m).z
        np.testing.assert_allclose(z2, np.exp(1j * alpha) * z1, rtol=0, atol=1e-13)

    def test_bad_order(self):
        with pytest.raises(ValueError):
            jacobi_basis(np.ones(3), (0, 0, 1))

    def test_best_order_avoids_small_last_vector(self):
        # bodies 0 and 1 nearly coincide; an order ending with them is bad
        q = np.array([[0.0, 0.0], [1e-3, 0.0], [1.0, 1.0]])
        order = best_order(q, np.ones(3))
        fr = jacobi_forward(q, np.ones(3), order)
        assert np.sqrt(fr.basis.mu[-1]) * abs(fr.z[-1]) / fr.r > 0.5


class TestShapeChart:
    def test_two_body_chart(self):
        st_ = shape_forward(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.zeros((2, 2)), np.ones(2))
        assert st_.s.size == 0
        assert st_.r == pytest.approx(np.sqrt(2))
        assert st_.theta == 0.0

    def test_equilateral_mu(self):
        q = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        qd = np.array([[0.1, -0.3], [0.4, 0.2], [-0.2, 0.5]])
        m = np.ones(3)
        st_ = shape_forward(q, qd, m)
        ob = cluster_observables(State(q, qd), m, ClusterPartition.whole(3))
        assert st_.mu == pytest.approx(ob.mu, abs=1e-10)
        assert mu_shape(st_) == pytest.approx(ob.mu, abs=1e-10)

    def test_static_zero_mu(self):
        q = np.array([[0.0, 0.0], [1.0, 0.0], [0.2, 0.7]])
        st_ = shape_forward(q, np.zeros((3, 2)), np.ones(3))
        assert st_.mu == 0.0
        assert mu_shape(st_) == 0.0

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_roundtrip(self, rng, k):
        for _ in range(30):
            q, qd, m = cluster(rng, k)
            st_ = shape_forward(q, qd, m)
            qb, qdb = shape_inverse(st_)
            np.testing.assert_allclose(qb, q, rtol=0, atol=1e-12)
            np.testing.assert_allclose(qdb, qd, rtol=0, atol=1e-12 * np.abs(qd).max())

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-3.0, 3.0), st.integers(0, 2**32 - 1))
    def test_so2_equivariance(self, alpha, seed):
        rng = np.random.default_rng(seed)
        q, qd, m = cluster(rng, 3)
        order = best_order(q, m)
        a = shape_forward(q, qd, m, order)
        b = shape_forward(q @ rot(alpha).T, qd @ rot(alpha).T, m, order)
        assert b.r == pytest.approx(a.r, rel=1e-13)
        np.testing.assert_allclose(b.s, a.s, rtol=0, atol=1e-12)
        d = (b.theta - a.theta - alpha + np.pi) % (2 * np.pi) - np.pi
        assert abs(d) < 1e-12

    def test_chart_boundary(self):
        # last Jacobi vector exactly zero for the identity order
        q = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(ChartError):
            shape_forward(q, np.zeros((3, 2)), np.ones(3), order=(0, 1, 2))

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_potential_homogeneity(self, rng, k):
        for _ in range(20):
            q, qd, m = cluster(rng, k)
            st_ = shape_forward(q, qd, m)
            UG = potential_terms(q, m, ClusterPartition.whole(k))[0]
            assert potential_V(st_.s, st_.basis) / st_.r == pytest.approx(UG, rel=1e-12)


class TestFubini:
    def test_zero_velocity(self, rng):
        b = jacobi_basis(np.ones(4))
        fe = fubini_eval(rng.normal(size=4), np.zeros(4), b)
        assert fe.F == 0 and fe.Omega == 0 and fe.G == 0

    def test_quadratic_form_and_polarisation(self, rng):
        b = jacobi_basis(np.array([1.0, 2.0, 0.5, 1.5]))
        for _ in range(20):
            s, w = rng.normal(size=4), rng.normal(size=4)
            fe = fubini_eval(s, w, b)
            assert w @ fe.A @ w == pytest.approx(fe.F, rel=1e-13)
            assert fe.B @ w == pytest.approx(fe.Omega, rel=1e-13, abs=1e-15)
            np.testing.assert_allclose(fubini_matrix_polarized(s, b), fe.A, rtol=1e-10, atol=1e-14)

    def test_kinetic_energy_split(self, rng):
        # Cartesian oracle: K - M|cdot|^2/2 = rho^2/2 + mu^2/(2 r^2) + r^2 F / 2
        for _ in range(30):
            q, qd, m = cluster(rng, 4)
            st_ = shape_forward(q, qd, m)
            fe = fubini_eval(st_.s, st_.omega, st_.basis)
            K = 0.5 * (m * (qd**2).sum(1)).sum() - 0.5 * m.sum() * (st_.cdot**2).sum()
            rhs = st_.rho**2 / 2 + st_.mu**2 / (2 * st_.r**2) + st_.r**2 * fe.F / 2
            assert rhs == pytest.approx(K, rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_F_positive_semidefinite(self, seed):
        rng = np.random.default_rng(seed)
        b = jacobi_basis(rng.uniform(0.2, 3.0, 4))
        s, w = rng.normal(size=4) * 2, rng.normal(size=4)
        fe = fubini_eval(s, w, b)
        assert fe.F > 0
        assert np.linalg.eigvalsh(fe.A).min() > 0

    def test_grad_V_finite_difference(self, rng):
        b = jacobi_basis(np.array([1.0, 1.3, 0.7, 2.0]))
        worst = 0.0
        for _ in range(50):
            q, _, _ = cluster(rng, 4)
            fr = jacobi_forward(q, b.masses, best_order(q, b.masses))
            s = to_real(fr.z[:-1] / fr.z[-1])
            bb = fr.basis
            g = grad_V(s, bb)
            fd = central_diff(lambda x: potential_V(x, bb), s)
            worst = max(worst, np.abs(g - fd).max() / np.abs(g).max())
        assert worst < 1e-6

    def test_hess_V_finite_difference(self, rng):
        b = jacobi_basis(np.ones(3))
        for _ in range(10):
            s = rng.normal(size=2) + [0.0, 1.2]
            H = hess_V(s, b)
            fd = central_diff(lambda x: grad_V(x, b), s)
            np.testing.assert_allclose(H, fd, rtol=1e-5, atol=1e-6 * np.abs(H).max())
            np.testing.assert_allclose(H, H.T, rtol=1e-12, atol=1e-14)

    def test_grad_F_and_metric_derivatives(self, rng):
        b = jacobi_basis(np.array([1.0, 2.0, 0.5, 1.5]))
        for _ in range(10):
            s, w = rng.normal(size=4), rng.normal(size=4)
            fd = central_diff(lambda x: fubini_eval(x, w, b).F, s)
            np.testing.assert_allclose(grad_F(s, w, b), fd, rtol=1e-6, atol=1e-9)
            dA = central_diff(lambda x: fubini_eval(x, w, b).A @ w, s) @ w
            np.testing.assert_allclose(dA_dir(s, w, b), dA, rtol=1e-6, atol=1e-9)
            dB = central_diff(lambda x: fubini_eval(x, w, b).B / fubini_eval(x, w, b).N, s)
            np.testing.assert_allclose(dB_over_N(s, b), dB, rtol=1e-6, atol=1e-9)

    def test_complex_real_roundtrip(self, rng):
        z = rng.normal(size=3) + 1j * rng.normal(size=3)
        np.testing.assert_array_equal(to_complex(to_real(z)), z)


class TestEnergy:
    def test_circular_pair(self):
        q = np.array([[-1.0, 0.0], [1.0, 0.0]])
        qd = np.array([[0.0, -0.5], [0.0, 0.5]])
        m = np.ones(2)
        H = 0.5 * (m * (qd**2).sum(1)).sum() - 0.5
        assert H == pytest.approx(-0.25)
        assert energy_shape(shape_forward(q, qd, m)) == pytest.approx(H, rel=1e-14)

    def test_static_energy(self, rng):
        q, _, m = cluster(rng, 3)
        st_ = shape_forward(q, np.zeros((3, 2)), m)
        assert energy_shape(st_) == pytest.approx(-potential_V(st_.s, st_.basis) / st_.r, rel=1e-14)

    def test_agreement_random_states(self, rng):
        worst = 0.0
        for _ in range(100):
            k = int(rng.integers(2, 5))
            q, qd, m = cluster(rng, k)
            UG = potential_terms(q, m, ClusterPartition.whole(k))[0]
            K = 0.5 * (m * (qd**2).sum(1)).sum()
            st_ = shape_forward(q, qd, m)
            worst = max(worst, abs(energy_shape(st_) - (K - UG)) / (K + UG))
        assert worst < 1e-10

    def test_longdouble_chart(self, rng):
        q, qd, m = cluster(rng, 3)
        st_ = shape_forward(q.astype(np.longdouble), qd.astype(np.longdouble), m.astype(np.longdouble))
        assert np.asarray(st_.s).dtype == np.longdouble
        qb, _ = shape_inverse(st_)
        assert np.abs(qb - q).max() < 1e-17
