import numpy as np
import pytest

from etconsensus import numerics


def expm_series(a, dt, terms=200):
    """Truncated power-series oracle for the matrix exponential."""
    acc = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, terms):
        term = term @ (a * dt) / k
        acc = acc + term
    return acc


class TestExpm:
    def test_zero_time_is_identity(self, a0):
        assert np.array_equal(numerics.expm(a0, 0.0), np.eye(2))

    def test_rotation_half_period(self, a0):
        # a0 @ a0 = -3 I, so the flow is a rotation with period 2*pi/sqrt(3)
        got = numerics.expm(a0, np.pi / np.sqrt(3.0))
        assert np.abs(got + np.eye(2)).max() <= 1e-12
        assert np.abs(got - expm_series(a0, np.pi / np.sqrt(3.0))).max() <= 1e-12

    def test_matches_series_oracle(self, a0):
        assert np.abs(numerics.expm(a0, 0.5) - expm_series(a0, 0.5)).max() <= 1e-12

    def test_semigroup_property(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = rng.uniform(-1, 1, (2, 2))
            s, t = rng.uniform(-1, 1, 2)
            lhs = numerics.expm(a, s + t)
            rhs = numerics.expm(a, s) @ numerics.expm(a, t)
            assert np.abs(lhs - rhs).max() <= 1e-10

    def test_non_square_rejected(self):
        with pytest.raises(numerics.DimensionError):
            numerics.expm(np.ones((2, 3)), 1.0)


class TestLeastNorm:
    def test_identity_system(self):
        x, res = numerics.solve_least_norm(np.eye(2), np.array([1.0, 2.0]))
        assert np.allclose(x, [1.0, 2.0]) and res <= 1e-14

    def test_min_norm_picks_zero_free_coordinate(self):
        m = np.array([[1.0, 0.0], [0.0, 0.0]])
        x, res = numerics.solve_least_norm(m, np.array([3.0, 0.0]))
        assert np.allclose(x, [3.0, 0.0]) and res <= 1e-14

    def test_matches_pinv_oracle(self):
        rng = np.random.default_rng(7)
        m = rng.normal(size=(6, 8))
        b = m @ rng.normal(size=8)  # consistent right-hand side
        x, res = numerics.solve_least_norm(m, b)
        assert res <= 1e-10
        assert np.abs(x - np.linalg.pinv(m) @ b).max() <= 1e-9

    def test_length_mismatch(self):
        with pytest.raises(numerics.DimensionError):
            numerics.solve_least_norm(np.eye(2), np.ones(3))


class TestLyapunov:
    def test_scalar_multiple(self):
        p = numerics.lyapunov_solve(-np.eye(2), 2.0 * np.eye(2))
        assert np.abs(p - np.eye(2)).max() <= 1e-12

    def test_diagonal_hand_solution(self):
        a = np.diag([-1.0, -2.0])
        p = numerics.lyapunov_solve(a, np.eye(2))
        assert np.abs(p - np.diag([0.5, 0.25])).max() <= 1e-12

    def test_marginal_spectrum_rejected(self, a0):
        with pytest.raises(numerics.NotHurwitzError):
            numerics.lyapunov_solve(a0, np.eye(2))

    def test_certificate_properties(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = rng.normal(size=(3, 3)) - 4.0 * np.eye(3)
            if numerics.hurwitz_margin(a) >= 0:
                continue
            p = numerics.lyapunov_solve(a, np.eye(3))
            assert np.abs(p - p.T).max() <= 1e-12
            assert np.linalg.eigvalsh(p).min() > 0
            assert np.linalg.norm(a.T @ p + p @ a + np.eye(3)) <= 1e-9


class TestHurwitzMargin:
    def test_diagonal(self):
        assert numerics.hurwitz_margin(-3.0 * np.eye(2)) == pytest.approx(-3.0)

    def test_imaginary_pair(self, a0):
        # characteristic polynomial s^2 + 3 = 0
        assert numerics.hurwitz_margin(a0) == pytest.approx(0.0, abs=1e-12)

    def test_unstable_plant(self, agent1):
        a, _, _ = agent1
        margin = numerics.hurwitz_margin(a)
        assert margin == pytest.approx(np.linalg.eigvals(a).real.max())
        assert margin > 0

    def test_shift_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            a = rng.normal(size=(3, 3))
            c = rng.normal()
            lhs = numerics.hurwitz_margin(a + c * np.eye(3))
            assert lhs == pytest.approx(numerics.hurwitz_margin(a) + c, abs=1e-9)


class TestVecMat:
    def test_roundtrip_bit_exact(self):
        rng = np.random.default_rng(5)
        for rows, cols in [(2, 2), (3, 2), (2, 5), (1, 4)]:
            m = rng.normal(size=(rows, cols))
            assert np.array_equal(numerics.mat(numerics.vec(m), rows, cols), m)

    def test_identity_stacking(self):
        assert np.array_equal(numerics.vec(np.eye(2)), [1.0, 0.0, 0.0, 1.0])

    def test_column_major_order(self):
        m = np.array([[1.0, 3.0], [2.0, 4.0]])  # [[a, b], [c, d]]
        assert np.array_equal(numerics.vec(m), [1.0, 2.0, 3.0, 4.0])

    def test_length_mismatch(self):
        with pytest.raises(numerics.DimensionError):
            numerics.mat(np.ones(3), 2, 2)
