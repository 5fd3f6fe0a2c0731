import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tfde_inverse.fbm import generate_fbm
from tfde_inverse.fdm import (GridSpec, assemble_beta, assemble_rhs, caputo_weights_a,
                              caputo_weights_b, classify, impulse_response, march,
                              simulate_ensemble, solve_forward, step_matrix, tridiag_factor,
                              tridiag_solve)
from tfde_inverse.spectral import dft_boundary

PI = math.pi
GRID = GridSpec(4 * PI, 100, 128)
REGIME_ORDERS = {"SubSub": [0.3, 0.6], "SubSuper": [0.3, 1.5], "SuperSuper": [1.2, 1.7]}

# 2 + h^2 / (tau^0.3 Gamma(1.7)) + 2 h^2 / (tau^1.5 Gamma(1.5)), tau = 4 pi / 100,
# h = 1 / 128, evaluated with mpmath at 30 digits.
BETA_MIXED = 2.0032172256972245023


class TestWeights:
    def test_a(self):
        a = caputo_weights_a(0.5, 10)
        assert a[0] == 1.0
        assert a[1] == pytest.approx(math.sqrt(2) - 1)
        assert np.all(np.diff(a) < 0) and np.all(a > 0)

    def test_b(self):
        b = caputo_weights_b(1.5, 10)
        assert b[0] == 1.0
        assert b[1] == pytest.approx(2**0.5 - 1)
        assert np.all(np.diff(b) < 0) and np.all(b > 0)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5])
    def test_a_range(self, alpha):
        with pytest.raises(ValueError):
            caputo_weights_a(alpha, 3)

    @pytest.mark.parametrize("alpha", [1.0, 2.0, 0.5])
    def test_b_range(self, alpha):
        with pytest.raises(ValueError):
            caputo_weights_b(alpha, 3)


def test_classify():
    for regime, orders in REGIME_ORDERS.items():
        assert classify(orders) == regime
    with pytest.raises(ValueError):
        classify([0.5, 1.0])


class TestBeta:
    def test_subsub(self):
        o = [0.3, 0.6]
        g = GRID
        expected = 2 + sum(g.h**2 / (g.tau**a * math.gamma(2 - a)) for a in o)
        assert assemble_beta("SubSub", o, g) == pytest.approx(expected, rel=1e-15)

    def test_oracle(self):
        assert assemble_beta("SubSuper", [0.3, 1.5], GRID) == pytest.approx(BETA_MIXED, rel=1e-15)

    def test_fine_space_limit(self):
        vals = [assemble_beta("SuperSuper", [1.2, 1.7], GridSpec(1.0, 10, M)) for M in (10, 100, 1000)]
        assert vals[0] > vals[1] > vals[2] > 2.0
        assert vals[2] - 2.0 < 2e-4

    def test_regime_mismatch(self):
        with pytest.raises(ValueError):
            assemble_beta("SubSub", [0.3, 1.5], GRID)


# ---- direct-sum reference for the right-hand side -----------------------------------------

def _lap(u):
    # second difference with u_{-1} = u_1 and u_M = 0
    ext = np.concatenate([[u[1]], u, [0.0]])
    return ext[:-2] - 2 * ext[1:-1] + ext[2:]


def _l1(alpha, U, n, tau):
    # tau^-alpha / Gamma(2 - alpha) * sum_{k=1}^{n} a_{n-k} (u^k - u^{k-1})
    tot = 0.0
    for k in range(1, n + 1):
        a = (n - k + 1) ** (1 - alpha) - (n - k) ** (1 - alpha)
        tot = tot + a * (U[k] - U[k - 1])
    return tot / (tau**alpha * math.gamma(2 - alpha))


def _half_level(alpha, U, n, tau):
    # tau^-alpha / Gamma(3 - alpha) * sum_{k=1}^{n} b_{n-k} (d_k - d_{k-1}),
    # d_k = u^k - u^{k-1}, d_0 = 0 (zero initial velocity)
    tot = 0.0
    for k in range(1, n + 1):
        b = (n - k + 1) ** (2 - alpha) - (n - k) ** (2 - alpha)
        d_k = U[k] - U[k - 1]
        d_prev = U[k - 1] - U[k - 2] if k >= 2 else 0.0
        tot = tot + b * (d_k - d_prev)
    return tot / (tau**alpha * math.gamma(3 - alpha))


def reference_rhs(orders, grid, history, f, dB):
    """w^n = -E(0), where E(u^n) is the full scheme residual at level n."""
    n = len(history)
    h, tau = grid.h, grid.tau
    U = np.vstack([history, np.zeros(grid.M)])
    regime = classify(orders)
    if regime == "SubSub":
        lhs = h**2 * sum(_l1(a, U, n, tau) for a in orders) - _lap(U[n])
        rhs = h * f[n] * dB
    else:
        lhs = 0.0
        for a in orders:
            if a < 1:
                lhs = lhs + h**2 * (_l1(a, U, n, tau) + (_l1(a, U, n - 1, tau) if n >= 2 else 0.0))
            else:
                lhs = lhs + 2 * h**2 * _half_level(a, U, n, tau)
        lhs = lhs - _lap(U[n]) - _lap(U[n - 1])
        rhs = h * (f[n] + f[n - 1]) * dB
    return -(lhs - rhs)


class TestRhs:
    def test_zero_start(self):
        g = GridSpec(1.0, 10, 8)
        w = assemble_rhs("SubSub", [0.3, 0.6], g, np.zeros((1, 8)), np.zeros(11), np.ones(8))
        assert np.array_equal(w, np.zeros(8))

    def test_source_isolation(self):
        g = GridSpec(1.0, 10, 8)
        f = np.zeros(11)
        f[1] = 1.0
        e = np.zeros(8)
        e[3] = 1.0
        w = assemble_rhs("SubSub", [0.3, 0.6], g, np.zeros((1, 8)), f, e)
        expected = np.zeros(8)
        expected[3] = g.h
        assert np.allclose(w, expected, atol=0)

    @pytest.mark.parametrize("regime", list(REGIME_ORDERS))
    @pytest.mark.parametrize("n", [1, 2, 3, 7])
    def test_direct_sum_reference(self, regime, n):
        orders = REGIME_ORDERS[regime]
        g = GridSpec(2.0, 12, 6)
        rng = np.random.default_rng(n)
        hist = rng.standard_normal((n, g.M))
        hist[0] = 0.0
        f = np.concatenate([[0.0], rng.standard_normal(g.N)])
        dB = rng.standard_normal(g.M)
        w = assemble_rhs(regime, orders, g, hist, f, dB)
        ref = reference_rhs(orders, g, hist, f, dB)
        assert np.allclose(w, ref, rtol=1e-12, atol=1e-12)

    def test_history_length_mismatch(self):
        g = GridSpec(1.0, 10, 8)
        with pytest.raises(ValueError):
            assemble_rhs("SubSub", [0.3, 0.6], g, np.zeros((2, 8)), np.zeros(11), np.ones(8), n=3)
        with pytest.raises(ValueError):
            assemble_rhs("SubSub", [0.3, 0.6], g, np.zeros((2, 8)), np.zeros(11), np.ones(5))


class TestTridiag:
    def test_ones(self):
        A = step_matrix(2.5, 9)
        x = tridiag_solve(2.5, A @ np.ones(9))
        assert np.allclose(x, 1.0, atol=1e-13)

    def test_small_system(self):
        A = np.array([[3.0, -2.0, 0.0], [-1.0, 3.0, -1.0], [0.0, -1.0, 3.0]])
        expected = np.linalg.solve(A, [1.0, 0.0, 0.0])
        assert np.allclose(tridiag_solve(3.0, np.array([1.0, 0.0, 0.0])), expected, atol=1e-15)
        assert np.allclose(step_matrix(3.0, 3), A)

    @settings(deadline=None)
    @given(st.floats(2.0 + 1e-6, 50.0), st.integers(2, 200), st.integers(0, 2**32 - 1))
    def test_residual(self, beta, M, seed):
        b = np.random.default_rng(seed).standard_normal(M)
        x = tridiag_solve(beta, b)
        r = step_matrix(beta, M) @ x - b
        assert np.abs(r).max() <= 1e-10 * np.abs(b).max()

    def test_batched(self):
        rng = np.random.default_rng(0)
        b = rng.standard_normal((7, 4, 3))
        x = tridiag_solve(2.1, b)
        for i in range(4):
            for j in range(3):
                assert np.allclose(x[:, i, j], np.linalg.solve(step_matrix(2.1, 7), b[:, i, j]))

    def test_rejects_singular(self):
        with pytest.raises(ValueError):
            tridiag_factor(2.0, 5)


class TestForward:
    orders = [0.3, 1.5]
    grid = GridSpec(4 * PI, 40, 32)

    def source(self):
        return np.sin(self.grid.t) * np.exp(-self.grid.t / 6)

    def test_zero_source(self):
        path = generate_fbm(0.5, 32, 1)
        assert np.array_equal(solve_forward(self.orders, self.grid, np.zeros(41), path), np.zeros(41))

    def test_linearity_and_homogeneity(self):
        path = generate_fbm(0.7, 32, 2)
        f = self.source()
        u = solve_forward(self.orders, self.grid, f, path)
        assert np.allclose(solve_forward(self.orders, self.grid, 2 * f, path), 2 * u, rtol=1e-13, atol=0)
        dB = np.diff(path.values)
        assert np.allclose(solve_forward(self.orders, self.grid, f, -3 * dB), -3 * u, rtol=1e-13, atol=0)
        assert u[0] == 0.0

    def test_rejects_nonzero_initial_source(self):
        with pytest.raises(ValueError):
            solve_forward(self.orders, self.grid, np.ones(41), generate_fbm(0.5, 32, 0))
        with pytest.raises(ValueError):
            solve_forward(self.orders, self.grid, np.zeros(40), generate_fbm(0.5, 32, 0))
        with pytest.raises(ValueError):
            solve_forward(self.orders, self.grid, np.zeros(41), generate_fbm(0.5, 16, 0))

    def test_boundary_conditions_in_field(self):
        rng = np.random.default_rng(3)
        forcing = np.zeros((41, 32))
        forcing[1:] = rng.standard_normal((40, 32))
        U = march(self.orders, self.grid, forcing)
        assert np.array_equal(U[0], np.zeros(32))
        # one step of the recurrence reproduces the right-hand side through the step matrix
        beta = assemble_beta("SubSuper", self.orders, self.grid)
        w = assemble_rhs("SubSuper", self.orders, self.grid, U[:5], np.zeros(41), np.zeros(32)) + forcing[5]
        assert np.allclose(step_matrix(beta, 32) @ U[5], w, atol=1e-12)

    @pytest.mark.parametrize("regime", list(REGIME_ORDERS))
    def test_ensemble_single_path(self, regime):
        orders = REGIME_ORDERS[regime]
        ens = simulate_ensemble(orders, self.grid, self.source(), 0.6, 1, 42)
        direct = solve_forward(orders, self.grid, self.source(), generate_fbm(0.6, 32, 42, 0))
        assert ens.traces.shape == (1, 41)
        assert np.allclose(ens.traces[0], direct, rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("regime", list(REGIME_ORDERS))
    def test_superposition_matches_march(self, regime):
        orders = REGIME_ORDERS[regime]
        a = simulate_ensemble(orders, self.grid, self.source(), 0.3, 5, 1, method="superpose")
        b = simulate_ensemble(orders, self.grid, self.source(), 0.3, 5, 1, method="march")
        assert np.allclose(a.traces, b.traces, rtol=1e-12, atol=1e-15)

    def test_ensemble_zero_and_determinism(self):
        z = simulate_ensemble(self.orders, self.grid, np.zeros(41), 0.5, 4, 0)
        assert not z.traces.any()
        a = simulate_ensemble(self.orders, self.grid, self.source(), 0.5, 6, 9)
        b = simulate_ensemble(self.orders, self.grid, self.source(), 0.5, 6, 9)
        assert a.traces.tobytes() == b.traces.tobytes()
        assert np.all(a.traces[:, 0] == 0)

    def test_ensemble_rejects(self):
        with pytest.raises(ValueError):
            simulate_ensemble(self.orders, self.grid, self.source(), 0.5, 0, 0)
        with pytest.raises(ValueError):
            simulate_ensemble(self.orders, self.grid, self.source(), 0.5, 2, 0, method="nope")

    def test_impulse_response_shift(self):
        # forcing at level 3 equals the level-1 response delayed by two steps
        R = impulse_response(self.orders, self.grid)
        forcing = np.zeros((41, 32))
        forcing[3, 5] = 1.0
        u = march(self.orders, self.grid, forcing)[:, 0]
        assert np.allclose(u[3:], R[1:39, 5], rtol=1e-12, atol=1e-16)
        assert not u[:3].any()


def test_ensemble_mean_vanishes():
    f = np.sin(GRID.t) * np.exp(-GRID.t / 6)
    ens = simulate_ensemble([0.3, 1.5], GRID, f, 0.5, 10_000, 4)
    z = dft_boundary(ens.traces, GRID, np.array([0.5, 1.0, 2.0]))
    se_re = z.real.std(axis=0, ddof=1) / 100
    se_im = z.imag.std(axis=0, ddof=1) / 100
    assert np.all(np.abs(z.real.mean(axis=0)) <= 3 * se_re)
    assert np.all(np.abs(z.imag.mean(axis=0)) <= 3 * se_im)
