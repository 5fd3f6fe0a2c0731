import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tfde_inverse.fdm import GridSpec, simulate_ensemble
from tfde_inverse.frac_core import compute_R
from tfde_inverse.rng import substream
from tfde_inverse.spectral import (FrequencyGrid, NoisySpec, PhaselessModes, add_noise,
                                   dft_boundary, dft_matrix, ensemble_variance,
                                   perturbation_gain, recover_fhat_abs, variance_standard_error)

PI = math.pi
GRID = GridSpec(4 * PI, 100, 128)


class TestNoise:
    def test_identity(self):
        u = np.linspace(0, 1, 11)
        assert np.array_equal(add_noise(u, NoisySpec(0.0, 1), 0), u)

    def test_zero_trace(self):
        assert not add_noise(np.zeros(20), NoisySpec(0.3, 1), 0).any()

    @given(st.integers(0, 2**63), st.integers(0, 100))
    def test_bounded(self, seed, index):
        u = np.linspace(-2, 3, 40)
        v = add_noise(u, NoisySpec(0.05, seed), index)
        assert np.all(np.abs(v - u) <= 0.05 * np.abs(u) + 1e-15)

    def test_fresh_rows_and_streams(self):
        u = np.ones((3, 50))
        spec = NoisySpec(0.1, 7)
        v = add_noise(u, spec, 0)
        assert not np.array_equal(v[0], v[1])
        assert np.array_equal(v, add_noise(u, spec, 0))
        assert not np.array_equal(v, add_noise(u, spec, 1))

    def test_uniform_moments(self):
        v = add_noise(np.ones(200_000), NoisySpec(1.0, 3), 0) - 1.0
        assert abs(v.mean()) < 3 * math.sqrt(1 / 3 / v.size)
        assert abs(v.var() - 1 / 3) < 0.01
        assert v.min() >= -1 and v.max() <= 1

    def test_negative_level(self):
        with pytest.raises(ValueError):
            NoisySpec(-0.01)


class TestGrid:
    def test_nodes(self):
        g = FrequencyGrid(3 * PI, 64)
        n = g.nodes
        assert n[0] == 0 and n[-1] == pytest.approx(3 * PI) and n.size == 64
        assert np.allclose(np.diff(n), 3 * PI / 63)

    def test_invalid(self):
        with pytest.raises(ValueError):
            FrequencyGrid(1.0, 0)
        with pytest.raises(ValueError):
            FrequencyGrid(-1.0, 4)


def test_phaseless_modes_validation():
    m = PhaselessModes(np.arange(3.0), [[0.0, 1.0, 2.0]])
    assert m.magnitudes.shape == (1, 3)
    with pytest.raises(ValueError):
        PhaselessModes(np.arange(2.0), [[1.0, -1.0]])
    with pytest.raises(ValueError):
        PhaselessModes(np.arange(2.0), [[1.0, np.nan]])


class TestDft:
    def test_constant(self):
        assert dft_boundary(np.full(101, 2.5), GRID, 0.0) == pytest.approx(2.5 * GRID.tau * 101)

    def test_delta(self):
        d = np.zeros(101)
        d[0] = 1.0
        assert dft_boundary(d, GRID, 1.7) == pytest.approx(GRID.tau)

    def test_sine_closed_form(self):
        # int_0^{4 pi} sin t e^{-i t} dt = -2 pi i
        v = dft_boundary(np.sin(GRID.t), GRID, 1.0)
        assert abs(v - (-2j * PI)) <= GRID.tau

    def test_decaying_source_closed_form(self):
        a = 1 / 6 + 2j
        T = GRID.T
        exact = (1 - np.exp(-a * T) * (a * math.sin(T) + math.cos(T))) / (a * a + 1)
        v = dft_boundary(np.sin(GRID.t) * np.exp(-GRID.t / 6), GRID, 2.0)
        assert abs(v - exact) <= 2 * GRID.tau * abs(exact)

    @given(st.floats(-30, 30))
    def test_conjugate_symmetry(self, w):
        u = np.cos(GRID.t) * GRID.t
        assert dft_boundary(u, GRID, -w) == pytest.approx(np.conj(dft_boundary(u, GRID, w)), rel=1e-12,
                                                          abs=1e-12)

    def test_vectorised(self):
        rng = np.random.default_rng(0)
        U = rng.standard_normal((4, 101))
        w = np.array([0.0, 0.5, 3.0])
        out = dft_boundary(U, GRID, w)
        assert out.shape == (4, 3)
        assert out[2, 1] == pytest.approx(dft_boundary(U[2], GRID, 0.5))
        assert np.allclose(dft_matrix(GRID.t, w, GRID.tau)[0], GRID.tau)
        assert np.allclose(dft_boundary(2 * U + U, GRID, w), 3 * out)


class TestVariance:
    def test_constant(self):
        assert ensemble_variance(np.full(5, 1 + 2j)) == 0.0

    def test_two_points(self):
        assert ensemble_variance(np.array([1.0, -1.0])) == pytest.approx(2.0)

    def test_needs_two(self):
        with pytest.raises(ValueError):
            ensemble_variance(np.array([1.0]))

    def test_complex_gaussian(self):
        rng = substream(0, "test", 1)
        P = 100_000
        z = 1.5 * rng.standard_normal(P) + 0.5j * rng.standard_normal(P) + (2 - 1j)
        V = ensemble_variance(z)
        assert abs(V - (1.5**2 + 0.5**2)) <= 3 * variance_standard_error(z)


class TestRecover:
    def test_ratio_one(self):
        assert recover_fhat_abs([0.2], [0.2])[0] == pytest.approx(1.0)

    def test_zero(self):
        assert np.array_equal(recover_fhat_abs(np.zeros(4), np.ones(4)), np.zeros(4))

    def test_rejects(self):
        with pytest.raises(ValueError):
            recover_fhat_abs([1.0, 1.0], [1.0, 0.0])
        with pytest.raises(ValueError):
            recover_fhat_abs([1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            recover_fhat_abs([-1.0], [1.0])

    def test_sign_blind(self):
        rng = np.random.default_rng(2)
        U = rng.standard_normal((30, 101))
        w = np.array([0.5, 1.0])
        R = np.array([0.1, 0.2])
        a = recover_fhat_abs(ensemble_variance(dft_boundary(U, GRID, w)), R)
        b = recover_fhat_abs(ensemble_variance(dft_boundary(-U, GRID, w)), R)
        assert np.array_equal(a, b)

    def test_amplification_grows_along_decay(self):
        omegas = np.geomspace(10 * PI, 100 * PI, 8)
        for H in (0.5, 0.7):
            R = np.array([compute_R([0.3, 1.5], w, H) for w in omegas])
            assert np.all(np.diff(R) < 0)
            # fixed |fhat| = 0.2 so V = 0.04 R; a fixed small data perturbation
            V = 0.04 * R
            delta = 1e-6 * V.min()
            gains = perturbation_gain(V, R, delta)
            assert np.all(np.diff(gains) > 0)
            # first-order prediction delta / (2 sqrt(V R))
            assert np.allclose(gains, delta / (2 * np.sqrt(V * R)), rtol=1e-5)

    def test_example1_magnitude(self):
        f = np.sin(GRID.t) * np.exp(-GRID.t / 6)
        ens = simulate_ensemble([0.3, 1.5], GRID, f, 0.5, 10_000, 11)
        z = dft_boundary(ens.traces, GRID, 1.0)
        V = ensemble_variance(z)
        R = compute_R([0.3, 1.5], 1.0, 0.5)
        got = recover_fhat_abs([V], [R])[0]
        a = 1 / 6 + 1j
        exact = abs((1 - np.exp(-a * GRID.T)) / (a * a + 1))
        se = variance_standard_error(z) / (2 * math.sqrt(V * R))
        # Monte Carlo error plus a 2% allowance for discretisation and the finite window
        assert abs(got - exact) <= 3 * se + 0.02 * exact
