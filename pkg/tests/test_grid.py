import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from topt import grid as G
from topt.grid import GridSpec

even = st.integers(2, 12).map(lambda k: 2 * k)


class TestGridSpec:
    def test_spacing(self):
        g = GridSpec(64, 32, 8)
        assert g.h == (2 * np.pi / 64, 2 * np.pi / 32)
        assert g.ht == 1 / 8
        assert g.coords.shape == (2, 64, 32)
        assert g.coords[0, 1, 0] == pytest.approx(2 * np.pi / 64)

    @pytest.mark.parametrize("n1,n2", [(3, 8), (8, 7), (2, 2), (9, 9)])
    def test_rejects_bad_sizes(self, n1, n2):
        with pytest.raises(ValueError):
            GridSpec(n1, n2)


class TestDerivatives:
    def test_gradient_of_constant(self, grid32):
        assert np.abs(G.spectral_gradient(np.full(grid32.shape, 3.0), grid32)).max() == 0

    def test_gradient_sin(self, grid64):
        x1, x2 = grid64.coords
        du = G.spectral_gradient(np.sin(x1), grid64)
        np.testing.assert_allclose(du[0], np.cos(x1), atol=1e-13)
        np.testing.assert_allclose(du[1], 0, atol=1e-13)

    def test_gradient_product(self, grid64):
        x1, x2 = grid64.coords
        du = G.spectral_gradient(np.sin(3 * x1) * np.cos(2 * x2), grid64)
        np.testing.assert_allclose(du[0], 3 * np.cos(3 * x1) * np.cos(2 * x2), atol=1e-12)
        np.testing.assert_allclose(du[1], -2 * np.sin(3 * x1) * np.sin(2 * x2), atol=1e-12)

    def test_divergence(self, grid64):
        x1, x2 = grid64.coords
        np.testing.assert_allclose(G.spectral_divergence(np.stack([np.sin(x1), 0 * x1]), grid64), np.cos(x1), atol=1e-13)
        f = np.sin(x1) + np.sin(x2)
        np.testing.assert_allclose(G.spectral_divergence(G.spectral_gradient(f, grid64), grid64), -f, atol=1e-12)
        assert np.abs(G.spectral_divergence(np.ones((2, *grid64.shape)), grid64)).max() < 1e-14

    @given(n1=even, n2=even, seed=st.integers(0, 2**32 - 1))
    def test_integration_by_parts(self, n1, n2, seed):
        g = GridSpec(n1, n2)
        rng = np.random.default_rng(seed)
        f, u = rng.standard_normal(g.shape), rng.standard_normal((2, *g.shape))
        lhs = G.inner(G.spectral_gradient(f, g), u, g)
        rhs = -G.inner(f, G.spectral_divergence(u, g), g)
        assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))


class TestRegularization:
    @pytest.mark.parametrize("p,k,expected", [(2, (1, 0), 1.0), (2, (3, 4), 625.0), (3, (1, 1), 8.0)])
    def test_multiplier(self, grid32, p, k, expected):
        assert G.regularization_multiplier(p, grid32)[k] == expected

    def test_multiplier_kernel(self, grid32):
        assert G.regularization_multiplier(2, grid32)[0, 0] == 0

    def test_unsupported_order(self, grid32):
        with pytest.raises(ValueError):
            G.regularization_multiplier(1, grid32)

    def test_inverse_single_mode(self, grid32):
        x1, _ = grid32.coords
        out = G.apply_inverse_regularization(0.7 * np.cos(x1), 0.1, 2, grid32)
        np.testing.assert_allclose(out, 7.0 * np.cos(x1), atol=1e-12)

    def test_inverse_kernel_fix(self, grid32):
        c = np.full((2, *grid32.shape), 0.25)
        np.testing.assert_allclose(G.apply_inverse_regularization(c, 1.0, 2, grid32), c, atol=1e-15)
        assert np.all(G.apply_inverse_regularization(np.zeros_like(c), 0.5, 3, grid32) == 0)

    def test_inverse_rejects_nonpositive_alpha(self, grid32):
        with pytest.raises(ValueError):
            G.apply_inverse_regularization(np.zeros(grid32.shape), 0.0, 2, grid32)

    @given(seed=st.integers(0, 2**32 - 1), p=st.sampled_from([2, 3]))
    def test_inverse_roundtrip(self, seed, p):
        g = GridSpec(16, 16)
        f = np.random.default_rng(seed).standard_normal((2, *g.shape))
        f -= f.mean(axis=(1, 2), keepdims=True)
        back = G.apply_inverse_regularization(G.apply_regularization(f, 0.3, p, g), 0.3, p, g)
        np.testing.assert_allclose(back, f, atol=1e-10)

    def test_sqrt_squares_to_inverse(self, grid32, rng):
        f = rng.standard_normal(grid32.shape)
        a = G.apply_inverse_sqrt_regularization(G.apply_inverse_sqrt_regularization(f, 0.2, 2, grid32), 0.2, 2, grid32)
        np.testing.assert_allclose(a, G.apply_inverse_regularization(f, 0.2, 2, grid32), atol=1e-12)


class TestLeray:
    def test_divergence_free_unchanged(self, grid64):
        x1, x2 = grid64.coords
        psi = np.sin(x1) * np.cos(2 * x2) + np.cos(3 * x2)
        dpsi = G.spectral_gradient(psi, grid64)
        u = np.stack([-dpsi[1], dpsi[0]])
        np.testing.assert_allclose(G.leray_project(u, grid64), u, atol=1e-12)

    def test_gradient_removed(self, grid64, rng):
        f = rng.standard_normal(grid64.shape)
        assert np.abs(G.leray_project(G.spectral_gradient(f, grid64), grid64)).max() < 1e-12

    @given(seed=st.integers(0, 2**32 - 1))
    def test_projector_properties(self, seed):
        g = GridSpec(16, 12)
        rng = np.random.default_rng(seed)
        u, w = rng.standard_normal((2, 2, *g.shape))
        Pu = G.leray_project(u, g)
        np.testing.assert_allclose(G.leray_project(Pu, g), Pu, atol=1e-10)
        assert abs(G.inner(Pu, w, g) - G.inner(u, G.leray_project(w, g), g)) < 1e-10
        assert np.abs(G.spectral_divergence(Pu, g)).max() < 1e-12


class TestSmoothing:
    def test_identity_at_zero(self, grid32, rng):
        f = rng.standard_normal(grid32.shape)
        assert np.array_equal(G.gaussian_smooth(f, 0.0, grid32), f)

    def test_constant_preserved(self, grid32):
        np.testing.assert_allclose(G.gaussian_smooth(np.full(grid32.shape, 2.5), 3.0, grid32), 2.5, atol=1e-14)

    def test_single_mode(self, grid64):
        x1, _ = grid64.coords
        out = G.gaussian_smooth(np.cos(x1), 1.0, grid64)
        np.testing.assert_allclose(out, np.exp(-(2 * np.pi / 64) ** 2 / 2) * np.cos(x1), atol=1e-14)

    @given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(0, 4))
    def test_amplitudes_never_grow(self, seed, gamma):
        g = GridSpec(16, 16)
        f = np.random.default_rng(seed).standard_normal(g.shape)
        assert np.all(np.abs(G.fft(G.gaussian_smooth(f, gamma, g))) <= np.abs(G.fft(f)) + 1e-12)


class TestRestriction:
    def test_band_limited_roundtrip(self):
        fine, coarse = GridSpec(32, 32), GridSpec(16, 16)
        x1, x2 = fine.coords
        f = np.sin(3 * x1) * np.cos(5 * x2) + 0.2 * np.cos(7 * x1 + 2 * x2) + 1.5
        back = G.spectral_prolong(G.spectral_restrict(f, coarse, fine), coarse, fine)
        np.testing.assert_allclose(back, f, atol=1e-12)

    def test_constant(self):
        fine, coarse = GridSpec(32, 32), GridSpec(16, 16)
        np.testing.assert_allclose(G.spectral_restrict(np.full(fine.shape, 4.0), coarse, fine), 4.0, atol=1e-13)

    def test_high_mode_removed(self):
        fine, coarse = GridSpec(32, 32), GridSpec(16, 16)
        x1, _ = fine.coords
        assert np.abs(G.spectral_restrict(np.cos(10 * x1), coarse, fine)).max() < 1e-13

    def test_values_on_coarse_nodes(self):
        fine, coarse = GridSpec(32, 32), GridSpec(16, 16)
        x1, x2 = fine.coords
        c1, c2 = coarse.coords
        out = G.spectral_restrict(np.sin(2 * x1) * np.cos(x2), coarse, fine)
        np.testing.assert_allclose(out, np.sin(2 * c1) * np.cos(c2), atol=1e-13)

    def test_incompatible(self):
        with pytest.raises(ValueError):
            G.spectral_restrict(np.zeros((32, 32)), GridSpec(12, 12), GridSpec(32, 32))

    @given(seed=st.integers(0, 2**32 - 1))
    def test_adjoint_pair(self, seed):
        fine, coarse = GridSpec(16, 16), GridSpec(8, 8)
        rng = np.random.default_rng(seed)
        f, c = rng.standard_normal(fine.shape), rng.standard_normal(coarse.shape)
        lhs = G.inner(G.spectral_restrict(f, coarse, fine), c, coarse)
        rhs = G.inner(f, G.spectral_prolong(c, coarse, fine), fine)
        assert abs(lhs - rhs) < 1e-10


class TestInterpolation:
    def test_exact_at_nodes(self, grid32, rng):
        f = rng.standard_normal(grid32.shape)
        np.testing.assert_allclose(G.interpolate(f, grid32.coords, grid32), f, atol=1e-12)

    def test_analytic(self):
        g = GridSpec(128, 128)
        x1, _ = g.coords
        val = G.interpolate(np.sin(x1), np.array([[np.pi / 7], [0.0]]), g)
        assert abs(val[0] - np.sin(np.pi / 7)) < 1e-6

    def test_periodic_wrap(self, grid32, rng):
        f = rng.standard_normal(grid32.shape)
        pts = rng.uniform(0, 2 * np.pi, (2, 20))
        shifted = pts + np.array([[2 * np.pi], [-4 * np.pi]])
        np.testing.assert_allclose(G.interpolate(f, shifted, grid32), G.interpolate(f, pts, grid32), atol=1e-12)

    def test_derivative_matrix(self):
        g = GridSpec(64, 64)
        x1, x2 = g.coords
        f = np.sin(x1) * np.cos(2 * x2)
        pts = np.array([[0.3, 1.7, 4.0], [2.2, 0.1, 5.5]])
        c = G.spline_coefficients(f, g).ravel()
        d1 = G.interpolation_matrix(pts, g, (1, 0)) @ c
        np.testing.assert_allclose(d1, np.cos(pts[0]) * np.cos(2 * pts[1]), atol=2e-4)
