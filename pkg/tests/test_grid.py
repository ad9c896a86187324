"""Tests for the torus grid, transforms, differentiation, and dealiased products."""

import numpy as np
import pytest

from epdifflab.grid import (
    GridMismatchError,
    SpectralScalarField,
    SpectralVectorField,
    TorusGrid,
    dealiased_product,
    directional_derivative,
    divergence,
    forward_transform,
    inverse_transform,
    l2_inner,
    spectral_gradient,
    translate,
)


def band_limited(grid, kmax, seed=0):
    """Random real vector field with |k|_inf <= kmax."""
    rng = np.random.default_rng(seed)
    u = forward_transform(grid, rng.standard_normal((grid.dim,) + grid.shape))
    keep = np.max(np.abs(grid.wavenumbers), axis=0) <= kmax
    return SpectralVectorField(grid, u.coeffs * keep)


class TestTorusGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            TorusGrid(4, 16)
        with pytest.raises(ValueError):
            TorusGrid(1, 6)
        with pytest.raises(ValueError):
            TorusGrid(1, 24)  # not a power of two
        with pytest.raises(ValueError):
            TorusGrid(1, 16, -1.0)

    def test_sample_points(self):
        g = TorusGrid(2, 8, 2.0)
        assert g.coordinates.shape == (2, 8, 8)
        assert g.coordinates[0, 3, 0] == pytest.approx(3 * 2.0 / 8)

    def test_lattice_bijective_and_nyquist(self):
        g = TorusGrid(1, 16)
        k = g.lattice.wavenumbers[0]
        assert sorted(k.tolist()) == list(range(-8, 8))
        assert g.lattice.nyquist_mask.sum() == 1
        assert k[g.lattice.nyquist_mask][0] == -8


class TestTransforms:
    def test_constant_field(self):
        g = TorusGrid(1, 16, 3.0)
        u = forward_transform(g, np.full((1, 16), 2.5))
        assert u.coeffs[0, 0] == pytest.approx(2.5 * 3.0)
        assert np.abs(u.coeffs[0, 1:]).max() < 1e-13

    def test_single_harmonic(self):
        L = 2.0
        g = TorusGrid(1, 16, L)
        x = g.coordinates[0]
        u = forward_transform(g, np.sin(2 * np.pi * x / L)[None])
        expected = L / 2j
        assert u.coeffs[0, 1] == pytest.approx(expected, abs=1e-13)
        assert u.coeffs[0, -1] == pytest.approx(np.conj(expected), abs=1e-13)
        others = np.abs(u.coeffs[0, 2:-1]).max()
        assert others < 1e-13

    @pytest.mark.parametrize("dim,n", [(1, 32), (2, 32), (3, 16)])
    def test_round_trip_and_parseval(self, dim, n):
        g = TorusGrid(dim, n, 1.7)
        rng = np.random.default_rng(dim)
        samples = rng.standard_normal((dim,) + g.shape)
        u = forward_transform(g, samples)
        back = inverse_transform(u)
        assert np.abs(back - samples).max() < 1e-12 * np.abs(samples).max()
        phys = np.sum(samples**2) * g.cell_volume
        spec = np.sum(np.abs(u.coeffs) ** 2) / g.length**dim
        assert phys == pytest.approx(spec, rel=1e-12)

    def test_conjugate_symmetry(self):
        g = TorusGrid(2, 16)
        u = band_limited(g, 7, seed=3)
        assert u.imag_residual() < 1e-13

    def test_shape_mismatch_rejected(self):
        g = TorusGrid(1, 16)
        with pytest.raises(ValueError):
            forward_transform(g, np.zeros((1, 8)))
        with pytest.raises(ValueError):
            forward_transform(g, np.zeros((2, 16)))


class TestGradient:
    def test_constant_is_zero(self):
        g = TorusGrid(1, 16)
        u = forward_transform(g, np.ones((1, 16)))
        du = spectral_gradient(u, 0)
        assert np.abs(du.coeffs).max() < 1e-13

    def test_single_harmonic(self):
        L = 1.5
        g = TorusGrid(1, 32, L)
        x = g.coordinates[0]
        u = forward_transform(g, np.sin(2 * np.pi * x / L)[None])
        du = spectral_gradient(u, 0).samples()
        expected = (2 * np.pi / L) * np.cos(2 * np.pi * x / L)
        assert np.abs(du[0] - expected).max() < 1e-12

    def test_mixed_partials_commute(self):
        g = TorusGrid(2, 32)
        u = band_limited(g, 10, seed=1)
        dxy = spectral_gradient(spectral_gradient(u, 0), 1)
        dyx = spectral_gradient(spectral_gradient(u, 1), 0)
        scale = np.abs(dxy.coeffs).max()
        assert np.abs(dxy.coeffs - dyx.coeffs).max() < 1e-13 * scale

    def test_nyquist_zeroed(self):
        g = TorusGrid(1, 16)
        coeffs = np.zeros((1, 16), dtype=complex)
        coeffs[0, 8] = 1.0  # pure Nyquist mode
        u = SpectralVectorField(g, coeffs)
        assert np.abs(spectral_gradient(u, 0).coeffs).max() == 0.0

    def test_divergence_free_mode(self):
        g = TorusGrid(2, 16)
        y = g.coordinates[1]
        samples = np.stack([np.sin(2 * np.pi * y), np.zeros(g.shape)])
        u = forward_transform(g, samples)
        assert np.abs(divergence(u).coeffs).max() < 1e-12


class TestDealiasedProduct:
    def test_identity_element(self):
        g = TorusGrid(1, 32)
        f = band_limited(g, 15, seed=2)
        one = SpectralScalarField.from_samples(g, np.ones(g.shape))
        prod = dealiased_product(f, one)
        assert np.abs(prod.coeffs - f.coeffs).max() < 1e-13 * np.abs(f.coeffs).max()

    def test_double_angle(self):
        g = TorusGrid(1, 32)
        x = g.coordinates[0]
        k = 5
        s = SpectralScalarField.from_samples(g, np.sin(2 * np.pi * k * x))
        prod = dealiased_product(s, s).samples()
        expected = 0.5 - 0.5 * np.cos(4 * np.pi * k * x)
        assert np.abs(prod - expected).max() < 1e-13

    def test_oversampled_oracle(self):
        coarse = TorusGrid(1, 32)
        fine = TorusGrid(1, 128)
        rng = np.random.default_rng(7)
        kmax = 15  # full coarse band short of Nyquist
        cf = np.zeros((1, 32), dtype=complex)
        cg = np.zeros((1, 32), dtype=complex)
        for k in range(1, kmax + 1):
            for c in (cf, cg):
                z = rng.standard_normal() + 1j * rng.standard_normal()
                c[0, k] = z
                c[0, -k] = np.conj(z)
        cf[0, 0] = rng.standard_normal()
        cg[0, 0] = rng.standard_normal()
        f32 = SpectralVectorField(coarse, cf)
        g32 = SpectralVectorField(coarse, cg)

        # same functions on the fine grid, product taken pointwise there (alias
        # free since 2*kmax < 64), then truncated to the coarse band
        def lift(c):
            out = np.zeros((1, 128), dtype=complex)
            out[0, : kmax + 1] = c[0, : kmax + 1]
            out[0, -kmax:] = c[0, -kmax:]
            return SpectralVectorField(fine, out)

        exact = forward_transform(fine, lift(cf).samples() * lift(cg).samples())
        got = dealiased_product(f32, g32)
        trunc = np.concatenate([exact.coeffs[0, :16], exact.coeffs[0, -16:]])
        # the coarse lattice's -16 bin carries the +-16 pair of the true product
        trunc[16] += exact.coeffs[0, 16]
        assert np.abs(got.coeffs[0] - trunc).max() < 1e-12 * np.abs(trunc).max()

    def test_grid_mismatch(self):
        f = band_limited(TorusGrid(1, 32), 4)
        g = band_limited(TorusGrid(1, 64), 4)
        with pytest.raises(GridMismatchError):
            dealiased_product(f, g)

    def test_2d_scalar_vector(self):
        g = TorusGrid(2, 16)
        u = band_limited(g, 3, seed=4)
        s = SpectralScalarField.from_samples(g, 1.0 + 0.3 * np.cos(2 * np.pi * g.coordinates[0]))
        prod = dealiased_product(s, u)
        expected = s.samples() * u.samples()
        assert np.abs(prod.samples() - expected).max() < 1e-12


class TestTranslation:
    def test_lattice_shift_matches_roll(self):
        g = TorusGrid(1, 32)
        u = band_limited(g, 15, seed=5)
        h = 3 * g.spacing
        shifted = translate(u, [h])
        # translate by h sends samples at x to values u(x - h)
        rolled = np.roll(u.samples(), 3, axis=-1)
        assert np.abs(shifted.samples() - rolled).max() < 1e-12

    def test_directional_derivative_constant_advection(self):
        g = TorusGrid(1, 64)
        v = forward_transform(g, np.full((1, 64), 2.0))
        w = band_limited(g, 10, seed=6)
        adv = directional_derivative(v, w)
        expected = 2.0 * spectral_gradient(w, 0).coeffs
        assert np.abs(adv.coeffs - expected).max() < 1e-12 * np.abs(expected).max()


def test_l2_inner_matches_quadrature():
    g = TorusGrid(2, 16, 1.3)
    u = band_limited(g, 5, seed=8)
    v = band_limited(g, 5, seed=9)
    quad = np.sum(u.samples() * v.samples()) * g.cell_volume
    assert l2_inner(u, v) == pytest.approx(quad, rel=1e-12)
