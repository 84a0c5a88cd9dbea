import math

import numpy as np
import pytest
from scipy.integrate import quad

from deconvw1.approx import (
    approx_error_L2,
    approx_error_L2_space,
    cdf_bias_norm,
    check_exponential_tails,
    exponential_moment,
    h_m_b_sigma,
    inversion_rhs_1d,
    inversion_rhs_net,
    kernel_H,
    kernel_H_hat,
    operator_T,
    series_gamma,
    tau_hat,
)
from deconvw1.errors import PreconditionViolated
from deconvw1.grids import GridSpec
from deconvw1.kernels import KernelSpec, smoothstep
from deconvw1.measures import EmpiricalMeasure
from deconvw1.mixtures import GaussianMixture1D
from deconvw1.noise import NoiseModel
from deconvw1.wasserstein import build_direction_net

LAPLACE = NoiseModel("laplace")


@pytest.fixture(scope="module")
def std_normal_grid():
    return GaussianMixture1D.single(0, 1).pdf_grid(
        GridSpec(-20.0, 40.0 / 4096, 4096).template())


@pytest.fixture(scope="module")
def std_normal_wide():
    return GaussianMixture1D.single(0, 1).pdf_grid(
        GridSpec(-40.0, 80.0 / 8192, 8192).template())


class TestKernelH:
    def test_tau_hat_against_quadrature(self):
        """Semi-analytic transform agrees with brute-force quadrature."""
        for x0 in (0.0, 1.7, 10.0, 35.0):
            direct = 2 * quad(lambda u: math.cos(x0 * u)
                              * (1.0 if u < 1 else float(smoothstep((17 / 15 - u) / (2 / 15)))),
                              0, 17 / 15, limit=400)[0]
            assert tau_hat(x0)[0] == pytest.approx(direct, abs=1e-10)

    def test_real_and_even(self):
        x = np.linspace(0.1, 40, 57)
        h = 0.4
        np.testing.assert_allclose(kernel_H(x, h), kernel_H(-x, h), atol=1e-10)

    def test_mass_below_one(self):
        """Integral of H equals the smoothed profile at zero, in (0, 1]."""
        x = np.linspace(-400, 400, 160001)
        mass = np.trapezoid(kernel_H(x, 0.4), x=x)
        expect = kernel_H_hat(0.0, 0.4)[0].real
        assert mass == pytest.approx(expect, abs=1e-6)
        assert 0 < mass <= 1

    def test_superpolynomial_envelope_decay(self):
        """|H| envelope falls faster than x^-4 over successive octaves."""
        h = 0.3
        envelopes = []
        for lo in (20.0, 40.0, 80.0):
            xs = np.linspace(lo, 2 * lo, 4001)
            envelopes.append(np.max(np.abs(kernel_H(xs, h))))
        assert envelopes[1] < envelopes[0] / 16
        assert envelopes[2] < envelopes[1] / 16

    def test_hat_complex_consistency(self):
        """The entire extension agrees with the real-axis values."""
        z = np.array([0.3, 1.2, 2.0])
        real_vals = kernel_H_hat(z, 0.4)
        complex_vals = kernel_H_hat(z + 0j, 0.4)
        np.testing.assert_allclose(real_vals, complex_vals, atol=1e-12)

    def test_hat_matches_transform_of_H(self):
        """Fourier transform of the tabulated H recovers the smoothed
        profile (independent path through the FFT)."""
        from deconvw1.grids import GridFunction1D, grid_fft

        spec = GridSpec(-200.0, 400.0 / 16384, 16384)
        g = spec.template()
        h = 0.5
        tab = GridFunction1D(g.origin, g.step, kernel_H(g.x, h), "signed")
        hat = grid_fft(tab)
        probe = np.abs(hat.x) < 3.0
        np.testing.assert_allclose(np.real(hat.values)[probe],
                                   np.real(kernel_H_hat(hat.x[probe], h)),
                                   atol=1e-6)


class TestOperatorT:
    def test_m1_is_identity(self, std_normal_grid):
        out = operator_T(std_normal_grid, 1, 0.5, 0.2)
        np.testing.assert_array_equal(out.values, std_normal_grid.values)

    def test_linearity(self, std_normal_grid):
        f = std_normal_grid
        g = f.with_values(np.roll(np.real(f.values), 64))
        combo = f.with_values(np.real(f.values) + np.real(g.values))
        t_combo = operator_T(combo, 3, -0.5, 0.15)
        t_sum = (np.real(operator_T(f, 3, -0.5, 0.15).values)
                 + np.real(operator_T(g, 3, -0.5, 0.15).values))
        np.testing.assert_allclose(np.real(t_combo.values), t_sum, atol=1e-10)

    def test_small_sigma_limit(self, std_normal_grid):
        """T f - f shrinks like sigma^2: halving sigma quarters the gap."""
        gaps = []
        for sig in (0.2, 0.1):
            out = operator_T(std_normal_grid, 3, 0.5, sig)
            gaps.append(np.trapezoid(
                np.abs(np.real(out.values) - np.real(std_normal_grid.values)),
                dx=std_normal_grid.step))
        ratio = gaps[0] / gaps[1]
        assert ratio == pytest.approx(4.0, rel=0.5)

    def test_identity_with_tilted_correction(self, std_normal_grid):
        """Tilting the operator output reproduces the additive correction
        split, computed along an independent spectral path."""
        f0 = std_normal_grid
        for b in (-0.5, 0.5):
            m, sig = 3, 0.2
            tf = operator_T(f0, m, b, sig)
            mb = exponential_moment(f0, b)
            lhs = np.exp(b * f0.x) * np.real(tf.values) / mb
            hbar = np.exp(b * f0.x) * np.real(f0.values) / mb
            hm = h_m_b_sigma(f0, m, b, sig)
            rhs = hbar + series_gamma(sig) * np.real(hm.values)
            assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_b_symmetry(self, std_normal_grid):
        """For an even density the two tilts give mirror corrections."""
        hp = np.real(h_m_b_sigma(std_normal_grid, 3, 0.5, 0.2).values)
        hm = np.real(h_m_b_sigma(std_normal_grid, 3, -0.5, 0.2).values)
        n = len(hp)
        k = np.arange(1, n)
        np.testing.assert_allclose(hp[k], hm[n - k], atol=1e-9)

    def test_mass_identity_scaling(self, std_normal_grid):
        """|int h - 1| contracts by roughly 2^(2(m-1)) per halving."""
        for m, min_ratio in ((2, 2.0), (3, 8.0)):
            errs = [abs(h_m_b_sigma(std_normal_grid, m, 0.5, s).integral() - 1.0)
                    for s in (0.4, 0.2, 0.1)]
            assert errs[0] / errs[1] >= min_ratio
            assert errs[1] / errs[2] >= min_ratio


class TestApproxError:
    def test_frequency_vs_space_paths(self, std_normal_wide):
        for sig in (0.4, 0.2, 0.1):
            fr = approx_error_L2(std_normal_wide, 3, sig)
            sp = approx_error_L2_space(std_normal_wide, 3, sig)
            assert fr == pytest.approx(sp, abs=1e-6)

    def test_decreasing_in_sigma(self, std_normal_wide):
        vals = [approx_error_L2(std_normal_wide, 3, s) for s in (0.4, 0.2, 0.1, 0.05)]
        assert all(v > 0 for v in vals)
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_loglog_slope(self, std_normal_wide):
        sigmas = (0.4, 0.2, 0.1, 0.05)
        vals = [approx_error_L2(std_normal_wide, 3, s) for s in sigmas]
        slope = np.polyfit(np.log(sigmas), np.log(vals), 1)[0]
        assert slope >= 7.0

    def test_exponential_tail_check(self):
        # Cauchy-like tails violate the exp(|x|/2) integrability requirement
        g = GridSpec(-40.0, 80.0 / 4096, 4096).template()
        heavy = g.with_values(1.0 / (np.pi * (1 + g.x**2)), "density")
        with pytest.raises(PreconditionViolated):
            check_exponential_tails(heavy)


class TestCDFBias:
    def test_monotone_in_h(self):
        mix = GaussianMixture1D((0.5, 0.5), (-1.0, 1.0), (0.3, 0.3))
        vals = [cdf_bias_norm(mix, KernelSpec("flat_top"), h, explore=True)
                for h in (0.2, 0.1, 0.05)]
        assert vals[0] > vals[1] > vals[2] > 0

    def test_mixture_slope(self):
        mix = GaussianMixture1D((0.5, 0.5), (-1.0, 1.0), (0.3, 0.3))
        hs = (0.1, 0.05, 0.025)
        vals = [cdf_bias_norm(mix, KernelSpec("flat_top"), h, alpha=2.0, explore=True)
                for h in hs]
        slope = np.polyfit(np.log(hs), np.log(vals), 1)[0]
        assert slope >= 2.7

    def test_precondition_enforced(self):
        mix = GaussianMixture1D.single(0, 0.05)
        with pytest.raises(PreconditionViolated):
            cdf_bias_norm(mix, KernelSpec("flat_top"), 0.1, alpha=2.0)

    def test_grid_cdf_path_matches_mixture_path(self, std_normal_wide):
        from deconvw1.grids import cumulative_cdf

        mix = GaussianMixture1D.single(0, 1)
        grid = GridSpec(-40.0, 80.0 / 8192, 8192).template()
        direct = cdf_bias_norm(mix, KernelSpec("flat_top"), 0.2, grid=grid)
        via_grid = cdf_bias_norm(cumulative_cdf(std_normal_wide),
                                 KernelSpec("flat_top"), 0.2, grid=grid)
        assert via_grid == pytest.approx(direct, rel=1e-3)

    def test_hoelder_density_slope(self):
        """Edge-power density with exponent 3/2: slope at least 2.2."""
        from deconvw1.grids import cumulative_cdf

        grid = GridSpec(-40.0, 80.0 / 8192, 8192).template()
        x = grid.x
        dens = np.clip(1 - x**2, 0, None) ** 1.5
        dens /= np.trapezoid(dens, dx=grid.step)
        cdf = cumulative_cdf(grid.with_values(dens, "density"))
        hs = (0.1, 0.05, 0.025)
        vals = [cdf_bias_norm(cdf, KernelSpec("higher_order", order=3), h, grid=grid)
                for h in hs]
        slope = np.polyfit(np.log(hs), np.log(vals), 1)[0]
        assert slope >= 2.2


class TestInversionRows:
    def test_identical_pair_vanishes(self, std_normal_grid):
        row = inversion_rhs_1d(std_normal_grid, std_normal_grid, LAPLACE, 0.1)
        assert row.lhs == 0.0
        assert row.w1_y_term == pytest.approx(0.0, abs=1e-12)
        assert row.t_term == pytest.approx(0.0, abs=1e-12)
        assert row.bias_term == pytest.approx(0.1, abs=0)

    def test_t_multiplier_formula(self, std_normal_grid):
        """d=1, beta=2, h=0.1: multiplier is |log h| / h times the L1 gap."""
        other = GaussianMixture1D.single(0.5, 1.1).pdf_grid(std_normal_grid)
        row = inversion_rhs_1d(std_normal_grid, other, LAPLACE, 0.1)
        assert row.t_term == pytest.approx(
            10.0 * abs(math.log(0.1)) * row.l1_y, rel=1e-12)

    def test_smooth_variant_bias(self, std_normal_grid):
        other = GaussianMixture1D.single(0.3, 1.0).pdf_grid(std_normal_grid)
        row = inversion_rhs_1d(std_normal_grid, other, LAPLACE, 0.1, alpha=2.0)
        assert row.bias_term == pytest.approx(0.1**3, rel=1e-12)

    def test_ratio_bounded_and_stable(self, std_normal_grid):
        rng = np.random.default_rng(17)
        ratios = {0.2: [], 0.05: []}
        for _ in range(5):
            m1 = GaussianMixture1D((1.0,), (float(rng.uniform(-1, 1)),),
                                   (float(rng.uniform(0.5, 1.2)),))
            m2 = GaussianMixture1D((1.0,), (float(rng.uniform(-1, 1)),),
                                   (float(rng.uniform(0.5, 1.2)),))
            fa = m1.pdf_grid(std_normal_grid)
            fb = m2.pdf_grid(std_normal_grid)
            for h in ratios:
                ratios[h].append(inversion_rhs_1d(fa, fb, LAPLACE, h).ratio)
        assert all(np.isfinite(v) for vals in ratios.values() for v in vals)
        assert max(ratios[0.05]) <= 2.0 * max(ratios[0.2])

    def test_net_variant_d2(self):
        grid = GridSpec(-30.0, 60.0 / 2048, 2048).template()
        net = build_direction_net(2, 0.2)
        rng = np.random.default_rng(3)
        a = EmpiricalMeasure.from_samples(rng.normal(size=(6, 2)))
        b = EmpiricalMeasure.from_samples(rng.normal(size=(5, 2)))
        row = inversion_rhs_net(a, b, LAPLACE, 0.1, net, grid)
        assert row.lhs > 0
        assert np.isfinite(row.rhs)
        assert row.t_term >= 0
