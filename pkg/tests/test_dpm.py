import math

import numpy as np
import pytest
from scipy.integrate import quad

from deconvw1.dpm import (
    DPMPrior,
    DPMState,
    complete_loglik,
    gibbs_sweep,
    init_state,
    laplace_gauss_density,
    posterior_mean_mixing,
    posterior_predictive_density,
    prior_joint_draw,
    run_chain,
)
from deconvw1.errors import EmptyChain
from deconvw1.grids import GridSpec
from deconvw1.noise import NoiseModel, sample_noise

PRIOR = DPMPrior()


def synthetic(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    return x + sample_noise(NoiseModel("laplace"), n, 1, rng)[:, 0]


class TestPriorDensities:
    def test_sigma_prior_continuous_at_one(self):
        lo = PRIOR.log_pi_sigma(1.0 - 1e-9)
        hi = PRIOR.log_pi_sigma(1.0 + 1e-9)
        assert lo == pytest.approx(hi, abs=1e-6)

    def test_sigma_sampler_matches_density(self, rng):
        """Grid inverse-CDF draws follow the spliced density."""
        draws = np.array([PRIOR.sample_sigma(rng) for _ in range(20_000)])
        # compare the CDF at a few probe points against quadrature
        z = quad(lambda s: math.exp(PRIOR.log_pi_sigma(s)), 1e-6, 30, limit=400)[0]
        for probe in (0.5, 1.0, 2.0):
            mass = quad(lambda s: math.exp(PRIOR.log_pi_sigma(s)), 1e-6, probe,
                        limit=400)[0] / z
            emp = np.mean(draws <= probe)
            assert emp == pytest.approx(mass, abs=0.02)

    def test_base_density_normalized(self):
        for iota in (1, 2):
            prior = DPMPrior(iota=iota)
            mass = quad(lambda u: math.exp(prior.log_h0(u)), -60, 60, limit=300)[0]
            assert mass == pytest.approx(1.0, abs=1e-8)


class TestLaplaceGaussClosedForm:
    @pytest.mark.parametrize("x0,s", [(0.0, 1.0), (1.5, 0.7), (5.0, 0.3),
                                      (-3.0, 2.0), (0.2, 0.05), (12.0, 1.0)])
    def test_matches_quadrature(self, x0, s):
        num = quad(lambda u: 0.5 * np.exp(-abs(x0 - u))
                   * np.exp(-0.5 * (u / s) ** 2) / (s * np.sqrt(2 * np.pi)),
                   -60, 60, limit=400)[0]
        assert laplace_gauss_density(x0, s) == pytest.approx(num, abs=1e-8)

    def test_sigma_zero_is_laplace(self):
        x = np.linspace(-5, 5, 11)
        np.testing.assert_allclose(laplace_gauss_density(x, 0.0),
                                   0.5 * np.exp(-np.abs(x)), atol=1e-15)

    def test_integrates_to_one(self):
        x = np.linspace(-60, 60, 240001)
        for s in (0.3, 1.0, 2.5):
            mass = np.trapezoid(laplace_gauss_density(x, s), x=x)
            assert mass == pytest.approx(1.0, abs=1e-6)


class TestConditionals:
    def test_x_update_conjugate_moments(self):
        """Y=2, W=0.5, mu=0, sigma=1: X | rest ~ N(1, 0.5)."""
        prior = DPMPrior()
        n = 100_000
        state = DPMState(
            assignments=np.zeros(n, dtype=int),
            cluster_locations={0: 0.0},
            sigma=1.0,
            latent_x=np.zeros(n),
            latent_w=np.full(n, 0.5),
        )
        from deconvw1.dpm import _update_x

        rng = np.random.default_rng(5)
        _update_x(state, np.full(n, 2.0), rng)
        assert state.latent_x.mean() == pytest.approx(1.0, abs=4 * np.sqrt(0.5 / n))
        assert state.latent_x.var() == pytest.approx(0.5, rel=0.05)

    def test_x_update_against_quadrature_oracle(self):
        """Conditional density proportional to exp(-(2-x)^2/(4W)) exp(-x^2/2)."""
        w = 0.5
        z = quad(lambda x: np.exp(-((2 - x) ** 2) / (4 * w) - x**2 / 2), -20, 20)[0]
        mean = quad(lambda x: x * np.exp(-((2 - x) ** 2) / (4 * w) - x**2 / 2),
                    -20, 20)[0] / z
        var = quad(lambda x: x**2 * np.exp(-((2 - x) ** 2) / (4 * w) - x**2 / 2),
                   -20, 20)[0] / z - mean**2
        assert mean == pytest.approx(1.0, abs=1e-10)
        assert var == pytest.approx(0.5, abs=1e-10)

    def test_w_update_mean_matches_quadrature(self):
        """p(w | u=1) has mean from the u=1 tilt of the scale mixture."""
        z = quad(lambda w: w**-0.5 * np.exp(-1 / (4 * w) - w), 0, 80, limit=400)[0]
        target = quad(lambda w: w**0.5 * np.exp(-1 / (4 * w) - w), 0, 80,
                      limit=400)[0] / z
        prior = DPMPrior()
        n = 200_000
        state = DPMState(
            assignments=np.zeros(n, dtype=int),
            cluster_locations={0: 0.0},
            sigma=1.0,
            latent_x=np.zeros(n),
            latent_w=np.ones(n),
        )
        from deconvw1.dpm import _update_w

        rng = np.random.default_rng(6)
        _update_w(state, np.ones(n), rng)
        assert state.latent_w.mean() == pytest.approx(target, rel=0.01)


class TestInitAndChain:
    def test_single_observation(self):
        state = init_state(np.array([1.3]), PRIOR, 0)
        assert state.n_clusters == 1
        assert list(state.assignments) == [0]
        assert math.isfinite(state.loglik)

    def test_deterministic(self):
        y = synthetic(40, 3)
        a = init_state(y, PRIOR, 11, coarse=True)
        b = init_state(y, PRIOR, 11, coarse=True)
        np.testing.assert_array_equal(a.assignments, b.assignments)
        assert a.sigma == b.sigma

    def test_chain_contracts(self):
        y = synthetic(30, 4)
        chain = run_chain(y, PRIOR, iters=21, burnin=20, thin=1, seed=8)
        assert len(chain.states) == 1
        assert 0.0 < chain.acceptance["sigma"] < 1.0
        assert np.all(np.isfinite(chain.traces["loglik"]))

    def test_chain_deterministic_given_seed(self):
        y = synthetic(25, 5)
        a = run_chain(y, PRIOR, iters=30, burnin=10, thin=2, seed=9)
        b = run_chain(y, PRIOR, iters=30, burnin=10, thin=2, seed=9)
        np.testing.assert_array_equal(a.traces["sigma"], b.traces["sigma"])
        assert a.states[-1].sigma == b.states[-1].sigma

    def test_invalid_iters(self):
        with pytest.raises(ValueError):
            run_chain(np.zeros(3), PRIOR, iters=5, burnin=5)

    def test_relabeling_invariance(self):
        """Permuting cluster ids leaves summaries unchanged."""
        y = synthetic(30, 12)
        chain = run_chain(y, PRIOR, iters=30, burnin=20, thin=1, seed=2)
        state = chain.states[-1]
        perm = {j: j + 1000 for j in state.cluster_locations}
        relabeled = DPMState(
            assignments=np.array([perm[int(c)] for c in state.assignments]),
            cluster_locations={perm[j]: v for j, v in state.cluster_locations.items()},
            sigma=state.sigma,
            latent_x=state.latent_x.copy(),
            latent_w=state.latent_w.copy(),
        )
        assert complete_loglik(relabeled, y, PRIOR) == pytest.approx(
            complete_loglik(state, y, PRIOR), abs=1e-9)
        grid = GridSpec(-10.0, 20.0 / 512, 512).template()
        chain.states[-1] = relabeled
        out = posterior_mean_mixing(chain, grid)
        chain.states[-1] = state
        ref = posterior_mean_mixing(chain, grid)
        np.testing.assert_allclose(out["density"].values, ref["density"].values,
                                   atol=1e-12)


class TestPosteriorSummaries:
    def test_single_state_single_cluster_density(self):
        state = DPMState(
            assignments=np.zeros(5, dtype=int),
            cluster_locations={0: 0.0},
            sigma=1.0,
            latent_x=np.zeros(5),
            latent_w=np.ones(5),
        )
        from deconvw1.dpm import ChainSummary

        chain = ChainSummary([state], {}, {}, 5, PRIOR)
        grid = GridSpec(-10.0, 20.0 / 2048, 2048).template()
        out = posterior_mean_mixing(chain, grid)
        expect = np.exp(-0.5 * grid.x**2) / np.sqrt(2 * np.pi)
        np.testing.assert_allclose(np.real(out["density"].values), expect, atol=1e-8)

    def test_two_states_average(self):
        def make(mu):
            return DPMState(np.zeros(3, dtype=int), {0: mu}, 1.0,
                            np.zeros(3), np.ones(3))

        from deconvw1.dpm import ChainSummary

        grid = GridSpec(-10.0, 20.0 / 1024, 1024).template()
        both = posterior_mean_mixing(ChainSummary([make(-1.0), make(1.0)], {}, {}, 3,
                                                  PRIOR), grid)
        single = [posterior_mean_mixing(ChainSummary([make(m)], {}, {}, 3, PRIOR),
                                        grid) for m in (-1.0, 1.0)]
        avg = 0.5 * (np.real(single[0]["density"].values)
                     + np.real(single[1]["density"].values))
        np.testing.assert_allclose(np.real(both["density"].values), avg, atol=1e-14)

    def test_empty_chain(self):
        from deconvw1.dpm import ChainSummary

        grid = GridSpec(-5.0, 10.0 / 128, 128).template()
        with pytest.raises(EmptyChain):
            posterior_mean_mixing(ChainSummary([], {}, {}, 0, PRIOR), grid)

    def test_predictive_integrates_to_one(self):
        y = synthetic(60, 31)
        chain = run_chain(y, PRIOR, iters=40, burnin=20, thin=2, seed=3)
        grid = GridSpec(-30.0, 60.0 / 4096, 4096).template()
        pred = posterior_predictive_density(chain, grid)
        assert pred.integral() == pytest.approx(1.0, abs=1e-4)
        assert np.all(np.real(pred.values) >= 0)

    def test_posterior_beats_ignoring_noise(self):
        """W1 to the truth: posterior mean < empirical measure of Y."""
        rng = np.random.default_rng(44)
        n = 1000
        x = rng.normal(size=n)
        y = x + sample_noise(NoiseModel("laplace"), n, 1, rng)[:, 0]
        chain = run_chain(y, PRIOR, iters=250, burnin=100, thin=3, seed=7)
        grid = GridSpec(-12.0, 24.0 / 2048, 2048).template()
        post = posterior_mean_mixing(chain, grid)
        from scipy.special import ndtr

        truth = grid.with_values(ndtr(grid.x), "cdf")
        from deconvw1.deconv import _step_cdf_on_grid
        from deconvw1.measures import EmpiricalMeasure
        from deconvw1.wasserstein import w1_cdf

        w_post = w1_cdf(post["cdf"], truth, warn_tails=False)
        y_cdf = _step_cdf_on_grid(EmpiricalMeasure.from_samples(y), grid)
        w_ignore = w1_cdf(y_cdf, truth, warn_tails=False)
        assert w_post < w_ignore


class TestJointDraw:
    def test_prior_draw_shapes(self, rng):
        state, y = prior_joint_draw(PRIOR, 15, rng)
        assert y.shape == (15,)
        assert state.latent_x.shape == (15,)
        assert set(state.assignments) == set(state.cluster_locations)

    def test_sweep_preserves_shapes(self, rng):
        state, y = prior_joint_draw(PRIOR, 10, rng)
        new, accepted = gibbs_sweep(state, y, PRIOR, rng)
        assert new.latent_x.shape == (10,)
        assert isinstance(accepted, bool) or accepted in (0, 1)
        assert math.isfinite(new.loglik)
        # input state untouched
        assert state.latent_x.shape == (10,)
