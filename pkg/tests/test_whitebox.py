import numpy as np
import pytest

from greywave.dataset import SyntheticConfig, synthesize
from greywave.errors import ConfigError, ShapeError
from greywave.whitebox import (
    MorisonPosterior,
    NIGPrior,
    PhysicalConfig,
    default_prior,
    gibbs_fit,
    grouped_coefficients,
    morison_design,
    predict_whitebox,
)


class TestGroupedCoefficients:
    def test_drag_constant(self):
        cd, _ = grouped_coefficients(PhysicalConfig(rho=1025, D=0.48, Cd=0.6))
        assert cd == pytest.approx(147.6)

    def test_inertia_constant(self):
        _, cm = grouped_coefficients(PhysicalConfig(rho=1025, D=0.48, Cm=1.2))
        assert cm == pytest.approx(0.25 * np.pi * 1025 * 0.48**2 * 1.2)
        assert cm == pytest.approx(222.67, abs=0.1)

    def test_zero_drag(self):
        cd, _ = grouped_coefficients(PhysicalConfig(Cd=0.0))
        assert cd == 0.0


class TestMorisonDesign:
    def test_positive_velocity(self):
        X = morison_design([2.0], [0.0])
        assert X[0, 0] == 4.0

    def test_sign_preserving(self):
        X = morison_design([-2.0], [0.0])
        assert X[0, 0] == -4.0

    def test_zero_velocity(self):
        np.testing.assert_array_equal(morison_design([0.0], [3.0])[0], [0.0, 3.0])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            morison_design([1.0, 2.0], [1.0])


class TestGibbsFit:
    def test_no_data_gives_prior(self):
        prior = default_prior()
        post = gibbs_fit(np.empty((0, 2)), np.empty(0), prior,
                         n_draws=4000, burn_in=100, seed=0)
        mean = post.beta_draws.mean(axis=0)
        std = post.beta_draws.std(axis=0)
        prior_std = np.sqrt(np.diag(prior.sigma_beta_sq))
        se = prior_std / np.sqrt(post.n_draws)
        assert np.all(np.abs(mean - prior.m_beta) < 5 * se)
        np.testing.assert_allclose(std, prior_std, rtol=0.1)

    def test_near_noiseless_recovery(self):
        cfg = SyntheticConfig(n_points=1000, noise_std=1e-6, seed=3)
        ds = synthesize(cfg)
        post = gibbs_fit(morison_design(ds.U, ds.Udot), ds.F, default_prior(),
                         n_draws=2000, burn_in=200, seed=0)
        mean = post.beta_draws.mean(axis=0)
        assert abs(mean[0] - cfg.true_cd_prime) < 0.001 * cfg.true_cd_prime
        assert abs(mean[1] - cfg.true_cm_prime) < 0.001 * cfg.true_cm_prime

    def test_fixed_noise_matches_conjugate_posterior(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(80, 2))
        beta_true = np.array([2.0, -1.0])
        sigma_sq = 0.5
        F = X @ beta_true + rng.normal(0, np.sqrt(sigma_sq), 80)
        prior = NIGPrior(np.zeros(2), np.eye(2) * 4.0)
        post = gibbs_fit(X, F, prior, n_draws=10_000, burn_in=100, seed=1,
                         fixed_sigma_n_sq=sigma_sq)
        prec = np.linalg.inv(prior.sigma_beta_sq) + X.T @ X / sigma_sq
        cov = np.linalg.inv(prec)
        mean = cov @ (np.linalg.inv(prior.sigma_beta_sq) @ prior.m_beta
                      + X.T @ F / sigma_sq)
        draw_mean = post.beta_draws.mean(axis=0)
        se = np.sqrt(np.diag(cov)) / np.sqrt(post.n_draws)
        assert np.all(np.abs(draw_mean - mean) < 3 * se)
        draw_cov = np.cov(post.beta_draws.T)
        np.testing.assert_allclose(draw_cov, cov, rtol=0.1, atol=1e-4)

    def test_deterministic_per_seed(self):
        ds = synthesize(SyntheticConfig(n_points=100, noise_std=1.0, seed=0))
        X = morison_design(ds.U, ds.Udot)
        a = gibbs_fit(X, ds.F, default_prior(), n_draws=50, burn_in=10, seed=9)
        b = gibbs_fit(X, ds.F, default_prior(), n_draws=50, burn_in=10, seed=9)
        np.testing.assert_array_equal(a.beta_draws, b.beta_draws)

    def test_chain_stationarity(self):
        ds = synthesize(SyntheticConfig(n_points=500, noise_std=5.0, seed=2))
        post = gibbs_fit(morison_design(ds.U, ds.Udot), ds.F, default_prior(),
                         n_draws=4000, burn_in=400, seed=0)
        half = post.n_draws // 2
        for j in range(2):
            a = post.beta_draws[:half, j]
            b = post.beta_draws[half:, j]
            se = np.sqrt(a.var() / half + b.var() / half)
            assert abs(a.mean() - b.mean()) < 5 * se

    def test_posterior_contraction(self):
        shrunk = 0
        for seed in range(5):
            stds = []
            for n in (250, 500):
                ds = synthesize(SyntheticConfig(n_points=n, noise_std=5.0, seed=seed))
                post = gibbs_fit(morison_design(ds.U, ds.Udot), ds.F, default_prior(),
                                 n_draws=1500, burn_in=200, seed=seed)
                stds.append(post.beta_draws.std(axis=0))
            if np.all(stds[1] <= stds[0] * 1.1):
                shrunk += 1
        assert shrunk == 5


class TestPredictWhitebox:
    def _post(self):
        return MorisonPosterior(np.array([[1.0, 2.0]]), np.array([0.25]))

    def test_zero_regressors(self):
        p = predict_whitebox(self._post(), [0.0, 0.0], [0.0, 0.0], include_noise=False)
        np.testing.assert_array_equal(p.mean, [0.0, 0.0])

    def test_single_draw_point(self):
        p = predict_whitebox(self._post(), [1.0], [1.0], include_noise=False)
        assert p.mean[0] == pytest.approx(3.0)
        assert p.variance[0] == 0.0

    def test_noise_adds_mean_sigma(self):
        post = MorisonPosterior(np.array([[1.0, 2.0], [2.0, 1.0]]),
                                np.array([0.3, 0.5]))
        off = predict_whitebox(post, [1.0], [2.0], include_noise=False)
        on = predict_whitebox(post, [1.0], [2.0], include_noise=True)
        assert on.variance[0] - off.variance[0] == pytest.approx(0.4)
        np.testing.assert_array_equal(on.mean, off.mean)

    def test_mean_linear_in_regressors(self):
        rng = np.random.default_rng(0)
        post = MorisonPosterior(rng.normal(size=(50, 2)), np.abs(rng.normal(size=50)) + 0.1)
        # combined input (a*x1, b*x2) against the same combination of
        # single-regressor predictions, using U values with U|U| = x1
        a, b = 0.7, -1.3
        x1, x2 = 2.0, 3.0
        u = np.sqrt(a * x1)  # u|u| = a*x1 for positive u
        combined = predict_whitebox(post, [u], [b * x2], include_noise=False).mean[0]
        only_drag = predict_whitebox(post, [np.sqrt(x1)], [0.0], include_noise=False).mean[0]
        only_inertia = predict_whitebox(post, [0.0], [x2], include_noise=False).mean[0]
        assert combined == pytest.approx(a * only_drag + b * only_inertia, rel=1e-12)


class TestPriors:
    def test_default_prior_centred_on_literature(self):
        prior = default_prior()
        np.testing.assert_allclose(prior.m_beta,
                                   grouped_coefficients(PhysicalConfig()))
        np.testing.assert_allclose(np.sqrt(np.diag(prior.sigma_beta_sq)),
                                   0.5 * prior.m_beta)

    def test_invalid_covariance(self):
        with pytest.raises(ConfigError):
            NIGPrior(np.zeros(2), -np.eye(2))

    def test_posterior_roundtrip(self):
        post = MorisonPosterior(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([1.0, 2.0]))
        back = MorisonPosterior.from_dict(post.to_dict())
        np.testing.assert_array_equal(back.beta_draws, post.beta_draws)
