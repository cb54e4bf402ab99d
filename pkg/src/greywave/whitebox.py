"""Morison's-equation force model with Bayesian linear regression of the
grouped drag/inertia coefficients via Gibbs sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError


@dataclass(frozen=True)
class PhysicalConfig:
    """Fluid and cylinder properties used to form the grouped coefficients."""

    rho: float = 1025.0
    D: float = 0.48
    Cd: float = 0.6
    Cm: float = 1.2

    def __post_init__(self):
        if self.rho <= 0 or self.D <= 0:
            raise ConfigError("rho and D must be positive")
        if self.Cd < 0 or self.Cm < 0:
            raise ConfigError("Cd and Cm must be non-negative")


@dataclass(frozen=True)
class NIGPrior:
    """Normal-Inverse-Gamma semiconjugate prior over (cd', cm') and the
    noise variance."""

    m_beta: np.ndarray
    sigma_beta_sq: np.ndarray
    a: float = 2.0
    b: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.m_beta, dtype=float)
        S = np.asarray(self.sigma_beta_sq, dtype=float)
        object.__setattr__(self, "m_beta", m)
        object.__setattr__(self, "sigma_beta_sq", S)
        if m.shape != (2,) or S.shape != (2, 2):
            raise ConfigError("prior mean must be a 2-vector, covariance 2x2")
        if not np.allclose(S, S.T):
            raise ConfigError("prior covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(S) <= 0):
            raise ConfigError("prior covariance must be positive definite")
        if self.a <= 0 or self.b <= 0:
            raise ConfigError("Inverse-Gamma hyperparameters must be positive")


@dataclass(frozen=True)
class MorisonPosterior:
    """Gibbs draws of the grouped coefficients and noise variance."""

    beta_draws: np.ndarray
    sigma_n_sq_draws: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.beta_draws, dtype=float)
        s = np.asarray(self.sigma_n_sq_draws, dtype=float)
        object.__setattr__(self, "beta_draws", b)
        object.__setattr__(self, "sigma_n_sq_draws", s)
        if b.ndim != 2 or b.shape[1] != 2 or b.shape[0] < 1:
            raise ConfigError("beta_draws must be an (n_draws, 2) matrix")
        if s.shape != (b.shape[0],):
            raise ConfigError("sigma_n_sq_draws length must match beta_draws")
        if np.any(s <= 0):
            raise ConfigError("all noise variance draws must be positive")

    @property
    def n_draws(self) -> int:
        return self.beta_draws.shape[0]

    def to_dict(self) -> dict:
        return {
            "beta_draws": self.beta_draws.tolist(),
            "sigma_n_sq_draws": self.sigma_n_sq_draws.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MorisonPosterior":
        return cls(np.asarray(d["beta_draws"]), np.asarray(d["sigma_n_sq_draws"]))


@dataclass(frozen=True)
class PredictiveSeries:
    """Per-time-step predictive mean and variance."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        v = np.asarray(self.variance, dtype=float)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "variance", v)
        if m.shape != v.shape:
            raise ShapeError("mean and variance must have equal length")
        if np.any(v < 0):
            raise ShapeError("variance must be non-negative")


def grouped_coefficients(cfg: PhysicalConfig) -> tuple[float, float]:
    """Collapse (rho, D, Cd, Cm) into the grouped drag/inertia constants."""
    cd_prime = 0.5 * cfg.rho * cfg.D * cfg.Cd
    cm_prime = 0.25 * np.pi * cfg.rho * cfg.D**2 * cfg.Cm
    return cd_prime, cm_prime


def morison_design(U, Udot) -> np.ndarray:
    """Stack the drag regressor U|U| and the inertia regressor Udot."""
    U = np.asarray(U, dtype=float)
    Udot = np.asarray(Udot, dtype=float)
    if U.shape != Udot.shape:
        raise ShapeError("U and Udot must have equal length")
    return np.column_stack([U * np.abs(U), Udot])


def default_prior(cfg: PhysicalConfig | None = None, rel_std: float = 0.5) -> NIGPrior:
    """Weakly informative prior centred on the literature coefficients.

    Per-component prior standard deviation defaults to 50% of the prior
    mean; the Inverse-Gamma hyperparameters are broad.
    """
    cfg = cfg or PhysicalConfig()
    cd_prime, cm_prime = grouped_coefficients(cfg)
    m = np.array([cd_prime, cm_prime])
    S = np.diag((rel_std * np.abs(m)) ** 2)
    return NIGPrior(m, S)


def gibbs_fit(
    X,
    F,
    prior: NIGPrior,
    n_draws: int = 10_000,
    burn_in: int = 1000,
    seed: int = 0,
    fixed_sigma_n_sq: float | None = None,
) -> MorisonPosterior:
    """Sample the NIG posterior by alternating the two conditionals.

    beta | sigma_n^2 is Gaussian with covariance
    (Sigma_beta^-1 + X'X/sigma_n^2)^-1 and matching mean;
    sigma_n^2 | beta is Inverse-Gamma(a + n/2, b + ||F - X beta||^2 / 2).
    With n = 0 the chain reduces to independent prior draws.  Passing
    ``fixed_sigma_n_sq`` freezes the noise variance (conjugate Gaussian
    diagnostic mode).
    """
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    F = np.asarray(F, dtype=float).ravel()
    n = X.shape[0]
    if n != len(F):
        raise ShapeError("X and F must have equal length")
    if n_draws < 1:
        raise ConfigError("n_draws must be at least 1")
    rng = np.random.default_rng(seed)

    prior_prec = np.linalg.inv(prior.sigma_beta_sq)
    prior_prec_m = prior_prec @ prior.m_beta
    XtX = X.T @ X if n else np.zeros((2, 2))
    XtF = X.T @ F if n else np.zeros(2)

    beta = prior.m_beta.copy()
    sigma_sq = fixed_sigma_n_sq if fixed_sigma_n_sq is not None else prior.b / (prior.a + 1)
    total = burn_in + n_draws
    beta_out = np.empty((n_draws, 2))
    sig_out = np.empty(n_draws)
    for i in range(total):
        prec = prior_prec + XtX / sigma_sq
        try:
            L = np.linalg.cholesky(prec)
        except np.linalg.LinAlgError:
            raise NumericalError(
                "singular conditional covariance; consider a larger prior variance"
            ) from None
        rhs = prior_prec_m + XtF / sigma_sq
        mean = np.linalg.solve(prec, rhs)
        z = rng.standard_normal(2)
        # solve L^T w = z gives w with covariance prec^-1
        beta = mean + np.linalg.solve(L.T, z)
        if fixed_sigma_n_sq is None:
            resid = F - X @ beta if n else np.zeros(0)
            shape = prior.a + 0.5 * n
            scale = prior.b + 0.5 * float(resid @ resid)
            sigma_sq = scale / rng.gamma(shape, 1.0)
        if i >= burn_in:
            beta_out[i - burn_in] = beta
            sig_out[i - burn_in] = sigma_sq
    return MorisonPosterior(beta_out, sig_out)


def predict_whitebox(
    post: MorisonPosterior, U, Udot, include_noise: bool = True
) -> PredictiveSeries:
    """Predictive mean/variance of the grouped Morison force over draws."""
    X = morison_design(U, Udot)
    vals = X @ post.beta_draws.T
    mean = vals.mean(axis=1)
    var = vals.var(axis=1)
    if include_noise:
        var = var + float(post.sigma_n_sq_draws.mean())
    return PredictiveSeries(mean, var)
