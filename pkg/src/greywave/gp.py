"""Exact Gaussian-process regression with an ARD squared-exponential
kernel: fitting, prediction and the negative log marginal likelihood.

Targets are centred by the training mean and inputs standardised per
column before kernel evaluation, so length scales live in standardised
units and prior reversion returns the training mean in original units.
The low-level functions (``kernel_ard_se``, ``nlml``) operate on their
arguments as given, with no transformation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ShapeError
from .whitebox import PredictiveSeries

_JITTER_START = 1e-10
_JITTER_MAX = 1e-4


@dataclass(frozen=True)
class GPHyperparams:
    """Signal variance, per-dimension length scales and noise variance."""

    sigma_f_sq: float
    length_scales: np.ndarray
    sigma_n_sq: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        object.__setattr__(self, "length_scales", ls)
        if self.sigma_f_sq <= 0:
            raise ShapeError("sigma_f_sq must be positive")
        if np.any(ls <= 0):
            raise ShapeError("length scales must be positive")
        if self.sigma_n_sq < 0:
            raise ShapeError("sigma_n_sq must be non-negative")

    @classmethod
    def from_log_vector(cls, theta) -> "GPHyperparams":
        """Unpack [log sigma_f_sq, log l_1..l_d, log sigma_n_sq]."""
        theta = np.asarray(theta, dtype=float)
        return cls(float(np.exp(theta[0])), np.exp(theta[1:-1]), float(np.exp(theta[-1])))

    def to_log_vector(self) -> np.ndarray:
        return np.log(
            np.concatenate([[self.sigma_f_sq], self.length_scales, [self.sigma_n_sq]])
        )


def kernel_ard_se(x, x2, hyper: GPHyperparams) -> float:
    """ARD squared-exponential covariance between two input vectors."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    d = len(hyper.length_scales)
    if x.shape != (d,) or x2.shape != (d,):
        raise ShapeError("input dimension does not match length_scales")
    r2 = np.sum(((x - x2) / hyper.length_scales) ** 2)
    return float(hyper.sigma_f_sq * np.exp(-0.5 * r2))


def kernel_matrix(X1, X2, hyper: GPHyperparams) -> np.ndarray:
    """Cross-covariance matrix under the ARD-SE kernel."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    d = len(hyper.length_scales)
    if X1.shape[1] != d or X2.shape[1] != d:
        raise ShapeError("input dimension does not match length_scales")
    A = X1 / hyper.length_scales
    B = X2 / hyper.length_scales
    r2 = (
        np.sum(A**2, axis=1)[:, None]
        + np.sum(B**2, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    np.maximum(r2, 0.0, out=r2)
    return hyper.sigma_f_sq * np.exp(-0.5 * r2)


def _factorize(K: np.ndarray, sigma_n_sq: float, sigma_f_sq: float):
    """Cholesky of K + sigma_n^2 I with an escalating jitter schedule."""
    n = K.shape[0]
    jitter = 0.0
    step = _JITTER_START * sigma_f_sq
    while True:
        try:
            L = np.linalg.cholesky(K + (sigma_n_sq + jitter) * np.eye(n))
            return L, jitter
        except np.linalg.LinAlgError:
            jitter = step if jitter == 0.0 else jitter * 10.0
            if jitter > _JITTER_MAX * sigma_f_sq:
                raise NumericalError(
                    "covariance factorization failed at maximum jitter"
                ) from None


@dataclass(frozen=True)
class GPModel:
    """Trained exact GP with cached factorisation.

    ``x_mean``/``x_std``/``y_mean`` hold the standardisation constants;
    ``Xs`` is the standardised training design the factorisation refers to.
    An empty training set is allowed as a diagnostic mode, in which case
    predictions revert to the prior.
    """

    X_train: np.ndarray
    y_train: np.ndarray
    hyper: GPHyperparams
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    Xs: np.ndarray = field(repr=False)
    chol: np.ndarray | None = field(repr=False)
    alpha: np.ndarray | None = field(repr=False)

    @property
    def n_train(self) -> int:
        return self.X_train.shape[0]

    @property
    def input_dim(self) -> int:
        return len(self.hyper.length_scales)

    def to_dict(self) -> dict:
        return {
            "X_train": self.X_train.tolist(),
            "y_train": self.y_train.tolist(),
            "sigma_f_sq": float(self.hyper.sigma_f_sq),
            "length_scales": self.hyper.length_scales.tolist(),
            "sigma_n_sq": float(self.hyper.sigma_n_sq),
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": float(self.y_mean),
            "standardized": bool(np.any(self.x_std != 1.0) or np.any(self.x_mean != 0.0)
                                 or self.y_mean != 0.0),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GPModel":
        hyper = GPHyperparams(d["sigma_f_sq"], np.asarray(d["length_scales"]), d["sigma_n_sq"])
        # factorisations are recomputed on load
        return gp_fit(
            np.asarray(d["X_train"]), np.asarray(d["y_train"]), hyper,
            standardize=bool(d.get("standardized", True)),
        )


def gp_fit(X, y, hyper: GPHyperparams, standardize: bool = True) -> GPModel:
    """Build and factorise the training covariance, caching alpha."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != len(y):
        raise ShapeError("X and y must have equal length")
    d = len(hyper.length_scales)
    if X.shape[0] and X.shape[1] != d:
        raise ShapeError("input dimension does not match length_scales")
    n = X.shape[0]
    if n == 0:
        zeros_d = np.zeros(d)
        return GPModel(
            X.reshape(0, d), y, hyper, zeros_d, np.ones(d), 0.0,
            X.reshape(0, d), None, None,
        )
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ShapeError("training data must be finite")
    if standardize:
        x_mean = X.mean(axis=0)
        x_std = X.std(axis=0)
        x_std = np.where(x_std > 0, x_std, 1.0)
        y_mean = float(y.mean())
    else:
        x_mean = np.zeros(d)
        x_std = np.ones(d)
        y_mean = 0.0
    Xs = (X - x_mean) / x_std
    K = kernel_matrix(Xs, Xs, hyper)
    L, _ = _factorize(K, hyper.sigma_n_sq, hyper.sigma_f_sq)
    yc = y - y_mean
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, yc))
    return GPModel(X, y, hyper, x_mean, x_std, y_mean, Xs, L, alpha)


def gp_predict(model: GPModel, X_star, include_noise: bool = False) -> PredictiveSeries:
    """Predictive mean and variance at new inputs."""
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    if X_star.shape[1] != model.input_dim:
        raise ShapeError("test input dimension does not match the model")
    h = model.hyper
    if model.n_train == 0:
        m = X_star.shape[0]
        var = np.full(m, h.sigma_f_sq + (h.sigma_n_sq if include_noise else 0.0))
        return PredictiveSeries(np.full(m, model.y_mean), var)
    Xs_star = (X_star - model.x_mean) / model.x_std
    Ks = kernel_matrix(Xs_star, model.Xs, h)
    mean = model.y_mean + Ks @ model.alpha
    v = np.linalg.solve(model.chol, Ks.T)
    var = h.sigma_f_sq - np.sum(v * v, axis=0)
    if include_noise:
        var = var + h.sigma_n_sq
    np.maximum(var, 0.0, out=var)
    return PredictiveSeries(mean, var)


def nlml(hyper: GPHyperparams, X, y) -> float:
    """Negative log marginal likelihood of y under the GP prior.

    Evaluates 0.5 y'(K+s^2 I)^-1 y + 0.5 log|K+s^2 I| + (n/2) log 2pi on
    the inputs exactly as given (no standardisation or centring).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = len(y)
    K = kernel_matrix(X, X, hyper)
    L, _ = _factorize(K, hyper.sigma_n_sq, hyper.sigma_f_sq)
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, y))
    return float(
        0.5 * y @ alpha
        + np.sum(np.log(np.diag(L)))
        + 0.5 * n * np.log(2 * np.pi)
    )


def nlml_grad(hyper: GPHyperparams, X, y) -> np.ndarray:
    """Analytic NLML gradient wrt [sigma_f_sq, l_1..l_d, sigma_n_sq]."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = len(y)
    K = kernel_matrix(X, X, hyper)
    L, _ = _factorize(K, hyper.sigma_n_sq, hyper.sigma_f_sq)
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, y))
    Kinv = np.linalg.solve(L.T, np.linalg.solve(L, np.eye(n)))
    W = Kinv - np.outer(alpha, alpha)  # dNLML/dtheta = 0.5 tr(W dK/dtheta)
    grads = np.empty(2 + len(hyper.length_scales))
    grads[0] = 0.5 * np.sum(W * (K / hyper.sigma_f_sq))
    for j, lj in enumerate(hyper.length_scales):
        diff2 = (X[:, j][:, None] - X[:, j][None, :]) ** 2
        dK = K * diff2 / lj**3
        grads[1 + j] = 0.5 * np.sum(W * dK)
    grads[-1] = 0.5 * np.trace(W)
    return grads
