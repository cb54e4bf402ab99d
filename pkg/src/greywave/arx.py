"""Linear AR/ARX modelling with least squares, OSA/MPO prediction and
AICc/BIC lag-order selection (the cheap proxy for the GP-NARX lag search)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import LagSpec, TimeSeriesDataset, build_lagged_design
from .errors import BoundsError, DomainError, NumericalError
from .whitebox import PredictiveSeries

# Burnham-Anderson "substantial support" threshold on delta values
SUBSTANTIAL_SUPPORT_DELTA = 2.0


def _arx_exogenous(ds: TimeSeriesDataset) -> dict:
    # drag-style U|U| regressor plus raw acceleration, as in the white-box
    return {"U|U|": ds.U * np.abs(ds.U), "Udot": ds.Udot}


@dataclass(frozen=True)
class ARXModel:
    """OLS-fitted linear ARX with homoscedastic residual variance."""

    alpha: np.ndarray
    beta: np.ndarray
    spec: LagSpec
    residual_variance: float
    include_exogenous: bool = True

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        n_alpha = 2 * (self.spec.l_u + 1) if self.include_exogenous else 0
        if len(self.alpha) != n_alpha or len(self.beta) != self.spec.l_y:
            raise DomainError("coefficient counts do not match the lag spec")
        if self.residual_variance < 0:
            raise DomainError("residual_variance must be non-negative")

    @property
    def n_params(self) -> int:
        # coefficients plus the residual variance
        return len(self.alpha) + len(self.beta) + 1


def _design(ds: TimeSeriesDataset, spec: LagSpec, include_exogenous: bool):
    exog = _arx_exogenous(ds) if include_exogenous else {}
    if not include_exogenous:
        # l_u is irrelevant without exogenous terms; embed with l_u=0 and
        # drop the exogenous block entirely
        dm = build_lagged_design(ds, spec, exogenous={})
        return dm
    return build_lagged_design(ds, spec, exogenous=exog)


def fit_arx(
    ds: TimeSeriesDataset, spec: LagSpec, include_exogenous: bool = True
) -> ARXModel:
    """Ordinary least squares on the lag-embedded design."""
    dm = _design(ds, spec, include_exogenous)
    X, y = dm.rows, dm.targets
    n_eff, k = X.shape
    if n_eff < k:
        raise NumericalError(f"{n_eff} effective rows cannot identify {k} parameters")
    coeffs, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < k:
        raise NumericalError("rank-deficient ARX design")
    resid = y - X @ coeffs
    var = float(resid @ resid) / n_eff
    n_alpha = 2 * (spec.l_u + 1) if include_exogenous else 0
    return ARXModel(coeffs[:n_alpha], coeffs[n_alpha:], spec, var, include_exogenous)


def predict_arx(model: ARXModel, ds: TimeSeriesDataset, mode: str = "OSA") -> PredictiveSeries:
    """OSA or MPO prediction over the post-warm-up steps of ``ds``."""
    spec = model.spec
    n = len(ds)
    m = spec.max_lag
    if n <= m:
        raise BoundsError("dataset shorter than max lag + 1")
    coeffs = np.concatenate([model.alpha, model.beta])
    if mode == "OSA":
        dm = _design(ds, spec, model.include_exogenous)
        mean = dm.rows @ coeffs
    elif mode == "MPO":
        exog = _arx_exogenous(ds) if model.include_exogenous else {}
        chans = list(exog.values())
        yhat = np.empty(n)
        yhat[:m] = ds.F[:m]  # warm start from measured values
        a = model.alpha
        b = model.beta
        lu = spec.l_u
        for t in range(m, n):
            acc = 0.0
            j = 0
            for ch in chans:
                for k in range(lu + 1):
                    acc += a[j] * ch[t - k]
                    j += 1
            for k in range(1, spec.l_y + 1):
                acc += b[k - 1] * yhat[t - k]
            yhat[t] = acc
        mean = yhat[m:]
    else:
        raise DomainError(f"unknown prediction mode {mode!r}")
    var = np.full(len(mean), model.residual_variance)
    return PredictiveSeries(mean, var)


def aic(k: int, log_likelihood: float) -> float:
    return 2.0 * k - 2.0 * log_likelihood


def aicc(k: int, n: int, log_likelihood: float) -> float:
    """Second-order (small-sample) Akaike information criterion."""
    if n <= k + 1:
        raise DomainError("aicc requires n > k + 1")
    return aic(k, log_likelihood) + 2.0 * k * (k + 1) / (n - k - 1)


def bic(k: int, n: int, log_likelihood: float) -> float:
    return k * math.log(n) - 2.0 * log_likelihood


def gaussian_log_likelihood(residuals, variance: float) -> float:
    """Log likelihood of residuals under iid zero-mean Gaussian noise."""
    r = np.asarray(residuals, dtype=float)
    if variance <= 0:
        raise DomainError("variance must be positive")
    n = len(r)
    return float(-0.5 * (n * np.log(2 * np.pi * variance) + (r @ r) / variance))


@dataclass(frozen=True)
class LagSearchResult:
    """Delta-AICc/BIC grid over (l_u, l_y) with per-metric winners."""

    grid: dict  # (l_u, l_y) -> {metric: delta}
    best_per_metric: dict  # metric -> (l_u, l_y)
    failures: dict  # (l_u, l_y) -> message

    METRICS = ("delta_aicc_osa", "delta_aicc_mpo", "delta_bic_osa", "delta_bic_mpo")

    def long_table(self) -> list:
        """Heatmap-ready rows: (l_u, l_y, metric, delta)."""
        rows = []
        for (lu, ly), metrics in sorted(self.grid.items()):
            for metric in self.METRICS:
                rows.append((lu, ly, metric, metrics[metric]))
        return rows

    def substantially_supported(self, metric: str) -> list:
        """Cells with delta <= 2 for the given metric."""
        return sorted(
            cell for cell, m in self.grid.items()
            if m[metric] <= SUBSTANTIAL_SUPPORT_DELTA
        )


def lag_search(
    train: TimeSeriesDataset,
    val: TimeSeriesDataset,
    max_lu: int = 20,
    max_ly: int = 20,
    include_exogenous: bool = True,
) -> LagSearchResult:
    """Score every (l_u, l_y) in [0..max_lu] x [1..max_ly] on validation data.

    Each cell is fitted on the training set and scored by the Gaussian
    likelihood of its OSA and MPO validation residuals; raw AICc/BIC are
    converted to deltas against the per-metric minimum.  Ties break to the
    smallest l_u + l_y, then the smallest l_y.
    """
    raw = {}
    failures = {}
    # every cell is scored over the same validation window (aligned at the
    # grid-wide max lag) so criteria are comparable across cells
    global_warm = max(max_lu, max_ly)
    for lu in range(max_lu + 1):
        for ly in range(1, max_ly + 1):
            spec = LagSpec(lu, ly)
            try:
                model = fit_arx(train, spec, include_exogenous)
                scores = {}
                for mode in ("osa", "mpo"):
                    pred = predict_arx(model, val, mode.upper())
                    skip = global_warm - spec.max_lag
                    resid = val.F[global_warm:] - pred.mean[skip:]
                    n = len(resid)
                    # score at the per-cell maximum-likelihood variance of the
                    # validation residuals so the criteria compare fit quality
                    # rather than training-variance shrinkage
                    var = max(float(resid @ resid) / n, 1e-300)
                    logl = gaussian_log_likelihood(resid, var)
                    scores[f"aicc_{mode}"] = aicc(model.n_params, n, logl)
                    scores[f"bic_{mode}"] = bic(model.n_params, n, logl)
                raw[(lu, ly)] = scores
            except (NumericalError, BoundsError, DomainError) as exc:
                failures[(lu, ly)] = str(exc)
    if not raw:
        raise NumericalError("no lag-search cell could be fitted")
    grid = {cell: {} for cell in raw}
    best = {}
    for metric in ("aicc_osa", "aicc_mpo", "bic_osa", "bic_mpo"):
        lo = min(s[metric] for s in raw.values())
        for cell, s in raw.items():
            grid[cell][f"delta_{metric}"] = s[metric] - lo
        winners = [c for c, s in raw.items() if s[metric] == lo]
        best[f"delta_{metric}"] = min(winners, key=lambda c: (c[0] + c[1], c[1]))
    return LagSearchResult(grid, best, failures)
