"""GP-NARX dynamic model: OSA, MPO and Monte-Carlo MPO prediction plus
the MPO negative-log-predictive-likelihood training objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LagSpec, TimeSeriesDataset, build_lagged_design
from .errors import BoundsError, ConfigError, NumericalError, ShapeError
from .gp import GPHyperparams, GPModel, gp_fit, gp_predict
from .qpso import GPNARX_DEFAULTS, OptimResult, QPSOConfig, qpso_minimize
from .whitebox import PredictiveSeries

_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class MCPredictiveSeries:
    """Sampled free-run trajectories with their per-step statistics."""

    paths: np.ndarray  # (n_samples, n_steps)
    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.paths, dtype=float)
        object.__setattr__(self, "paths", p)
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "variance", np.asarray(self.variance, dtype=float))
        if p.ndim != 2 or p.shape[0] < 1:
            raise ShapeError("paths must be a non-empty (n_samples, n_steps) matrix")
        if self.mean.shape != (p.shape[1],) or self.variance.shape != (p.shape[1],):
            raise ShapeError("per-step statistics must match the path length")

    @property
    def n_samples(self) -> int:
        return self.paths.shape[0]


@dataclass(frozen=True)
class GPNARXModel:
    """GP trained on a NARX lag embedding.

    ``exogenous_transform`` records how model inputs relate to the raw
    channels: 'raw' uses (U, Udot); 'morison-augmented' expects an extra
    white-box force channel; 'residual-target' marks that targets (and
    fed-back lags) live in residual space.
    """

    gp: GPModel
    spec: LagSpec
    exogenous_transform: str = "raw"

    def __post_init__(self):
        if self.exogenous_transform not in ("raw", "morison-augmented", "residual-target"):
            raise ConfigError(f"unknown transform {self.exogenous_transform!r}")
        n_exog = 3 if self.exogenous_transform == "morison-augmented" else 2
        expected = n_exog * (self.spec.l_u + 1) + self.spec.l_y
        if self.gp.input_dim != expected:
            raise ShapeError(
                f"GP input dimension {self.gp.input_dim} does not match the "
                f"lag spec (expected {expected})"
            )

    def to_dict(self) -> dict:
        return {
            "gp": self.gp.to_dict(),
            "l_u": self.spec.l_u,
            "l_y": self.spec.l_y,
            "exogenous_transform": self.exogenous_transform,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GPNARXModel":
        return cls(GPModel.from_dict(d["gp"]), LagSpec(d["l_u"], d["l_y"]),
                   d.get("exogenous_transform", "raw"))


def _exog_channels(ds: TimeSeriesDataset, extra=None) -> dict:
    chans = {"U": ds.U, "Udot": ds.Udot}
    if extra is not None:
        chans["F_wb"] = np.asarray(extra, dtype=float)
    return chans


def narx_design(
    ds: TimeSeriesDataset,
    spec: LagSpec,
    extra_exog=None,
    target_series=None,
):
    """Lag embedding used throughout the GP-NARX paths."""
    return build_lagged_design(
        ds, spec, exogenous=_exog_channels(ds, extra_exog), target_series=target_series
    )


def fit_gpnarx(
    train: TimeSeriesDataset,
    hyper: GPHyperparams,
    spec: LagSpec,
    extra_exog=None,
    target_series=None,
    transform: str = "raw",
) -> GPNARXModel:
    """Fit the underlying GP on the training lag embedding."""
    dm = narx_design(train, spec, extra_exog, target_series)
    return GPNARXModel(gp_fit(dm.rows, dm.targets, hyper), spec, transform)


def _check_horizon(ds: TimeSeriesDataset, spec: LagSpec):
    if len(ds) <= spec.max_lag:
        raise BoundsError("dataset shorter than the warm-up lag window")


def osa_predict(
    model: GPNARXModel,
    ds: TimeSeriesDataset,
    extra_exog=None,
    target_series=None,
    include_noise: bool = True,
) -> PredictiveSeries:
    """One-step-ahead prediction using measured lagged outputs."""
    _check_horizon(ds, model.spec)
    dm = narx_design(ds, model.spec, extra_exog, target_series)
    return gp_predict(model.gp, dm.rows, include_noise=include_noise)


def _step_rows(chans, t, lu, ybuf, ly):
    """Model input at time t: exogenous lags then fed-back output lags.

    ``ybuf`` is (n_paths, t_len); returns an (n_paths, d) block.
    """
    n_paths = ybuf.shape[0]
    cols = []
    for ch in chans:
        for k in range(lu + 1):
            cols.append(np.full(n_paths, ch[t - k]))
    for k in range(1, ly + 1):
        cols.append(ybuf[:, t - k])
    return np.column_stack(cols)


def _free_run(
    model: GPNARXModel,
    ds: TimeSeriesDataset,
    extra_exog,
    warmup_series,
    n_paths: int,
    rng,
    include_noise: bool,
):
    """Shared MPO / MC-MPO propagation loop.

    With ``rng`` None the fed-back value is the predictive mean (plain
    MPO); otherwise each path feeds back a Gaussian draw from its own
    predictive distribution.  Returns fed-back paths plus the per-step
    predictive mean/variance of path 0 (identical across paths for MPO).
    """
    spec = model.spec
    _check_horizon(ds, spec)
    n = len(ds)
    m = spec.max_lag
    chans = list(_exog_channels(ds, extra_exog).values())
    y = np.asarray(warmup_series if warmup_series is not None else ds.F, dtype=float)
    ybuf = np.tile(y[:m], (n_paths, 1))
    ybuf = np.column_stack([ybuf, np.zeros((n_paths, n - m))])
    pred_mean = np.empty((n_paths, n - m))
    pred_var = np.empty((n_paths, n - m))
    for t in range(m, n):
        X = _step_rows(chans, t, spec.l_u, ybuf, spec.l_y)
        ps = gp_predict(model.gp, X, include_noise=include_noise)
        pred_mean[:, t - m] = ps.mean
        pred_var[:, t - m] = ps.variance
        if rng is None:
            ybuf[:, t] = ps.mean
        else:
            std = np.sqrt(np.maximum(ps.variance, 0.0))
            ybuf[:, t] = ps.mean + std * rng.standard_normal(n_paths)
    return ybuf[:, m:], pred_mean, pred_var


def mpo_predict(
    model: GPNARXModel,
    ds: TimeSeriesDataset,
    extra_exog=None,
    warmup_series=None,
    include_noise: bool = True,
) -> PredictiveSeries:
    """Free-run prediction feeding back the predictive mean."""
    _, mean, var = _free_run(model, ds, extra_exog, warmup_series, 1, None, include_noise)
    return PredictiveSeries(mean[0], var[0])


def mc_mpo_predict(
    model: GPNARXModel,
    ds: TimeSeriesDataset,
    n_samples: int = 10_000,
    seed: int = 0,
    extra_exog=None,
    warmup_series=None,
    include_noise: bool = True,
) -> MCPredictiveSeries:
    """Monte-Carlo free run: feed back per-path Gaussian draws.

    Per-path randomness derives deterministically from the seed; the
    returned mean/variance are sample statistics across paths.
    """
    if n_samples < 1:
        raise ConfigError("n_samples must be at least 1")
    if model.gp.n_train == 0:
        # a zero-data GP predicts its prior regardless of the fed-back
        # lags, so every path is exchangeable noise about the prior mean;
        # return the exact large-sample limit instead of sampling
        mpo = mpo_predict(model, ds, extra_exog, warmup_series, include_noise)
        paths = np.tile(mpo.mean, (n_samples, 1))
        return MCPredictiveSeries(paths, mpo.mean.copy(), mpo.variance.copy())
    rng = np.random.default_rng(seed)
    paths, _, _ = _free_run(
        model, ds, extra_exog, warmup_series, n_samples, rng, include_noise
    )
    return MCPredictiveSeries(paths, paths.mean(axis=0), paths.var(axis=0))


def mpo_nlpl(
    hyper: GPHyperparams,
    train: TimeSeriesDataset,
    val: TimeSeriesDataset,
    spec: LagSpec,
    extra_exog_train=None,
    extra_exog_val=None,
    target_train=None,
    target_val=None,
    transform: str = "raw",
) -> float:
    """Negative log predictive likelihood of the free run on validation data.

    Fits the GP on the training embedding with the supplied
    hyperparameters, generates the MPO over the validation set and scores
    0.5 sum[(y - E)^2 / V + log V] + (n/2) log 2pi with diagonal V.
    """
    model = fit_gpnarx(train, hyper, spec, extra_exog_train, target_train, transform)
    pred = mpo_predict(model, val, extra_exog_val, warmup_series=target_val,
                       include_noise=True)
    y = (np.asarray(target_val, dtype=float) if target_val is not None else val.F)
    y = y[spec.max_lag:]
    v = np.maximum(pred.variance, _VAR_FLOOR)
    n = len(y)
    return float(
        0.5 * np.sum((y - pred.mean) ** 2 / v)
        + 0.5 * np.sum(np.log(v))
        + 0.5 * n * np.log(2 * np.pi)
    )


def default_narx_qpso_config(input_dim: int, seed: int = 0, **overrides) -> QPSOConfig:
    """Swarm settings for GP-NARX training (log-space bounds [-6, 6])."""
    swarm, tol = GPNARX_DEFAULTS
    kw = dict(
        swarm_size=swarm,
        bounds=tuple((-6.0, 6.0) for _ in range(input_dim + 2)),
        stability_tol=tol,
        seed=seed,
    )
    kw.update(overrides)
    return QPSOConfig(**kw)


def train_gpnarx(
    train: TimeSeriesDataset,
    val: TimeSeriesDataset,
    spec: LagSpec,
    optimizer_cfg: QPSOConfig | None = None,
    objective: str = "mpo-nlpl",
    extra_exog_train=None,
    extra_exog_val=None,
    target_train=None,
    target_val=None,
    transform: str = "raw",
) -> tuple[GPNARXModel, OptimResult]:
    """Optimise log-hyperparameters with QPSO and fit at the optimum.

    ``objective`` selects the MPO NLPL on the validation set (default) or
    the training-set NLML ('nlml', provided for comparison runs).

    Search positions are log-hyperparameters in target-standardized
    units: the signal and noise variance dimensions are multiplied by the
    training-target variance, so the default [-6, 6] bounds cover
    sensible models regardless of the force scale.
    """
    n_exog = 3 if transform == "morison-augmented" else 2
    input_dim = n_exog * (spec.l_u + 1) + spec.l_y
    if optimizer_cfg is None:
        optimizer_cfg = default_narx_qpso_config(input_dim)
    if len(optimizer_cfg.bounds) != input_dim + 2:
        raise ConfigError("optimizer bounds dimension must be input_dim + 2")
    dm = narx_design(train, spec, extra_exog_train, target_train)
    tvar = float(dm.targets.var())
    if tvar <= 0:
        tvar = 1.0

    def unpack(theta):
        h = GPHyperparams.from_log_vector(theta)
        return GPHyperparams(h.sigma_f_sq * tvar, h.length_scales,
                             h.sigma_n_sq * tvar)

    if objective == "mpo-nlpl":
        def cost(theta):
            try:
                return mpo_nlpl(
                    unpack(theta), train, val, spec,
                    extra_exog_train, extra_exog_val, target_train, target_val,
                    transform,
                )
            except NumericalError:
                return np.inf
    elif objective == "nlml":
        ys = dm.targets - dm.targets.mean()
        Xs = (dm.rows - dm.rows.mean(axis=0)) / np.where(
            dm.rows.std(axis=0) > 0, dm.rows.std(axis=0), 1.0
        )

        def cost(theta):
            from .gp import nlml

            try:
                return nlml(unpack(theta), Xs, ys)
            except NumericalError:
                return np.inf
    else:
        raise ConfigError(f"unknown objective {objective!r}")

    result = qpso_minimize(cost, optimizer_cfg)
    model = fit_gpnarx(train, unpack(result.best_position), spec,
                       extra_exog_train, target_train, transform)
    return model, result


def mc_convergence_check(
    model: GPNARXModel,
    ds: TimeSeriesDataset,
    y_true,
    start_n: int = 100,
    max_n: int = 10_000,
    nmse_tol: float = 0.001,
    std_tol: float = 0.01,
    seed: int = 0,
    **predict_kw,
):
    """Rerun the MC MPO at doubling sample counts until both tolerances hold.

    Returns (n_samples, history) where history rows are
    (N, nmse_gap_to_mpo, mean_std_change).
    """
    from .metrics import nmse

    mpo = mpo_predict(model, ds, predict_kw.get("extra_exog"),
                      predict_kw.get("warmup_series"))
    nmse_mpo = nmse(y_true, mpo.mean)
    history = []
    prev_std = None
    n = start_n
    while True:
        mc = mc_mpo_predict(model, ds, n_samples=n, seed=seed, **predict_kw)
        gap = abs(nmse(y_true, mc.mean) - nmse_mpo)
        mean_std = float(np.mean(np.sqrt(mc.variance)))
        std_change = np.inf if prev_std is None else abs(mean_std - prev_std)
        history.append((n, gap, std_change))
        if gap < nmse_tol and std_change < std_tol:
            return n, history
        if n >= max_n:
            return n, history
        prev_std = mean_std
        n = min(2 * n, max_n)
