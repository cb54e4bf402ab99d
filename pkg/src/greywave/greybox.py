"""Grey-box compositions of the Morison white-box and GP/GP-NARX
black-box: residual modelling (summation) and input augmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LagSpec, TimeSeriesDataset
from .errors import ConfigError
from .gp import GPHyperparams, gp_fit
from .gpnarx import (
    GPNARXModel,
    MCPredictiveSeries,
    fit_gpnarx,
    mc_mpo_predict,
    mpo_predict,
    osa_predict,
    train_gpnarx,
)
from .qpso import QPSOConfig
from .whitebox import MorisonPosterior, PredictiveSeries, predict_whitebox

ARCHITECTURES = ("residual", "input-augmentation")


@dataclass(frozen=True)
class GreyBoxModel:
    """White-box posterior fixed at composition time plus a trained
    black-box.

    For the residual architecture the black-box operates entirely in
    residual space (targets and fed-back lags are white-box residuals);
    for input augmentation the black-box sees the white-box mean force as
    a third exogenous channel and predicts the raw force.
    """

    whitebox: MorisonPosterior
    blackbox: GPNARXModel
    architecture: str
    spec: LagSpec
    include_whitebox_variance: bool = True

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.architecture!r}")
        expected = {
            "residual": "residual-target",
            "input-augmentation": "morison-augmented",
        }[self.architecture]
        if self.blackbox.exogenous_transform != expected:
            raise ConfigError(
                f"black-box transform {self.blackbox.exogenous_transform!r} does "
                f"not match architecture {self.architecture!r}"
            )

    def to_dict(self) -> dict:
        return {
            "architecture": self.architecture,
            "whitebox": self.whitebox.to_dict(),
            "blackbox": self.blackbox.to_dict(),
            "l_u": self.spec.l_u,
            "l_y": self.spec.l_y,
            "include_whitebox_variance": self.include_whitebox_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GreyBoxModel":
        return cls(
            MorisonPosterior.from_dict(d["whitebox"]),
            GPNARXModel.from_dict(d["blackbox"]),
            d["architecture"],
            LagSpec(d["l_u"], d["l_y"]),
            bool(d.get("include_whitebox_variance", True)),
        )


def whitebox_mean(whitebox: MorisonPosterior, ds: TimeSeriesDataset) -> np.ndarray:
    """Point-estimate white-box force series used inside compositions."""
    return predict_whitebox(whitebox, ds.U, ds.Udot, include_noise=False).mean


def residual_series(whitebox: MorisonPosterior, ds: TimeSeriesDataset) -> np.ndarray:
    return ds.F - whitebox_mean(whitebox, ds)


def _default_hyper(input_dim: int) -> GPHyperparams:
    return GPHyperparams(1.0, np.ones(input_dim), 1e-2)


def empty_blackbox(spec: LagSpec, transform: str, hyper: GPHyperparams | None = None) -> GPNARXModel:
    """Zero-data diagnostic black-box that reverts to its prior everywhere."""
    n_exog = 3 if transform == "morison-augmented" else 2
    input_dim = n_exog * (spec.l_u + 1) + spec.l_y
    hyper = hyper or _default_hyper(input_dim)
    gp = gp_fit(np.empty((0, input_dim)), np.empty(0), hyper)
    return GPNARXModel(gp, spec, transform)


def train_residual(
    train: TimeSeriesDataset,
    val: TimeSeriesDataset,
    whitebox: MorisonPosterior,
    spec: LagSpec,
    optimizer_cfg: QPSOConfig | None = None,
    hyper: GPHyperparams | None = None,
    include_whitebox_variance: bool = True,
) -> GreyBoxModel:
    """Train a black-box on the white-box residuals.

    With ``hyper`` given the GP is fitted directly at those
    hyperparameters (no optimisation); otherwise they are found via QPSO
    over the MPO NLPL (or the NLML for a static, l_y = 0 black-box).
    Empty training data yields the zero-data diagnostic black-box.
    """
    if len(train) <= spec.max_lag:
        bb = empty_blackbox(spec, "residual-target", hyper)
        return GreyBoxModel(whitebox, bb, "residual", spec, include_whitebox_variance)
    r_train = residual_series(whitebox, train)
    if hyper is not None:
        bb = fit_gpnarx(train, hyper, spec, target_series=r_train,
                        transform="residual-target")
    else:
        r_val = residual_series(whitebox, val)
        objective = "mpo-nlpl" if spec.l_y > 0 else "nlml"
        bb, _ = train_gpnarx(
            train, val, spec, optimizer_cfg, objective,
            target_train=r_train, target_val=r_val, transform="residual-target",
        )
    return GreyBoxModel(whitebox, bb, "residual", spec, include_whitebox_variance)


def train_augmented(
    train: TimeSeriesDataset,
    val: TimeSeriesDataset,
    whitebox: MorisonPosterior,
    spec: LagSpec,
    optimizer_cfg: QPSOConfig | None = None,
    hyper: GPHyperparams | None = None,
) -> GreyBoxModel:
    """Train a black-box on raw force with the white-box mean appended as
    a third exogenous channel (lags 0..l_u, like the other channels)."""
    if len(train) <= spec.max_lag:
        bb = empty_blackbox(spec, "morison-augmented", hyper)
        return GreyBoxModel(whitebox, bb, "input-augmentation", spec)
    f_train = whitebox_mean(whitebox, train)
    if hyper is not None:
        bb = fit_gpnarx(train, hyper, spec, extra_exog=f_train,
                        transform="morison-augmented")
    else:
        f_val = whitebox_mean(whitebox, val)
        objective = "mpo-nlpl" if spec.l_y > 0 else "nlml"
        bb, _ = train_gpnarx(
            train, val, spec, optimizer_cfg, objective,
            extra_exog_train=f_train, extra_exog_val=f_val,
            transform="morison-augmented",
        )
    return GreyBoxModel(whitebox, bb, "input-augmentation", spec)


def predict_greybox(
    model: GreyBoxModel,
    ds: TimeSeriesDataset,
    mode: str = "MC-MPO",
    n_samples: int = 1000,
    seed: int = 0,
):
    """Predict over the post-warm-up steps of ``ds``.

    Residual architecture: black-box prediction in residual space added to
    the white-box mean, with the white-box predictive variance included
    when the model was composed with ``include_whitebox_variance``.
    Input augmentation: black-box prediction with the white-box force
    computed from the measured kinematics.
    """
    m = model.spec.max_lag
    wb = predict_whitebox(model.whitebox, ds.U, ds.Udot, include_noise=False)
    if model.architecture == "residual":
        extra_exog = None
        feedback = ds.F - wb.mean  # residual-space lags
        offset_mean = wb.mean[m:]
        offset_var = wb.variance[m:] if model.include_whitebox_variance else 0.0
    else:
        extra_exog = wb.mean
        feedback = None
        offset_mean = 0.0
        offset_var = 0.0
    if mode == "OSA":
        p = osa_predict(model.blackbox, ds, extra_exog=extra_exog,
                        target_series=feedback)
        return PredictiveSeries(p.mean + offset_mean, p.variance + offset_var)
    if mode == "MPO":
        p = mpo_predict(model.blackbox, ds, extra_exog=extra_exog,
                        warmup_series=feedback)
        return PredictiveSeries(p.mean + offset_mean, p.variance + offset_var)
    if mode == "MC-MPO":
        p = mc_mpo_predict(model.blackbox, ds, n_samples=n_samples, seed=seed,
                           extra_exog=extra_exog, warmup_series=feedback)
        paths = p.paths + offset_mean
        return MCPredictiveSeries(paths, p.mean + offset_mean, p.variance + offset_var)
    raise ConfigError(f"unknown prediction mode {mode!r}")
