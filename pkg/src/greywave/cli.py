"""Batch command-line front end.

Subcommands: synth, lagsearch, train, evaluate, coverage, spectra.  All
take a TOML config (--config); --seed and --out override the config.
Exit codes: 0 success, 1 numerical/optimizer failure, 2 config/IO error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .arx import lag_search
from .coverage import coverage_sweep
from .dataset import (
    LagSpec,
    SyntheticConfig,
    TimeSeriesDataset,
    load_csv,
    split_sequential,
    synthesize,
    write_csv,
)
from .errors import (
    ConfigError,
    DataError,
    GreywaveError,
    GridError,
    NumericalError,
    SchemaError,
)
from .gp import GPHyperparams
from .gpnarx import (
    GPNARXModel,
    fit_gpnarx,
    mc_mpo_predict,
    mpo_predict,
    osa_predict,
    train_gpnarx,
)
from .greybox import (
    GreyBoxModel,
    predict_greybox,
    train_augmented,
    train_residual,
)
from .metrics import msll, nmse, spectra_comparison
from .qpso import GP_DEFAULTS, GPNARX_DEFAULTS, QPSOConfig, stability_report
from .whitebox import (
    MorisonPosterior,
    default_prior,
    gibbs_fit,
    morison_design,
    predict_whitebox,
)

KNOWN_MODELS = ("whitebox", "static-gp", "gpnarx", "grey-residual", "grey-augmented")
MODEL_FILES = {
    "whitebox": "whitebox.json",
    "static-gp": "static_gp.json",
    "gpnarx": "gpnarx.json",
    "grey-residual": "grey_residual.json",
    "grey-augmented": "grey_augmented.json",
}
# Table-shaped evaluation order: white-box, static GP, then each dynamic
# prediction type over black-box / residual / input-augmentation
EVAL_ROWS = [
    ("whitebox", "LINREG"),
    ("static-gp", "STATIC"),
    ("gpnarx", "OSA"), ("grey-residual", "OSA"), ("grey-augmented", "OSA"),
    ("gpnarx", "MPO"), ("grey-residual", "MPO"), ("grey-augmented", "MPO"),
    ("gpnarx", "MC-MPO"), ("grey-residual", "MC-MPO"), ("grey-augmented", "MC-MPO"),
]


def derive_seed(master_seed: int, component: str) -> int:
    """Stable per-component seed so adding models does not perturb others."""
    digest = hashlib.sha256(f"{master_seed}:{component}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class RunConfig:
    """Validated view over the TOML document."""

    def __init__(self, doc: dict, seed=None, out=None):
        self.doc = doc
        data = doc.get("data", {})
        self.csv_path = data.get("csv")
        self.synthetic = data.get("synthetic")
        if (self.csv_path is None) == (self.synthetic is None):
            raise ConfigError("config must give exactly one of data.csv or data.synthetic")
        self.split_sizes = doc.get("split", {}).get("sizes", [1000, 1000, 1000])
        lags = doc.get("lags", {})
        self.lag_spec = LagSpec(int(lags.get("l_u", 1)), int(lags.get("l_y", 3)))
        self.max_lu = int(lags.get("max_lu", 20))
        self.max_ly = int(lags.get("max_ly", 20))
        models = doc.get("models", {})
        self.model_names = list(models.get("names", ["whitebox"]))
        unknown = set(self.model_names) - set(KNOWN_MODELS)
        if unknown:
            raise ConfigError(f"unknown model names: {sorted(unknown)}")
        if not self.model_names:
            raise ConfigError("at least one model must be requested")
        self.optimizer = doc.get("optimizer", {})
        self.mc_samples = int(doc.get("mc", {}).get("n_samples", 1000))
        cov = doc.get("coverage", {})
        self.coverage_targets = list(cov.get("targets", list(range(0, 85, 5))))
        self.whitebox_mode = cov.get("whitebox_mode", "refit-per-subset")
        if self.whitebox_mode not in ("refit-per-subset", "fixed-external"):
            raise ConfigError(f"unknown whitebox_mode {self.whitebox_mode!r}")
        self.gibbs = doc.get("gibbs", {})
        self.seed = int(seed if seed is not None else doc.get("seed", 0))
        self.out = Path(out if out is not None else doc.get("output", {}).get("dir", "out"))

    def qpso_config(self, model_kind: str, input_dim: int, seed: int) -> QPSOConfig:
        swarm, tol = GP_DEFAULTS if model_kind == "gp" else GPNARX_DEFAULTS
        opt = self.optimizer
        return QPSOConfig(
            swarm_size=int(opt.get("swarm_size", swarm)),
            bounds=tuple((-6.0, 6.0) for _ in range(input_dim + 2)),
            stability_tol=float(opt.get("stability_tol", tol)),
            max_iters=int(opt.get("max_iters", 500)),
            n_repeat_runs=int(opt.get("n_repeat_runs", 1)),
            seed=seed,
        )

    def load_splits(self):
        if self.csv_path is not None:
            ds = load_csv(self.csv_path)
        else:
            ds = synthesize(_synthetic_config(self.synthetic, self.seed))
        return split_sequential(ds, self.split_sizes)


def _synthetic_config(doc: dict, master_seed: int) -> SyntheticConfig:
    kw = dict(doc)
    if "components" in kw:
        kw["components"] = tuple(tuple(c) for c in kw["components"])
    if "residual_coeffs" in kw:
        kw["residual_coeffs"] = tuple(kw["residual_coeffs"])
    kw.setdefault("seed", derive_seed(master_seed, "synthetic"))
    try:
        return SyntheticConfig(**kw)
    except TypeError as exc:
        raise ConfigError(f"bad synthetic config: {exc}") from None


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_csv_rows(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _manifest(cfg: RunConfig, command: str) -> dict:
    # deliberately timing-free so repeated runs are byte-identical
    return {"command": command, "config": cfg.doc, "seed": cfg.seed,
            "version": __version__}


def _fit_whitebox(cfg: RunConfig, train: TimeSeriesDataset) -> MorisonPosterior:
    prior = default_prior()
    g = cfg.gibbs
    return gibbs_fit(
        morison_design(train.U, train.Udot),
        train.F,
        prior,
        n_draws=int(g.get("n_draws", 10_000)),
        burn_in=int(g.get("burn_in", 1000)),
        seed=derive_seed(cfg.seed, "whitebox"),
    )


def cmd_synth(cfg: RunConfig) -> int:
    if cfg.synthetic is None:
        raise ConfigError("synth requires a data.synthetic section")
    ds = synthesize(_synthetic_config(cfg.synthetic, cfg.seed))
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "synthetic.csv", ds)
    _write_json(cfg.out / "run-manifest.json", _manifest(cfg, "synth"))
    return 0


def cmd_lagsearch(cfg: RunConfig) -> int:
    train, val, _test = cfg.load_splits()
    result = lag_search(train, val, cfg.max_lu, cfg.max_ly)
    _write_csv_rows(
        cfg.out / "lagsearch_heatmap.csv",
        ["l_u", "l_y", "metric", "delta"],
        result.long_table(),
    )
    chosen = {m: list(c) for m, c in sorted(result.best_per_metric.items())}
    _write_json(cfg.out / "lagsearch_chosen.json", {
        "best_per_metric": chosen,
        "failures": {f"{k[0]},{k[1]}": v for k, v in sorted(result.failures.items())},
    })
    _write_json(cfg.out / "run-manifest.json", _manifest(cfg, "lagsearch"))
    return 0


def cmd_train(cfg: RunConfig) -> int:
    train, val, _test = cfg.load_splits()
    spec = cfg.lag_spec
    report = {}
    whitebox = None
    needs_wb = {"whitebox", "grey-residual", "grey-augmented"} & set(cfg.model_names)
    if needs_wb:
        whitebox = _fit_whitebox(cfg, train)
        if "whitebox" in cfg.model_names:
            _write_json(cfg.out / MODEL_FILES["whitebox"], whitebox.to_dict())
            report["whitebox"] = {"n_draws": whitebox.n_draws}
    for name in cfg.model_names:
        if name == "whitebox":
            continue
        seed = derive_seed(cfg.seed, name)
        if name == "static-gp":
            static_spec = LagSpec(0, 0)
            opt = cfg.qpso_config("gp", 2, seed)
            model, res = train_gpnarx(train, val, static_spec, opt, objective="nlml")
        elif name == "gpnarx":
            input_dim = 2 * (spec.l_u + 1) + spec.l_y
            opt = cfg.qpso_config("gpnarx", input_dim, seed)
            model, res = train_gpnarx(train, val, spec, opt, objective="mpo-nlpl")
        elif name == "grey-residual":
            input_dim = 2 * (spec.l_u + 1) + spec.l_y
            opt = cfg.qpso_config("gpnarx", input_dim, seed)
            model = train_residual(train, val, whitebox, spec, opt)
            res = None
        elif name == "grey-augmented":
            input_dim = 3 * (spec.l_u + 1) + spec.l_y
            opt = cfg.qpso_config("gpnarx", input_dim, seed)
            model = train_augmented(train, val, whitebox, spec, opt)
            res = None
        _write_json(cfg.out / MODEL_FILES[name], model.to_dict())
        entry = {"optimizer": {"swarm_size": opt.swarm_size,
                               "stability_tol": opt.stability_tol}}
        if res is not None:
            entry["best_cost"] = res.best_cost
            if len(res.runs) >= 2:
                verdict = stability_report(res)
                entry["stable"] = verdict.stable
                entry["outlier_runs"] = list(verdict.outlier_runs)
        report[name] = entry
    _write_json(cfg.out / "training_report.json", report)
    _write_json(cfg.out / "run-manifest.json", _manifest(cfg, "train"))
    return 0


def _load_model(cfg: RunConfig, name: str):
    path = cfg.out / MODEL_FILES[name]
    if not path.exists():
        return None
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if name == "whitebox":
        return MorisonPosterior.from_dict(d)
    if name in ("grey-residual", "grey-augmented"):
        return GreyBoxModel.from_dict(d)
    return GPNARXModel.from_dict(d)


def _predict(cfg: RunConfig, name: str, mode: str, model, test: TimeSeriesDataset):
    """Returns (mean, variance, n_warmup) on the test set."""
    seed = derive_seed(cfg.seed, f"mc:{name}")
    if name == "whitebox":
        p = predict_whitebox(model, test.U, test.Udot)
        return p.mean, p.variance, 0
    if name == "static-gp":
        p = osa_predict(model, test)
        return p.mean, p.variance, 0
    if name == "gpnarx":
        if mode == "OSA":
            p = osa_predict(model, test)
        elif mode == "MPO":
            p = mpo_predict(model, test)
        else:
            p = mc_mpo_predict(model, test, n_samples=cfg.mc_samples, seed=seed)
        return p.mean, p.variance, model.spec.max_lag
    p = predict_greybox(model, test, mode, n_samples=cfg.mc_samples, seed=seed)
    return p.mean, p.variance, model.spec.max_lag


def cmd_evaluate(cfg: RunConfig) -> int:
    train, _val, test = cfg.load_splits()
    rows = []
    for name, mode in EVAL_ROWS:
        if name not in cfg.model_names:
            continue
        model = _load_model(cfg, name)
        if model is None:
            raise ConfigError(f"model file for {name!r} not found; run train first")
        mean, var, warm = _predict(cfg, name, mode, model, test)
        y = test.F[warm:]
        rows.append((
            name, mode,
            nmse(y, mean),
            msll(y, mean, np.maximum(var, 1e-12),
                 float(train.F.mean()), float(train.F.var())),
            len(y),
        ))
        _write_csv_rows(
            cfg.out / f"posterior_{name}_{mode}.csv".replace("-", "_").lower(),
            ["t", "mean", "variance"],
            list(zip(test.t[warm:], mean, var)),
        )
    _write_csv_rows(cfg.out / "metrics.csv",
                    ["model", "prediction", "nmse", "msll", "n_scored"], rows)
    _write_json(cfg.out / "run-manifest.json", _manifest(cfg, "evaluate"))
    return 0


def cmd_coverage(cfg: RunConfig) -> int:
    train, val, test = cfg.load_splits()
    spec = cfg.lag_spec
    prior = default_prior()
    fixed_wb = None
    if cfg.whitebox_mode == "fixed-external":
        # established white-box fitted on the full validation set
        fixed_wb = gibbs_fit(
            morison_design(val.U, val.Udot), val.F, prior,
            n_draws=int(cfg.gibbs.get("n_draws", 10_000)),
            burn_in=int(cfg.gibbs.get("burn_in", 1000)),
            seed=derive_seed(cfg.seed, "whitebox-external"),
        )
    # hyperparameters are carried over from the full-data trained models;
    # each coverage cell refits the GP on its subset at those settings
    base = {}
    for name in ("gpnarx", "grey-residual", "grey-augmented"):
        if name in cfg.model_names:
            model = _load_model(cfg, name)
            if model is None:
                raise ConfigError(f"model file for {name!r} not found; run train first")
            base[name] = model

    def wb_for(tr):
        if fixed_wb is not None:
            return fixed_wb
        n_draws = int(cfg.gibbs.get("n_draws", 2000))
        X = morison_design(tr.U, tr.Udot) if tr is not None else np.empty((0, 2))
        F = tr.F if tr is not None else np.empty(0)
        return gibbs_fit(X, F, prior, n_draws=n_draws,
                         burn_in=int(cfg.gibbs.get("burn_in", 500)),
                         seed=derive_seed(cfg.seed, "whitebox-coverage"))

    builders = {}
    if "whitebox" in cfg.model_names:
        def build_wb(tr, va):
            # score over the same post-warm-up window as the NARX models
            # so rows are comparable and the 0% reversion identity is exact
            p = predict_whitebox(wb_for(tr), test.U, test.Udot)
            m = spec.max_lag
            return p.mean[m:], p.variance[m:], m
        builders["whitebox"] = build_wb
    for name, bb in base.items():
        def build(tr, va, name=name, bb=bb):
            from .greybox import empty_blackbox, train_augmented, train_residual

            seed = derive_seed(cfg.seed, f"coverage:{name}")
            hyper = bb.gp.hyper if not isinstance(bb, GreyBoxModel) else bb.blackbox.gp.hyper
            if name == "gpnarx":
                if tr is None or len(tr) <= spec.max_lag:
                    from .greybox import empty_blackbox as _eb
                    model = _eb(spec, "raw", hyper)
                else:
                    model = fit_gpnarx(tr, hyper, spec)
                p = mc_mpo_predict(model, test, n_samples=cfg.mc_samples, seed=seed)
                return p.mean, p.variance, spec.max_lag
            wb = wb_for(tr)
            if name == "grey-residual":
                gm = train_residual(tr if tr is not None else _empty_ds(test), va,
                                    wb, spec, hyper=hyper)
            else:
                gm = train_augmented(tr if tr is not None else _empty_ds(test), va,
                                     wb, spec, hyper=hyper)
            p = predict_greybox(gm, test, "MC-MPO", n_samples=cfg.mc_samples, seed=seed)
            return p.mean, p.variance, spec.max_lag
        builders[name] = build

    rows = coverage_sweep(train, val, test, builders, cfg.coverage_targets)
    _write_csv_rows(
        cfg.out / "coverage_sweep.csv",
        ["target_percent", "coverage_percent", "model_name", "nmse", "msll",
         "n_train", "n_val", "reached"],
        rows,
    )
    _write_json(cfg.out / "run-manifest.json", _manifest(cfg, "coverage"))
    return 0


def _empty_ds(like: TimeSeriesDataset) -> TimeSeriesDataset:
    # single-point placeholder; train_* treat anything <= max_lag as empty
    return TimeSeriesDataset(like.t[:1], like.U[:1], like.Udot[:1], like.F[:1],
                             like.sample_rate_hz)


def cmd_spectra(cfg: RunConfig) -> int:
    train, val, test = cfg.load_splits()
    rows = spectra_comparison({"train": train, "val": val, "test": test})
    _write_csv_rows(
        cfg.out / "spectra_comparison.csv",
        ["dataset_a", "dataset_b", "channel", "pearson", "cosine"],
        rows,
    )
    _write_json(cfg.out / "run-manifest.json", _manifest(cfg, "spectra"))
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "lagsearch": cmd_lagsearch,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "coverage": cmd_coverage,
    "spectra": cmd_spectra,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="greywave", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="TOML config path")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker count (results are worker-independent)")
    args = parser.parse_args(argv)
    try:
        with open(args.config, "rb") as fh:
            doc = tomllib.load(fh)
        cfg = RunConfig(doc, seed=args.seed, out=args.out)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except (ConfigError, SchemaError, DataError, GridError, OSError,
            tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, GreywaveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
