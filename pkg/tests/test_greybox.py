import numpy as np
import pytest

from greywave.dataset import LagSpec, SyntheticConfig, split_sequential, synthesize
from greywave.errors import ConfigError
from greywave.gp import GPHyperparams
from greywave.gpnarx import narx_design
from greywave.greybox import (
    GreyBoxModel,
    empty_blackbox,
    predict_greybox,
    residual_series,
    train_augmented,
    train_residual,
    whitebox_mean,
)
from greywave.metrics import nmse
from greywave.whitebox import default_prior, gibbs_fit, morison_design, predict_whitebox

SPEC = LagSpec(1, 3)


def _hyper(dim, sf=1.0, sn=1e-2):
    return GPHyperparams(sf, np.ones(dim), sn)


@pytest.fixture(scope="module")
def splits():
    cfg = SyntheticConfig(n_points=900, noise_std=3.0, residual="ar-nonlinear", seed=7)
    return split_sequential(synthesize(cfg), [300, 300, 300])


@pytest.fixture(scope="module")
def whitebox(splits):
    train = splits[0]
    return gibbs_fit(morison_design(train.U, train.Udot), train.F, default_prior(),
                     n_draws=2000, burn_in=200, seed=0)


@pytest.fixture(scope="module")
def residual_model(splits, whitebox):
    train, val, _ = splits
    h = GPHyperparams(float(residual_series(whitebox, train).var()), np.ones(7), 9.0)
    return train_residual(train, val, whitebox, SPEC, hyper=h)


class TestResidualArchitecture:
    def test_exact_whitebox_leaves_zero_residual(self):
        ds = synthesize(SyntheticConfig(n_points=400, seed=3))
        tr, va, te = split_sequential(ds, [150, 100, 150])
        wb = gibbs_fit(morison_design(tr.U, tr.Udot), tr.F, default_prior(),
                       n_draws=1500, burn_in=200, seed=0)
        r = residual_series(wb, tr)
        assert np.max(np.abs(r)) < 1e-2 * np.std(tr.F)
        gm = train_residual(tr, va, wb, SPEC, hyper=_hyper(7, sf=max(r.var(), 1e-8)))
        p = predict_greybox(gm, te, "MPO")
        wbp = predict_whitebox(wb, te.U, te.Udot, include_noise=False)
        np.testing.assert_allclose(p.mean, wbp.mean[3:], atol=1e-2 * np.std(te.F))

    def test_additivity_identity(self, residual_model, splits):
        _, _, test = splits
        from greywave.gpnarx import osa_predict

        p = predict_greybox(residual_model, test, "OSA")
        wb_mean = whitebox_mean(residual_model.whitebox, test)
        bb = osa_predict(residual_model.blackbox, test,
                         target_series=test.F - wb_mean)
        np.testing.assert_allclose(p.mean - wb_mean[3:], bb.mean, atol=1e-12)

    def test_improves_on_whitebox(self, residual_model, splits, whitebox):
        _, _, test = splits
        y = test.F[3:]
        grey = nmse(y, predict_greybox(residual_model, test, "MPO").mean)
        wb = nmse(y, predict_whitebox(whitebox, test.U, test.Udot).mean[3:])
        assert grey < wb

    def test_variance_includes_whitebox(self, splits, whitebox):
        train, val, test = splits
        h = _hyper(7)
        with_wb = train_residual(train, val, whitebox, SPEC, hyper=h,
                                 include_whitebox_variance=True)
        without = train_residual(train, val, whitebox, SPEC, hyper=h,
                                 include_whitebox_variance=False)
        pv = predict_greybox(with_wb, test, "MPO").variance
        pv0 = predict_greybox(without, test, "MPO").variance
        wbv = predict_whitebox(whitebox, test.U, test.Udot,
                               include_noise=False).variance[3:]
        np.testing.assert_allclose(pv - pv0, wbv, atol=1e-10)

    def test_mc_paths_offset_by_whitebox_mean(self, residual_model, splits):
        _, _, test = splits
        from greywave.gpnarx import mc_mpo_predict

        wb_mean = whitebox_mean(residual_model.whitebox, test)
        p = predict_greybox(residual_model, test, "MC-MPO", n_samples=20, seed=3)
        raw = mc_mpo_predict(residual_model.blackbox, test, n_samples=20, seed=3,
                             warmup_series=test.F - wb_mean)
        np.testing.assert_allclose(p.paths, raw.paths + wb_mean[3:], atol=1e-12)


class TestZeroDataReversion:
    def test_residual_greybox_equals_whitebox(self, splits, whitebox):
        _, _, test = splits
        bb = empty_blackbox(SPEC, "residual-target")
        gm = GreyBoxModel(whitebox, bb, "residual", SPEC,
                          include_whitebox_variance=False)
        wbp = predict_whitebox(whitebox, test.U, test.Udot, include_noise=False)
        for mode in ("OSA", "MPO"):
            p = predict_greybox(gm, test, mode)
            np.testing.assert_allclose(p.mean, wbp.mean[3:], atol=1e-10)
        mc = predict_greybox(gm, test, "MC-MPO", n_samples=50, seed=0)
        np.testing.assert_allclose(mc.mean, wbp.mean[3:], atol=1e-10)

    def test_augmented_reverts_to_prior_mean(self, splits, whitebox):
        _, _, test = splits
        bb = empty_blackbox(SPEC, "morison-augmented")
        gm = GreyBoxModel(whitebox, bb, "input-augmentation", SPEC)
        p = predict_greybox(gm, test, "MPO")
        np.testing.assert_array_equal(p.mean, 0.0)

    def test_training_on_empty_data_gives_reversion(self, splits, whitebox):
        train, val, test = splits
        stub = split_sequential(train, [1, 1, 1])[0]
        gm = train_residual(stub, val, whitebox, SPEC,
                            include_whitebox_variance=False)
        p = predict_greybox(gm, test, "MPO")
        wbp = predict_whitebox(whitebox, test.U, test.Udot, include_noise=False)
        np.testing.assert_allclose(p.mean, wbp.mean[3:], atol=1e-10)


class TestAugmentedArchitecture:
    def test_design_dimension(self, splits, whitebox):
        train = splits[0]
        dm = narx_design(train, SPEC, extra_exog=whitebox_mean(whitebox, train))
        assert dm.rows.shape[1] == 3 * 2 + 3 == 9

    def test_trained_model_predicts(self, splits, whitebox):
        train, val, test = splits
        h = GPHyperparams(float(train.F.var()), np.ones(9), 9.0)
        gm = train_augmented(train, val, whitebox, SPEC, hyper=h)
        assert gm.architecture == "input-augmentation"
        p = predict_greybox(gm, test, "MPO")
        assert nmse(test.F[3:], p.mean) < 100

    def test_zero_augmentation_channel_reduces_to_blackbox(self, splits):
        train, _, test = splits
        from greywave.gpnarx import fit_gpnarx, osa_predict

        h9 = GPHyperparams(float(train.F.var()), np.ones(9), 9.0)
        h7 = GPHyperparams(float(train.F.var()), np.ones(7), 9.0)
        zeros = np.zeros(len(train))
        aug = fit_gpnarx(train, h9, SPEC, extra_exog=zeros,
                         transform="morison-augmented")
        raw = fit_gpnarx(train, h7, SPEC)
        pa = osa_predict(aug, test, extra_exog=np.zeros(len(test)))
        pr = osa_predict(raw, test)
        np.testing.assert_allclose(pa.mean, pr.mean, atol=1e-8)

    def test_length_scales_positive_after_training(self, splits, whitebox):
        train, val, _ = splits
        h = GPHyperparams(float(train.F.var()), np.ones(9), 9.0)
        gm = train_augmented(train, val, whitebox, SPEC, hyper=h)
        ls = gm.blackbox.gp.hyper.length_scales
        assert np.all(np.isfinite(ls)) and np.all(ls > 0)


class TestModelValidation:
    def test_architecture_transform_consistency(self, whitebox):
        bb = empty_blackbox(SPEC, "residual-target")
        with pytest.raises(ConfigError):
            GreyBoxModel(whitebox, bb, "input-augmentation", SPEC)
        with pytest.raises(ConfigError):
            GreyBoxModel(whitebox, bb, "summation", SPEC)

    def test_serialization_roundtrip(self, residual_model, splits):
        _, _, test = splits
        back = GreyBoxModel.from_dict(residual_model.to_dict())
        a = predict_greybox(residual_model, test, "MPO")
        b = predict_greybox(back, test, "MPO")
        np.testing.assert_allclose(b.mean, a.mean, atol=1e-8)

    def test_unknown_mode(self, residual_model, splits):
        with pytest.raises(ConfigError):
            predict_greybox(residual_model, splits[2], "STATIC")


def test_monotone_benefit_over_seeds(splits):
    wins = 0
    seeds = range(8)
    for seed in seeds:
        cfg = SyntheticConfig(n_points=600, noise_std=3.0, residual="ar-nonlinear",
                              seed=seed)
        tr, va, te = split_sequential(synthesize(cfg), [250, 150, 200])
        wb = gibbs_fit(morison_design(tr.U, tr.Udot), tr.F, default_prior(),
                       n_draws=1000, burn_in=200, seed=seed)
        r = residual_series(wb, tr)
        gm = train_residual(tr, va, wb, SPEC,
                            hyper=GPHyperparams(float(r.var()), np.ones(7), 9.0))
        y = te.F[3:]
        grey = nmse(y, predict_greybox(gm, te, "MPO").mean)
        wb_score = nmse(y, predict_whitebox(wb, te.U, te.Udot).mean[3:])
        if grey <= wb_score:
            wins += 1
    assert wins >= 0.9 * len(list(seeds))
