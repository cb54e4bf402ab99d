import numpy as np
import pytest

from greywave.errors import ConfigError, NumericalError
from greywave.qpso import (
    DEFAULT_REPEAT_RUNS,
    GP_DEFAULTS,
    GPNARX_DEFAULTS,
    OptimResult,
    QPSOConfig,
    qpso_minimize,
    stability_report,
)


def _cfg(d, **kw):
    kw.setdefault("swarm_size", 40)
    kw.setdefault("bounds", tuple((-5.0, 5.0) for _ in range(d)))
    return QPSOConfig(**kw)


class TestQpsoMinimize:
    def test_sphere_10d(self):
        res = qpso_minimize(lambda x: float(x @ x), _cfg(10, swarm_size=200, seed=0))
        assert res.best_cost < 1e-3

    def test_rosenbrock(self):
        def rosen(x):
            return float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)

        res = qpso_minimize(rosen, _cfg(2, swarm_size=100, max_iters=300,
                                        patience=100, seed=3))
        np.testing.assert_allclose(res.best_position, [1.0, 1.0], atol=0.1)

    def test_constant_cost_stops_at_patience(self):
        cfg = _cfg(3, max_iters=500, patience=10, seed=1)
        res = qpso_minimize(lambda x: 7.0, cfg)
        assert res.best_cost == 7.0
        # initial evaluation + exactly the patience window of iterations
        assert len(res.cost_trace) == 11

    def test_deterministic(self):
        cfg = _cfg(4, seed=5)
        a = qpso_minimize(lambda x: float(x @ x), cfg)
        b = qpso_minimize(lambda x: float(x @ x), cfg)
        np.testing.assert_array_equal(a.best_position, b.best_position)
        assert a.best_cost == b.best_cost

    def test_bounds_respected(self):
        seen = []

        def cost(x):
            seen.append(x.copy())
            return float(x @ x)

        bounds = tuple((0.5, 2.0) for _ in range(3))
        qpso_minimize(cost, _cfg(3, bounds=bounds, max_iters=30, seed=2))
        arr = np.array(seen)
        assert arr.min() >= 0.5 and arr.max() <= 2.0

    def test_trace_non_increasing(self):
        res = qpso_minimize(lambda x: float(x @ x), _cfg(5, seed=8))
        assert np.all(np.diff(res.cost_trace) <= 0)

    def test_non_finite_treated_as_inf(self):
        def cost(x):
            return np.nan if x[0] < 0 else float(x @ x)

        res = qpso_minimize(cost, _cfg(2, seed=4))
        assert np.isfinite(res.best_cost)

    def test_all_non_finite_raises(self):
        with pytest.raises(NumericalError):
            qpso_minimize(lambda x: np.inf, _cfg(2, max_iters=5, patience=2, seed=0))

    def test_repeat_runs_keep_best(self):
        cfg = _cfg(3, n_repeat_runs=4, seed=6, max_iters=40)
        res = qpso_minimize(lambda x: float(x @ x), cfg)
        assert len(res.runs) == 4
        assert res.best_cost == min(c for _, c in res.runs)


class TestStabilityReport:
    def _result(self, runs):
        best = min(runs, key=lambda r: r[1])
        return OptimResult(np.asarray(best[0]), best[1], np.array([best[1]]),
                           tuple((np.asarray(p), c) for p, c in runs))

    def test_identical_runs_stable(self):
        res = self._result([([1.0, 2.0], 5.0)] * 3)
        verdict = stability_report(res)
        assert verdict.stable and verdict.outlier_runs == ()

    def test_outlier_cost_flagged(self):
        res = self._result([([1.0, 2.0], 5.0), ([1.0, 2.0], 5.0),
                            ([1.0, 2.0], 5.0 + 10 * 1e-2)])
        verdict = stability_report(res, cost_tol=1e-2)
        assert not verdict.stable
        assert verdict.outlier_runs == (2,)

    def test_outlier_position_flagged(self):
        res = self._result([([0.0, 0.0], 1.0), ([2.0, 0.0], 1.0)])
        verdict = stability_report(res, position_tol=0.5)
        assert not verdict.stable

    def test_requires_two_runs(self):
        res = self._result([([0.0], 1.0)])
        with pytest.raises(ConfigError):
            stability_report(res)


class TestDefaults:
    def test_table_defaults(self):
        assert GP_DEFAULTS == (200, 1e-3)
        assert GPNARX_DEFAULTS == (1000, 1e-5)
        assert DEFAULT_REPEAT_RUNS == 12

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            QPSOConfig(swarm_size=1, bounds=((0, 1),))
        with pytest.raises(ConfigError):
            QPSOConfig(swarm_size=5, bounds=((1, 0),))


def test_trace_csv_export(tmp_path):
    res = qpso_minimize(lambda x: float(x @ x), _cfg(2, seed=0, max_iters=20))
    path = tmp_path / "trace.csv"
    res.trace_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "iteration,best_cost"
    assert len(lines) == len(res.cost_trace) + 1
