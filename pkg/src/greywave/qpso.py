"""Quantum-behaved particle swarm optimisation with a repeat-run
stability protocol for gradient-free hyperparameter search."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError


@dataclass(frozen=True)
class QPSOConfig:
    """Swarm settings; bounds are per-dimension (lo, hi) in search space."""

    swarm_size: int
    bounds: tuple
    stability_tol: float = 1e-3
    max_iters: int = 500
    contraction_expansion: tuple = (1.0, 0.5)
    patience: int = 20
    n_repeat_runs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ConfigError("swarm_size must be at least 2")
        if self.stability_tol <= 0:
            raise ConfigError("stability_tol must be positive")
        if self.n_repeat_runs < 1:
            raise ConfigError("n_repeat_runs must be at least 1")
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", b)
        for lo, hi in b:
            if not lo < hi:
                raise ConfigError("each bound must satisfy lo < hi")


# Table-style defaults: (swarm size, cost stability tolerance)
GP_DEFAULTS = (200, 1e-3)
GPNARX_DEFAULTS = (1000, 1e-5)
DEFAULT_REPEAT_RUNS = 12


@dataclass(frozen=True)
class OptimResult:
    """Best position/cost plus per-run results and the best cost trace."""

    best_position: np.ndarray
    best_cost: float
    cost_trace: np.ndarray
    runs: tuple  # per repeat: (position, cost)

    def trace_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,best_cost\n")
            for i, c in enumerate(self.cost_trace):
                fh.write(f"{i},{repr(float(c))}\n")


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    outlier_runs: tuple
    cost_spread: float
    position_spread: float


def _single_run(cost, cfg: QPSOConfig, rng: np.random.Generator):
    d = len(cfg.bounds)
    lo = np.array([b[0] for b in cfg.bounds])
    hi = np.array([b[1] for b in cfg.bounds])

    def safe_cost(x):
        c = cost(x)
        return float(c) if np.isfinite(c) else np.inf

    X = rng.uniform(lo, hi, size=(cfg.swarm_size, d))
    costs = np.array([safe_cost(x) for x in X])
    pbest = X.copy()
    pbest_cost = costs.copy()
    g = int(np.argmin(pbest_cost))
    gbest = pbest[g].copy()
    gbest_cost = pbest_cost[g]

    beta0, beta1 = cfg.contraction_expansion
    trace = [gbest_cost]
    since_improve = 0
    for it in range(cfg.max_iters):
        beta = beta0 + (beta1 - beta0) * it / max(cfg.max_iters - 1, 1)
        mbest = pbest.mean(axis=0)
        phi = rng.uniform(size=(cfg.swarm_size, d))
        u = rng.uniform(size=(cfg.swarm_size, d))
        sign = np.where(rng.uniform(size=(cfg.swarm_size, d)) < 0.5, -1.0, 1.0)
        p = phi * pbest + (1 - phi) * gbest
        X = p + sign * beta * np.abs(mbest - X) * np.log(1.0 / u)
        np.clip(X, lo, hi, out=X)
        costs = np.array([safe_cost(x) for x in X])
        improved = costs < pbest_cost
        pbest[improved] = X[improved]
        pbest_cost[improved] = costs[improved]
        g = int(np.argmin(pbest_cost))
        if pbest_cost[g] < gbest_cost - cfg.stability_tol:
            since_improve = 0
        else:
            since_improve += 1
        if pbest_cost[g] < gbest_cost:
            gbest_cost = pbest_cost[g]
            gbest = pbest[g].copy()
        trace.append(gbest_cost)
        if since_improve >= cfg.patience:
            break
    return gbest, gbest_cost, np.asarray(trace)


def qpso_minimize(cost, cfg: QPSOConfig) -> OptimResult:
    """Minimise a d-dimensional cost within box bounds.

    Runs the swarm ``n_repeat_runs`` times from derived seeds and keeps
    the best run; non-finite cost evaluations are treated as +inf.
    """
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_repeat_runs)
    runs = []
    best = None
    best_trace = None
    for ss in seeds:
        pos, c, trace = _single_run(cost, cfg, np.random.default_rng(ss))
        runs.append((pos, c))
        if best is None or c < best[1]:
            best = (pos, c)
            best_trace = trace
    if not np.isfinite(best[1]):
        raise NumericalError("all optimisation runs returned non-finite costs")
    return OptimResult(best[0], float(best[1]), best_trace, tuple(runs))


def stability_report(
    result: OptimResult, position_tol: float = 0.5, cost_tol: float = 1e-2
) -> StabilityVerdict:
    """Cross-check repeated runs against the best run.

    Stable iff every run cost lies within ``cost_tol`` of the best and
    every run position within ``position_tol`` (infinity norm) of the best
    run's position.
    """
    if len(result.runs) < 2:
        raise ConfigError("stability check requires at least 2 runs")
    best_pos, best_cost = min(result.runs, key=lambda r: r[1])
    outliers = []
    cost_spread = 0.0
    pos_spread = 0.0
    for i, (pos, c) in enumerate(result.runs):
        dc = c - best_cost
        dp = float(np.max(np.abs(np.asarray(pos) - best_pos)))
        cost_spread = max(cost_spread, dc)
        pos_spread = max(pos_spread, dp)
        if dc > cost_tol or dp > position_tol:
            outliers.append(i)
    return StabilityVerdict(not outliers, tuple(outliers), cost_spread, pos_spread)
