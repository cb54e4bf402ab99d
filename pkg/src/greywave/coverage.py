"""Interpolation-vs-extrapolation analysis: star-shaped input-space
boundaries, boundary-overlap coverage and coverage-vs-NMSE sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import ConfigError, DegeneracyError
from .metrics import msll, nmse

DEFAULT_N_BINS = 360
DEFAULT_GRID_RESOLUTION = 512


@dataclass(frozen=True)
class RadialBoundary:
    """Maximum radial extent of a point cloud per angular bin about a centre."""

    center: np.ndarray
    angles: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "angles", np.asarray(self.angles, dtype=float))
        object.__setattr__(self, "radii", np.asarray(self.radii, dtype=float))
        if self.angles.shape != self.radii.shape:
            raise ConfigError("angles and radii must have equal length")
        if not np.all(np.isfinite(self.radii)) or np.any(self.radii < 0):
            raise ConfigError("radii must be finite and non-negative")

    @property
    def n_bins(self) -> int:
        return len(self.angles)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Vectorised membership test for an (m, 2) point array."""
        p = np.asarray(points, dtype=float) - self.center
        r = np.hypot(p[:, 0], p[:, 1])
        theta = np.mod(np.arctan2(p[:, 1], p[:, 0]), 2 * np.pi)
        bins = (theta / (2 * np.pi) * self.n_bins).astype(int) % self.n_bins
        return r <= self.radii[bins]

    def vertices(self) -> np.ndarray:
        """Polygon vertices (one per bin centre) for plotting exports."""
        mid = self.angles + np.pi / self.n_bins
        return self.center + np.column_stack(
            [self.radii * np.cos(mid), self.radii * np.sin(mid)]
        )


@dataclass(frozen=True)
class CoverageResult:
    coverage_percent: float
    area_test: float
    area_overlap: float

    def __post_init__(self):
        if not 0 <= self.area_overlap <= self.area_test * (1 + 1e-12):
            raise ConfigError("overlap area must lie within the test area")


def radial_boundary(points, n_bins: int = DEFAULT_N_BINS) -> RadialBoundary:
    """Bound a point cloud by per-bin maximum projections from the origin.

    Isolated empty bins inherit the radius of the angularly nearest
    non-empty bin so small sampling gaps do not puncture the polygon;
    bins deep inside a large empty arc stay at radius zero so genuinely
    unvisited regions are not claimed.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise DegeneracyError("at least 3 points are required")
    r = np.hypot(pts[:, 0], pts[:, 1])
    if np.all(r == 0):
        raise DegeneracyError("all points coincide with the centre")
    theta = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * np.pi)
    bins = (theta / (2 * np.pi) * n_bins).astype(int) % n_bins
    radii = np.zeros(n_bins)
    filled = np.zeros(n_bins, dtype=bool)
    np.maximum.at(radii, bins, r)
    filled[bins] = True
    if not filled.all():
        fill_limit = max(1, n_bins // 120)  # ~3 degrees at the default
        filled_idx = np.flatnonzero(filled)
        for i in np.flatnonzero(~filled):
            d = np.abs(filled_idx - i)
            d = np.minimum(d, n_bins - d)  # circular distance
            j = np.argmin(d)
            if d[j] <= fill_limit:
                radii[i] = radii[filled_idx[j]]
    angles = 2 * np.pi * np.arange(n_bins) / n_bins
    return RadialBoundary(np.zeros(2), angles, radii)


def boundary_area(b: RadialBoundary, grid_resolution: int = DEFAULT_GRID_RESOLUTION) -> float:
    """Raster estimate of the enclosed area."""
    per, _ = _raster_areas([b], grid_resolution)
    return per[0][0]


def _raster_areas(boundaries, grid_resolution: int):
    """Count raster cells inside each boundary and inside all of them.

    All boundaries share one grid spanning their union bounding box, so
    intersection areas are consistent.
    """
    rmax = max(float(b.radii.max()) for b in boundaries)
    if rmax == 0:
        raise DegeneracyError("degenerate boundary with zero extent")
    lim = rmax * 1.001
    axis = np.linspace(-lim, lim, grid_resolution)
    cell = float(axis[1] - axis[0]) ** 2
    gx, gy = np.meshgrid(axis, axis)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    masks = [b.contains(pts) for b in boundaries]
    per = [(cell * int(m.sum()), m) for m in masks]
    return per, cell


def compute_coverage(
    train_pts,
    val_pts,
    test_pts,
    n_bins: int = DEFAULT_N_BINS,
    grid_resolution: int = DEFAULT_GRID_RESOLUTION,
) -> CoverageResult:
    """Proportion of the test boundary area inside train and val boundaries."""
    b_train = radial_boundary(train_pts, n_bins)
    b_val = radial_boundary(val_pts, n_bins)
    b_test = radial_boundary(test_pts, n_bins)
    per, cell = _raster_areas([b_test, b_train, b_val], grid_resolution)
    (area_test, m_test), (_, m_train), (_, m_val) = per
    if area_test == 0:
        raise DegeneracyError("test boundary encloses no raster cells")
    inter = m_test & m_train & m_val
    area_overlap = cell * int(inter.sum())
    return CoverageResult(100.0 * area_overlap / area_test, area_test, area_overlap)


def kinematics_points(ds: TimeSeriesDataset) -> np.ndarray:
    """(U, Udot) plane representation used for boundary construction."""
    return np.column_stack([ds.U, ds.Udot])


def _prefix(ds: TimeSeriesDataset, n: int) -> TimeSeriesDataset | None:
    if n <= 0:
        return None
    n = min(n, len(ds))
    return TimeSeriesDataset(ds.t[:n], ds.U[:n], ds.Udot[:n], ds.F[:n], ds.sample_rate_hz)


def _coverage_of_prefix(full_train, full_val, test_pts, n_train, n_val, **kw) -> float:
    tr = _prefix(full_train, n_train)
    va = _prefix(full_val, n_val)
    if tr is None or va is None or len(tr) < 3 or len(va) < 3:
        return 0.0
    try:
        return compute_coverage(
            kinematics_points(tr), kinematics_points(va), test_pts, **kw
        ).coverage_percent
    except DegeneracyError:
        return 0.0


def subsample_for_coverage(
    full_train: TimeSeriesDataset,
    full_val: TimeSeriesDataset,
    test: TimeSeriesDataset,
    target_percent: float,
    tolerance: float = 1.0,
    n_bins: int = DEFAULT_N_BINS,
    grid_resolution: int = DEFAULT_GRID_RESOLUTION,
):
    """Find contiguous train/val prefixes whose coverage hits a target.

    Prefix lengths grow in equal proportion of the full sets and are
    binary-searched; coverage is monotone in prefix length because
    boundaries only grow as points are added.  Returns
    (train', val', achieved_percent, reached) where ``reached`` is False
    when the target is unattainable within the available data.
    """
    if not 0 <= target_percent <= 100:
        raise ConfigError("target_percent must lie in [0, 100]")
    kw = dict(n_bins=n_bins, grid_resolution=grid_resolution)
    test_pts = kinematics_points(test)
    if target_percent == 0:
        return None, None, 0.0, True

    def at_fraction(frac):
        n_tr = int(round(frac * len(full_train)))
        n_va = int(round(frac * len(full_val)))
        return n_tr, n_va, _coverage_of_prefix(
            full_train, full_val, test_pts, n_tr, n_va, **kw
        )

    lo, hi = 0.0, 1.0
    _, _, cov_hi = at_fraction(1.0)
    if cov_hi <= target_percent:
        tr = _prefix(full_train, len(full_train))
        va = _prefix(full_val, len(full_val))
        reached = abs(cov_hi - target_percent) <= tolerance
        return tr, va, cov_hi, reached
    best = None
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        n_tr, n_va, cov = at_fraction(mid)
        if abs(cov - target_percent) <= tolerance:
            best = (n_tr, n_va, cov)
            break
        if cov < target_percent:
            lo = mid
        else:
            hi = mid
            best = (n_tr, n_va, cov)
        if int(round(lo * len(full_train))) == int(round(hi * len(full_train))):
            break
    if best is None:
        n_tr, n_va, cov = at_fraction(hi)
        best = (n_tr, n_va, cov)
    n_tr, n_va, cov = best
    return (
        _prefix(full_train, n_tr),
        _prefix(full_val, n_va),
        cov,
        abs(cov - target_percent) <= tolerance,
    )


def coverage_sweep(
    full_train: TimeSeriesDataset,
    full_val: TimeSeriesDataset,
    test: TimeSeriesDataset,
    model_builders: dict,
    targets,
    tolerance: float = 2.0,
    n_bins: int = DEFAULT_N_BINS,
    grid_resolution: int = DEFAULT_GRID_RESOLUTION,
) -> list:
    """Evaluate each model at a ladder of coverage levels.

    ``model_builders`` maps a model name to a callable
    ``build(train_or_None, val_or_None) -> (pred_mean, pred_var, warmup)``
    evaluated on the test set; ``warmup`` is the number of leading test
    points excluded from scoring.  Returns rows of
    (target, achieved, model, nmse, msll, n_train, n_val, reached) where
    ``reached`` flags whether the target coverage was attainable;
    failures are recorded with NaN metrics.
    """
    if list(targets) != sorted(targets):
        raise ConfigError("targets must be sorted ascending")
    rows = []
    for target in targets:
        tr, va, achieved, reached = subsample_for_coverage(
            full_train, full_val, test, target, tolerance, n_bins, grid_resolution
        )
        n_tr = len(tr) if tr is not None else 0
        n_va = len(va) if va is not None else 0
        for name, build in model_builders.items():
            try:
                mean, var, warm = build(tr, va)
                y = test.F[warm:]
                score_nmse = nmse(y, mean)
                score_msll = msll(
                    y, mean, np.maximum(var, 1e-12),
                    float(full_train.F.mean()), float(full_train.F.var()),
                )
                rows.append((target, achieved, name, score_nmse, score_msll,
                             n_tr, n_va, reached))
            except Exception:  # record the failed cell and continue the sweep
                rows.append((target, achieved, name, float("nan"), float("nan"),
                             n_tr, n_va, reached))
    return rows
