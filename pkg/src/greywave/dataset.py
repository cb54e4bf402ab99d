"""Time series containers, CSV ingestion, sequential splitting, lag
embedding and a synthetic force/kinematics generator."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundsError,
    ConfigError,
    DataError,
    GridError,
    SchemaError,
    ShapeError,
)

_CSV_COLUMNS = ("t", "u", "udot", "f")


def _readonly(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Uniformly sampled particle velocity, acceleration and force.

    ``t`` is in seconds on a uniform grid, ``U`` in m/s, ``Udot`` in m/s^2,
    ``F`` in N.
    """

    t: np.ndarray
    U: np.ndarray
    Udot: np.ndarray
    F: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        for name in ("t", "U", "Udot", "F"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = len(self.t)
        if n < 1:
            raise DataError("dataset must contain at least one sample")
        for name in ("U", "Udot", "F"):
            if len(getattr(self, name)) != n:
                raise DataError(f"channel {name} length differs from t")
        for name in ("t", "U", "Udot", "F"):
            a = getattr(self, name)
            if not np.all(np.isfinite(a)):
                row = int(np.flatnonzero(~np.isfinite(a))[0])
                raise DataError(f"non-finite value in channel {name} at row {row}")
        if not self.sample_rate_hz > 0:
            raise DataError("sample_rate_hz must be positive")
        if n > 1:
            dt = 1.0 / self.sample_rate_hz
            expected = self.t[0] + dt * np.arange(n)
            scale = max(abs(self.t[0]), abs(self.t[-1]), dt)
            if np.max(np.abs(self.t - expected)) > 1e-9 * scale:
                raise GridError("time grid is not uniform at 1/sample_rate_hz spacing")
            if dt <= 0 or self.t[1] <= self.t[0]:
                raise GridError("time grid must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class LagSpec:
    """Exogenous lag count ``l_u`` and autoregressive lag count ``l_y``.

    ``l_y = 0`` denotes a static, non-autoregressive model.
    """

    l_u: int
    l_y: int

    def __post_init__(self):
        if self.l_u < 0 or self.l_y < 0:
            raise ConfigError("lag counts must be non-negative")

    @property
    def max_lag(self) -> int:
        return max(self.l_u, self.l_y)


@dataclass(frozen=True)
class DesignMatrix:
    """Lag-embedded regression design with aligned targets."""

    rows: np.ndarray
    targets: np.ndarray
    column_labels: tuple
    first_valid_index: int

    def __post_init__(self):
        object.__setattr__(self, "rows", _readonly(self.rows))
        object.__setattr__(self, "targets", _readonly(self.targets))
        object.__setattr__(self, "column_labels", tuple(self.column_labels))
        if self.rows.shape[0] != len(self.targets):
            raise ShapeError("design rows and targets have different lengths")
        if self.rows.shape[1] != len(self.column_labels):
            raise DataError("column label count does not match design width")
        if not np.all(np.isfinite(self.rows)) or not np.all(np.isfinite(self.targets)):
            raise DataError("design matrix contains non-finite entries")


@dataclass(frozen=True)
class SyntheticConfig:
    """Configuration for the synthetic wave/force generator.

    ``components`` is a list of (amplitude m/s, frequency Hz, phase rad)
    tuples summed to produce the particle velocity.  The force is the
    Morison form with grouped coefficients plus an optional nonlinear
    autoregressive residual and Gaussian measurement noise.
    """

    n_points: int = 1000
    sample_rate_hz: float = 13.25
    components: tuple = ((1.0, 0.1, 0.0), (0.4, 0.23, 1.3), (0.2, 0.41, 2.1))
    true_cd_prime: float = 147.6
    true_cm_prime: float = 222.67
    residual: str = "none"
    residual_coeffs: tuple = (0.6, -0.2, 25.0)
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 10:
            raise ConfigError("n_points must be at least 10")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be positive")
        if self.residual not in ("none", "ar-nonlinear"):
            raise ConfigError(f"unknown residual kind {self.residual!r}")
        if not self.components:
            raise ConfigError("at least one wave component is required")
        for a, f, _phi in self.components:
            if f >= self.sample_rate_hz / 2:
                raise ConfigError("component frequency exceeds Nyquist")


def load_csv(path) -> TimeSeriesDataset:
    """Read a ``t,U,Udot,F`` CSV (header mandatory, case-insensitive)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        names = [h.strip().lower() for h in header]
        idx = {}
        for col in _CSV_COLUMNS:
            if col not in names:
                pretty = {"t": "t", "u": "U", "udot": "Udot", "f": "F"}[col]
                raise SchemaError(f"{path}: missing column {pretty!r}")
            idx[col] = names.index(col)
        data = {col: [] for col in _CSV_COLUMNS}
        for i, row in enumerate(reader):
            if not row:
                continue
            for col in _CSV_COLUMNS:
                try:
                    v = float(row[idx[col]])
                except (ValueError, IndexError):
                    raise DataError(f"{path}: unreadable value at row {i}") from None
                if not np.isfinite(v):
                    raise DataError(f"{path}: non-finite value at row {i}")
                data[col].append(v)
    t = np.asarray(data["t"])
    if len(t) == 0:
        raise DataError(f"{path}: no data rows")
    if len(t) > 1:
        dt = t[1] - t[0]
        if dt <= 0:
            raise GridError(f"{path}: time grid must be increasing")
        steps = np.diff(t)
        if np.max(np.abs(steps - dt)) > 1e-9 * max(abs(t[-1]), dt):
            raise GridError(f"{path}: non-uniform time grid")
        rate = 1.0 / dt
    else:
        rate = 1.0
    return TimeSeriesDataset(t, data["u"], data["udot"], data["f"], rate)


def write_csv(path, ds: TimeSeriesDataset) -> None:
    """Write a dataset in the canonical t,U,Udot,F layout."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "U", "Udot", "F"])
        for row in zip(ds.t, ds.U, ds.Udot, ds.F):
            writer.writerow([repr(float(v)) for v in row])


def split_sequential(ds: TimeSeriesDataset, sizes) -> tuple:
    """Split into contiguous train/val/test subsets from the start."""
    sizes = [int(s) for s in sizes]
    if len(sizes) != 3:
        raise ConfigError("exactly three split sizes are required")
    if any(s < 1 for s in sizes):
        raise ConfigError("each split size must be at least 1")
    if sum(sizes) > len(ds):
        raise BoundsError(
            f"requested {sum(sizes)} points but dataset has {len(ds)}"
        )
    out = []
    start = 0
    for s in sizes:
        sl = slice(start, start + s)
        out.append(
            TimeSeriesDataset(ds.t[sl], ds.U[sl], ds.Udot[sl], ds.F[sl], ds.sample_rate_hz)
        )
        start += s
    return tuple(out)


def synthesize(cfg: SyntheticConfig) -> TimeSeriesDataset:
    """Generate a synthetic dataset with a known Morison-form force.

    The velocity is a sum of sinusoids with the acceleration taken as the
    exact analytic derivative, so the generated force obeys the grouped
    Morison form by construction.  Deterministic for a fixed seed.
    """
    n = cfg.n_points
    t = np.arange(n) / cfg.sample_rate_hz
    U = np.zeros(n)
    Udot = np.zeros(n)
    for a, f, phi in cfg.components:
        w = 2 * np.pi * f
        U += a * np.sin(w * t + phi)
        Udot += a * w * np.cos(w * t + phi)
    F = cfg.true_cd_prime * U * np.abs(U) + cfg.true_cm_prime * Udot
    if cfg.residual == "ar-nonlinear":
        c1, c2, gain = cfg.residual_coeffs
        drive = gain * np.abs(U) ** 3
        r = np.zeros(n)
        for i in range(n):
            r[i] = drive[i]
            if i >= 1:
                r[i] += c1 * r[i - 1]
            if i >= 2:
                r[i] += c2 * r[i - 2]
        F = F + r
    if cfg.noise_std > 0:
        rng = np.random.default_rng(cfg.seed)
        F = F + rng.normal(0.0, cfg.noise_std, size=n)
    return TimeSeriesDataset(t, U, Udot, F, cfg.sample_rate_hz)


def build_lagged_design(
    ds: TimeSeriesDataset,
    spec: LagSpec,
    target: str = "F",
    exogenous: dict | None = None,
    target_series: np.ndarray | None = None,
) -> DesignMatrix:
    """Embed the series into an autoregressive-with-exogenous design.

    Row t holds ``[u_t .. u_{t-l_u}]`` for each exogenous channel followed
    by ``[y_{t-1} .. y_{t-l_y}]``, with the target ``y_t`` aligned.  By
    default the exogenous channels are the raw U and Udot series; pass
    ``exogenous`` to override (e.g. to append a white-box force channel)
    and ``target_series`` to regress something other than a stored channel
    (e.g. white-box residuals).
    """
    if exogenous is None:
        exogenous = {"U": ds.U, "Udot": ds.Udot}
    if target_series is not None:
        y = np.asarray(target_series, dtype=float)
        if len(y) != len(ds):
            raise ShapeError("target_series length differs from dataset")
    else:
        y = getattr(ds, target)
    n = len(ds)
    m = spec.max_lag
    if n <= m:
        raise BoundsError(f"series of length {n} too short for max lag {m}")
    rows = []
    labels = []
    idx = np.arange(m, n)
    for name, ch in exogenous.items():
        ch = np.asarray(ch, dtype=float)
        for k in range(spec.l_u + 1):
            rows.append(ch[idx - k])
            labels.append(f"{name}[t-{k}]" if k else f"{name}[t]")
    for k in range(1, spec.l_y + 1):
        rows.append(y[idx - k])
        labels.append(f"y[t-{k}]")
    design = np.column_stack(rows) if rows else np.empty((len(idx), 0))
    return DesignMatrix(design, y[idx], tuple(labels), int(m))
