"""Model-assessment metrics: NMSE, MSLL, Welch power spectra, Pearson
correlation and cosine similarity of spectra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import BoundsError, DomainError, ShapeError


@dataclass(frozen=True)
class Spectrum:
    """One-sided power spectral density on an ascending frequency grid."""

    frequencies: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        p = np.asarray(self.power, dtype=float)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "power", p)
        if f.shape != p.shape:
            raise ShapeError("frequency and power grids must match")
        if np.any(np.diff(f) <= 0) or (len(f) and f[0] < 0):
            raise DomainError("frequencies must be non-negative ascending")
        if np.any(p < -1e-12):
            raise DomainError("power must be non-negative")


def _as_pair(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ShapeError("series must have equal length")
    return a, b


def nmse(y_true, y_pred) -> float:
    """Normalised mean square error in percent; 100 = predicting the mean.

    Uses the population variance of the true series so that a constant
    mean prediction scores exactly 100.
    """
    y, yp = _as_pair(y_true, y_pred)
    if len(y) < 2:
        raise DomainError("nmse requires at least 2 samples")
    var = float(np.var(y))
    if var == 0:
        raise DomainError("true series has zero variance")
    return float(100.0 / (len(y) * var) * np.sum((y - yp) ** 2))


def msll(y_true, pred_mean, pred_var, train_mean: float, train_var: float) -> float:
    """Mean standardised log loss against a train-mean/variance baseline."""
    y, m = _as_pair(y_true, pred_mean)
    _, v = _as_pair(y_true, pred_var)
    if np.any(v <= 0) or train_var <= 0:
        raise DomainError("variances must be positive")
    model_nll = 0.5 * (np.log(2 * np.pi * v) + (y - m) ** 2 / v)
    base_nll = 0.5 * (np.log(2 * np.pi * train_var) + (y - train_mean) ** 2 / train_var)
    return float(np.mean(model_nll - base_nll))


def welch_psd(x, sample_rate_hz: float, n_windows: int = 16) -> Spectrum:
    """Welch PSD: equal non-overlapping Hamming-windowed segments.

    The signal is truncated to a multiple of the segment length; one-sided
    density scaling with the standard window-power correction.
    """
    x = np.asarray(x, dtype=float).ravel()
    if len(x) < n_windows:
        raise BoundsError(f"signal of length {len(x)} too short for {n_windows} windows")
    nper = len(x) // n_windows
    f, p = signal.welch(
        x[: nper * n_windows],
        fs=sample_rate_hz,
        window="hamming",
        nperseg=nper,
        noverlap=0,
        detrend=False,
        scaling="density",
    )
    return Spectrum(f, p)


def pearson(A, B) -> float:
    """Product-moment correlation coefficient."""
    a, b = _as_pair(A, B)
    if len(a) < 2:
        raise DomainError("pearson requires at least 2 samples")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DomainError("pearson is undefined for constant input")
    n = len(a)
    num = n * np.sum(a * b) - np.sum(a) * np.sum(b)
    den = np.sqrt(n * np.sum(a**2) - np.sum(a) ** 2) * np.sqrt(
        n * np.sum(b**2) - np.sum(b) ** 2
    )
    return float(num / den)


def cosine_similarity(A, B) -> float:
    a, b = _as_pair(A, B)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DomainError("cosine similarity is undefined for a zero vector")
    return float(a @ b / (na * nb))


_CHANNELS = ("U", "Udot", "F")


def spectra_comparison(datasets: dict, n_windows: int = 16) -> list:
    """Pairwise spectral similarity per channel across named datasets.

    Computes a Welch spectrum per channel per dataset on a shared segment
    length (derived from the shortest dataset), then Pearson correlation
    and cosine similarity of the power values for every dataset pair.
    Returns rows of (name_a, name_b, channel, pearson, cosine).
    """
    if len(datasets) < 2:
        raise DomainError("at least 2 datasets are required")
    names = list(datasets)
    min_len = min(len(ds) for ds in datasets.values())
    nper = min_len // n_windows
    if nper < 2:
        raise BoundsError("datasets too short for the requested window count")
    spectra = {}
    for name, ds in datasets.items():
        for ch in _CHANNELS:
            x = getattr(ds, ch)
            # trim every dataset to the shared segment grid
            spectra[(name, ch)] = welch_psd(
                x[: nper * n_windows], ds.sample_rate_hz, n_windows
            )
    rows = []
    for i, na in enumerate(names):
        for nb in names[i:]:
            for ch in _CHANNELS:
                pa = spectra[(na, ch)].power
                pb = spectra[(nb, ch)].power
                rows.append((na, nb, ch, pearson(pa, pb), cosine_similarity(pa, pb)))
    return rows
