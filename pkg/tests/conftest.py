import numpy as np
import pytest

from greywave.dataset import (
    LagSpec,
    SyntheticConfig,
    TimeSeriesDataset,
    split_sequential,
    synthesize,
)

# coefficients of the reference ARX system used across the arx tests:
# F_t = 100 uu_t + 30 uu_{t-1} + 150 ud_t - 40 ud_{t-1}
#       + 0.4 F_{t-1} - 0.3 F_{t-2} + 0.2 F_{t-3} + noise
TRUE_ALPHA = np.array([100.0, 30.0, 150.0, -40.0])
TRUE_BETA = np.array([0.4, -0.3, 0.2])
TRUE_SPEC = LagSpec(1, 3)


def simulate_arx(n_points, noise_std=2.0, seed=0):
    """Kinematics from the synthetic generator driving a known ARX force."""
    base = synthesize(SyntheticConfig(n_points=n_points, seed=seed))
    uu = base.U * np.abs(base.U)
    ud = base.Udot
    rng = np.random.default_rng(seed + 1)
    eps = rng.normal(0.0, noise_std, size=n_points) if noise_std > 0 else np.zeros(n_points)
    F = np.zeros(n_points)
    for t in range(n_points):
        acc = TRUE_ALPHA[0] * uu[t] + TRUE_ALPHA[2] * ud[t]
        if t >= 1:
            acc += TRUE_ALPHA[1] * uu[t - 1] + TRUE_ALPHA[3] * ud[t - 1]
            acc += TRUE_BETA[0] * F[t - 1]
        if t >= 2:
            acc += TRUE_BETA[1] * F[t - 2]
        if t >= 3:
            acc += TRUE_BETA[2] * F[t - 3]
        F[t] = acc + eps[t]
    return TimeSeriesDataset(base.t, base.U, base.Udot, F, base.sample_rate_hz)


@pytest.fixture(scope="session")
def morison_clean():
    """Noise-free pure-Morison synthetic series."""
    return synthesize(SyntheticConfig(n_points=600, seed=11))


@pytest.fixture(scope="session")
def noisy_splits():
    """Train/val/test splits of a noisy series with a nonlinear residual."""
    cfg = SyntheticConfig(n_points=900, noise_std=3.0, residual="ar-nonlinear", seed=7)
    return split_sequential(synthesize(cfg), [300, 300, 300])
