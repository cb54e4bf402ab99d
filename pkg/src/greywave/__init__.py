"""Grey-box wave loading prediction toolkit.

Combines a Bayesian-calibrated Morison's-equation white-box with GP and
GP-NARX black-box models, supporting residual-modelling and
input-augmentation grey-box compositions, Monte-Carlo uncertainty
propagation, ARX-based lag selection and coverage (extrapolation)
analysis.
"""

__version__ = "0.1.0"
