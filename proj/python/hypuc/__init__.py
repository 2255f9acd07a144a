"""Heteroscedastic regression with density-weighted training, calibrated
uncertainty, a boosted decision layer and entropy-based filtering.

The heavy lifting happens in the compiled ``_hypuc`` extension; this package
re-exports it.
"""

from ._hypuc import (
    Calibration,
    ConfigError,
    Forest,
    HypucError,
    NumericError,
    auc,
    bin_scale,
    default_config,
    entropy,
    fit_calibration,
    gaussian_nll,
    generate_synthetic,
    global_scale,
    interval_coverage,
    kde_density,
    kde_weights,
    loss,
    pearson,
    quantile,
    run,
    spearman,
    train_gbdt,
    uce,
)

__version__ = "0.1.0"

__all__ = [
    "Calibration",
    "ConfigError",
    "Forest",
    "HypucError",
    "NumericError",
    "auc",
    "bin_scale",
    "default_config",
    "entropy",
    "fit_calibration",
    "gaussian_nll",
    "generate_synthetic",
    "global_scale",
    "interval_coverage",
    "kde_density",
    "kde_weights",
    "loss",
    "pearson",
    "quantile",
    "run",
    "spearman",
    "train_gbdt",
    "uce",
]
