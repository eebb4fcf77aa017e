"""Two-stage multi-agent state fusion.

Per-agent Kalman-style local estimation with a learnable likelihood weight,
fused centrally through a robust time-series soft medoid. The heavy lifting
lives in the C++ extension; this package re-exports its surface.
"""

from lof._core import (
    GaussianBelief,
    LofError,
    bci_fuse,
    config_keys,
    episode_metrics,
    evolution_matrix,
    exact_likelihood,
    fusion_gain,
    js_divergence,
    log_pdf,
    mahalanobis,
    mixture_moments,
    mse_db,
    nll_loss,
    normalize_weights,
    pdf,
    process_noise_cov,
    soft_medoid_coeffs,
)

__all__ = [
    "GaussianBelief",
    "LofError",
    "bci_fuse",
    "config_keys",
    "episode_metrics",
    "evolution_matrix",
    "exact_likelihood",
    "fusion_gain",
    "js_divergence",
    "log_pdf",
    "mahalanobis",
    "mixture_moments",
    "mse_db",
    "nll_loss",
    "normalize_weights",
    "pdf",
    "process_noise_cov",
    "soft_medoid_coeffs",
]
