"""Pure-numpy implementations of the hot GMM kernels.

Used as the fallback when the compiled extension is unavailable, and as
the reference the compiled kernels are tested against.
"""

import numpy as np

BACKEND = "numpy"

_LOG_2PI = float(np.log(2.0 * np.pi))


def component_log_densities(x, mu, log_sd):
    """Per-sample, per-component diagonal-Gaussian log densities.

    Args:
        x: (B, D) batch of feature vectors.
        mu: (K, D) centroids.
        log_sd: (K, D) log standard deviations.

    Returns:
        (B, K) matrix with entries log N(x_n; mu_k, diag(sd_k^2)).
    """
    x = np.asarray(x, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    log_sd = np.asarray(log_sd, dtype=np.float64)
    inv_var = np.exp(-2.0 * log_sd)                      # (K, D)
    # (x - mu)^2 / var expanded into three BLAS products.
    quad = (
        (x * x) @ inv_var.T
        - 2.0 * (x @ (mu * inv_var).T)
        + np.sum(mu * mu * inv_var, axis=1)
    )
    const = np.sum(log_sd, axis=1) + 0.5 * x.shape[1] * _LOG_2PI
    return -0.5 * quad - const


def weighted_moments(gamma, x):
    """Responsibility-weighted batch statistics for the gradient step.

    Args:
        gamma: (B, K) nonnegative per-sample component weights.
        x: (B, D) batch.

    Returns:
        Tuple (gsum, gx, gxx): per-component weight totals (K,),
        weighted sums of x (K, D) and of x^2 (K, D).
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    gsum = gamma.sum(axis=0)
    gx = gamma.T @ x
    gxx = gamma.T @ (x * x)
    return gsum, gx, gxx
