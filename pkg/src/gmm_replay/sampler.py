"""Query-conditioned variant generation from a fitted GMM.

A query sample is turned into responsibilities, restricted to its top-S
components, and used as a multinomial over components from which
Gaussian samples are drawn. Generated features are clamped to [0, 1].
"""

from dataclasses import dataclass

import numpy as np

from gmm_replay import errors, gmm
from gmm_replay.datasets import ImageSet

SIMPLEX_ATOL = 1e-6


@dataclass
class SamplerConfig:
    """Top-S cutoff and normalization exponent for component selection."""

    top_s: int = 3
    rho: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.top_s < 1:
            raise errors.SOutOfRange("top_s must be >= 1")
        if self.rho <= 0:
            raise ValueError("rho must be positive")


def _check_simplex(dist):
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 1 or dist.size == 0:
        raise errors.InvalidSimplex("distribution must be a non-empty vector")
    if (dist < 0).any() or abs(dist.sum() - 1.0) > SIMPLEX_ATOL:
        raise errors.InvalidSimplex("entries must be >= 0 and sum to 1")
    return dist


def top_s_select(gamma, s, rho=1.0):
    """Restrict a simplex to its S largest entries and renormalize.

    Ties are broken toward lower component indices; each kept entry is
    raised to the power rho before renormalization (rho = 1 keeps the
    relative proportions unchanged).
    """
    gamma = _check_simplex(gamma)
    if not 1 <= s <= gamma.size:
        raise errors.SOutOfRange(f"S={s} outside [1, {gamma.size}]")
    # stable sort on (-gamma) keeps lower indices first among ties
    keep = np.argsort(-gamma, kind="stable")[:s]
    out = np.zeros_like(gamma)
    out[keep] = gamma[keep] ** rho
    total = out.sum()
    if total <= 0:
        raise errors.InvalidSimplex("selected entries have zero mass")
    return out / total


def draw_component(dist, rng):
    """Draw one component index from a (possibly sparse) simplex."""
    dist = _check_simplex(dist)
    return int(rng.choice(dist.size, p=dist))


def sample_component(params, k, rng):
    """Draw one sample from component k, clamped to the [0, 1] domain."""
    if not 0 <= k < params.K:
        raise errors.IndexOutOfRange(f"component {k} outside [0, {params.K})")
    mu = params.centroids[k].astype(np.float64)
    sd = np.exp(params.log_stddevs[k].astype(np.float64))
    z = rng.standard_normal(params.dim)
    return np.clip(mu + sd * z, 0.0, 1.0)


def generate_variants(params, queries, cfg, count_per_query=1, return_components=False):
    """Generate count_per_query variants for each query sample.

    Each query owns a derived rng stream (base seed + query index) so
    generation is deterministic and order-independent across queries.
    """
    if queries.count == 0:
        raise errors.EmptyBatch("no query samples")
    if count_per_query < 1:
        raise ValueError("count_per_query must be >= 1")
    gammas = gmm.batch_responsibilities(params, queries.samples)
    out = np.empty((queries.count * count_per_query, params.dim), dtype=np.float32)
    drawn = np.empty(queries.count * count_per_query, dtype=np.int64)
    for i in range(queries.count):
        rng = np.random.default_rng((cfg.rng_seed, i))
        dist = top_s_select(gammas[i], min(cfg.top_s, params.K), cfg.rho)
        for j in range(count_per_query):
            k = draw_component(dist, rng)
            pos = i * count_per_query + j
            out[pos] = sample_component(params, k, rng)
            drawn[pos] = k
    variants = ImageSet(out)
    if return_components:
        return variants, drawn
    return variants
