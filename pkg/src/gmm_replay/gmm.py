"""Diagonal-covariance GMM trained by vanilla SGD with annealed,
grid-local component adaptation and plateau-driven early stopping.

Parameters are stored as float32 (the checkpoint unit); all density and
gradient math runs in float64. Weights are parameterized as a softmax
over logits and stddevs as exp(log_sd), so the simplex and positivity
constraints hold by construction.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from gmm_replay import errors, kernels

STDDEV_FLOOR = 0.01
LOG_STDDEV_FLOOR = math.log(STDDEV_FLOOR)
# Initial stddev: small enough that responsibilities are decisive from
# the first epochs (specialization stalls when the initial sigma is much
# wider than the per-cluster data scale), large enough that nearby
# samples still register on every component.
INIT_STDDEV = 0.15


@dataclass
class GmmParams:
    """Mixture parameters on a square component grid."""

    weight_logits: np.ndarray  # (K,) float32
    centroids: np.ndarray      # (K, D) float32
    log_stddevs: np.ndarray    # (K, D) float32
    grid_side: int

    @property
    def K(self):
        return self.weight_logits.shape[0]

    @property
    def dim(self):
        return self.centroids.shape[1]

    def weights(self):
        """Component weights pi_k (softmax of the logits)."""
        z = self.weight_logits.astype(np.float64)
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    def stddevs(self):
        return np.exp(self.log_stddevs.astype(np.float64))

    def copy(self):
        return GmmParams(
            self.weight_logits.copy(), self.centroids.copy(),
            self.log_stddevs.copy(), self.grid_side,
        )


@dataclass
class AnnealingState:
    """Annealing radius r with plateau-driven geometric decay."""

    r: float
    r0: float
    gamma: float
    r_min: float = 0.01
    plateau_window: int = 5
    plateau_delta: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if not self.r_min <= self.r <= self.r0:
            raise ValueError("need r_min <= r <= r0")


@dataclass
class TrainConfig:
    """SGD settings for one training run."""

    learning_rate: float = 0.05
    batch_size: int = 100
    max_epochs: int = 128
    rng_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass
class TrainingLog:
    """Per-epoch mean NLL and radius, plus the stopping outcome."""

    losses: list = field(default_factory=list)
    radii: list = field(default_factory=list)
    stop_epoch: int = 0
    stop_reason: str = "max_epochs"


def init_params(K, dim, seed, init_batch):
    """Initialize a K-component GMM from data samples.

    Centroids are drawn uniformly from init_batch (without replacement
    when it holds at least K samples); weights are uniform; stddevs
    start at INIT_STDDEV.  Seeding centroids on actual samples keeps the
    components distinct from the first epoch: starting them all at the
    data mean leaves the model in a permutation-symmetric state where
    every component receives an identical gradient and specialization
    never begins.
    """
    side = math.isqrt(K)
    if side * side != K:
        raise errors.NonSquareK(f"K={K} is not a perfect square")
    x = init_batch.samples
    if x.shape[0] == 0:
        raise errors.EmptyBatch("init_batch is empty")
    if x.shape[1] != dim:
        raise errors.DimensionMismatch(f"init_batch dim {x.shape[1]} != {dim}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(x.shape[0], size=K, replace=x.shape[0] < K)
    return GmmParams(
        weight_logits=np.zeros(K, dtype=np.float32),
        centroids=np.ascontiguousarray(x[idx], dtype=np.float32),
        log_stddevs=np.full((K, dim), math.log(INIT_STDDEV), dtype=np.float32),
        grid_side=side,
    )


def grid_coordinates(K):
    """2-D integer grid coordinates of the K components, row-major."""
    side = math.isqrt(K)
    if side * side != K:
        raise errors.NonSquareK(f"K={K} is not a perfect square")
    ij = np.indices((side, side)).reshape(2, -1).T
    return ij.astype(np.float64)


def smoothing_matrix(K, r):
    """Row-normalized Gaussian grid kernel; identity at r = 0."""
    if r < 0:
        raise ValueError("radius must be >= 0")
    if r == 0.0:
        return np.eye(K)
    coords = grid_coordinates(K)
    d2 = np.sum((coords[:, None, :] - coords[None, :, :]) ** 2, axis=2)
    w = np.exp(-d2 / (2.0 * r * r))
    return w / w.sum(axis=1, keepdims=True)


def _check_batch(params, x):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != params.dim:
        raise errors.DimensionMismatch(f"input dim {x.shape[1]} != {params.dim}")
    return x


def _log_joint(params, x):
    """(B, K) matrix log(pi_k) + log N_k(x_n)."""
    lcomp = kernels.component_log_densities(
        x, params.centroids.astype(np.float64), params.log_stddevs.astype(np.float64)
    )
    return lcomp + np.log(params.weights())


def batch_log_densities(params, batch_x):
    """Per-sample mixture log densities via log-sum-exp, shape (B,)."""
    lj = _log_joint(params, _check_batch(params, batch_x))
    m = lj.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(lj - m).sum(axis=1, keepdims=True))).ravel()


def log_density(params, x):
    """log p(x) of a single feature vector."""
    return float(batch_log_densities(params, x)[0])


def batch_loss(params, batch):
    """Mean negative log-likelihood of a batch (lower is better)."""
    x = getattr(batch, "samples", batch)
    if np.asarray(x).shape[0] == 0:
        raise errors.EmptyBatch("batch_loss on empty batch")
    return float(-batch_log_densities(params, x).mean())


def batch_responsibilities(params, batch_x):
    """(B, K) posterior component probabilities, rows sum to 1."""
    lj = _log_joint(params, _check_batch(params, batch_x))
    m = lj.max(axis=1, keepdims=True)
    e = np.exp(lj - m)
    return e / e.sum(axis=1, keepdims=True)


def responsibilities(params, x):
    """Posterior component probabilities of one sample, shape (K,)."""
    return batch_responsibilities(params, x)[0]


def smoothed_responsibilities(params, x, r):
    """Responsibilities spread over grid neighbors by a kernel of width r."""
    gamma = responsibilities(params, x)
    if r == 0.0:
        return gamma
    return smoothing_matrix(params.K, r) @ gamma


def loss_and_gradients(weight_logits, centroids, log_stddevs, batch_x, smooth=None):
    """Loss plus analytic gradients for all three parameter groups.

    Pure float64 function of raw arrays (finite-difference testable).
    When a smoothing matrix is given, the per-sample responsibilities in
    the gradient are replaced by their grid-smoothed counterparts; the
    returned loss is always the exact mean NLL.

    Returns:
        (loss, grad_logits, grad_centroids, grad_log_stddevs)
    """
    x = np.atleast_2d(np.asarray(batch_x, dtype=np.float64))
    if x.shape[0] == 0:
        raise errors.EmptyBatch("gradient on empty batch")
    logits = np.asarray(weight_logits, dtype=np.float64)
    mu = np.asarray(centroids, dtype=np.float64)
    log_sd = np.asarray(log_stddevs, dtype=np.float64)
    B = x.shape[0]

    z = logits - logits.max()
    pi = np.exp(z)
    pi /= pi.sum()

    lcomp = kernels.component_log_densities(x, mu, log_sd)
    lj = lcomp + np.log(pi)
    m = lj.max(axis=1, keepdims=True)
    e = np.exp(lj - m)
    esum = e.sum(axis=1, keepdims=True)
    loss = float(-(m.ravel() + np.log(esum.ravel())).mean())

    gamma = e / esum
    if smooth is not None:
        gamma = gamma @ smooth.T

    gsum, gx, gxx = kernels.weighted_moments(gamma, x)
    inv_var = np.exp(-2.0 * log_sd)
    grad_logits = -(gsum / B - pi * gamma.sum() / B)
    grad_mu = -(gx - gsum[:, None] * mu) * inv_var / B
    grad_log_sd = -((gxx - 2.0 * mu * gx + mu * mu * gsum[:, None]) * inv_var
                    - gsum[:, None]) / B
    return loss, grad_logits, grad_mu, grad_log_sd


def sgd_step(params, batch, learning_rate, r):
    """One SGD step on the batch loss with annealed (smoothed) adaptation.

    Returns new params; the stddev floor is re-applied after the step.
    """
    x = getattr(batch, "samples", batch)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        raise errors.EmptyBatch("sgd_step on empty batch")
    if x.shape[1] != params.dim:
        raise errors.DimensionMismatch(f"batch dim {x.shape[1]} != {params.dim}")
    smooth = None if r == 0.0 else smoothing_matrix(params.K, r)
    loss, g_logits, g_mu, g_lsd = loss_and_gradients(
        params.weight_logits, params.centroids, params.log_stddevs, x, smooth
    )
    if not (np.isfinite(g_logits).all() and np.isfinite(g_mu).all()
            and np.isfinite(g_lsd).all()):
        raise errors.NonFiniteGradient(f"non-finite gradient at loss {loss}")
    lr = learning_rate
    new = GmmParams(
        (params.weight_logits.astype(np.float64) - lr * g_logits).astype(np.float32),
        (params.centroids.astype(np.float64) - lr * g_mu).astype(np.float32),
        np.maximum(
            (params.log_stddevs.astype(np.float64) - lr * g_lsd),
            LOG_STDDEV_FLOOR,
        ).astype(np.float32),
        params.grid_side,
    )
    return new, loss


def _plateaued(losses, window, delta):
    """Relative loss improvement over the last `window` epochs < delta."""
    if len(losses) <= window:
        return False
    ref = losses[-window - 1]
    improvement = (ref - losses[-1]) / max(abs(ref), 1e-12)
    return improvement < delta


def anneal_update(state, losses):
    """Decay r geometrically by gamma per epoch, clamped at r_min.

    Time-driven decay is the only reading compatible with the stated
    budgets: gamma in (0.9, 0.96) cannot bring r from sqrt(0.125 K)
    down to r_min within 128 epochs if applied only on plateau events.
    """
    if not losses:
        raise ValueError("anneal_update needs a non-empty loss log")
    return replace(state, r=max(state.r_min, state.gamma * state.r))


def _shuffled_batches(x, batch_size):
    def make(rng):
        order = rng.permutation(x.shape[0])
        for start in range(0, x.shape[0], batch_size):
            yield x[order[start:start + batch_size]]
    return make


def fit_batches(params, config, annealing, make_epoch_batches):
    """SGD training loop over caller-supplied epoch batches.

    make_epoch_batches(rng) yields the mini-batches of one epoch; it is
    invoked once per epoch with the run's rng. Stops before max_epochs
    once the radius has reached r_min and the epoch loss has plateaued.
    Deterministic given config.rng_seed.

    Returns:
        (final GmmParams, TrainingLog)
    """
    rng = np.random.default_rng(config.rng_seed)
    state = replace(annealing)
    log = TrainingLog()
    for epoch in range(config.max_epochs):
        total, count = 0.0, 0
        try:
            for batch in make_epoch_batches(rng):
                params, loss = sgd_step(params, batch, config.learning_rate, state.r)
                total += loss * batch.shape[0]
                count += batch.shape[0]
        except errors.NonFiniteGradient:
            log.stop_epoch = epoch
            log.stop_reason = "non_finite_gradient"
            return params, log
        if count == 0:
            raise errors.EmptyBatch("epoch produced no batches")
        log.losses.append(total / count)
        log.radii.append(state.r)
        log.stop_epoch = epoch + 1
        at_floor = state.r <= state.r_min
        state = anneal_update(state, log.losses)
        if at_floor and _plateaued(log.losses, state.plateau_window, state.plateau_delta):
            log.stop_reason = "plateau"
            return params, log
    return params, log


def fit(params, data, config, annealing):
    """Shuffled mini-batch SGD with annealing and early stopping."""
    x = getattr(data, "samples", data)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        raise errors.EmptyBatch("fit on empty dataset")
    return fit_batches(params, config, annealing,
                       _shuffled_batches(x, config.batch_size))
