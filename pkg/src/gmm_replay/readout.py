"""Bias-free linear read-out on GMM responsibilities.

Trained by mini-batch SGD on an MSE loss against one-hot targets, fully
independent of the GMM parameters.
"""

from dataclasses import dataclass

import numpy as np

from gmm_replay import errors


@dataclass
class ReadoutWeights:
    """num_classes x K weight matrix (no bias)."""

    W: np.ndarray  # float32

    @property
    def num_classes(self):
        return self.W.shape[0]

    @property
    def K(self):
        return self.W.shape[1]

    def copy(self):
        return ReadoutWeights(self.W.copy())


def init_readout(num_classes, K):
    return ReadoutWeights(np.zeros((num_classes, K), dtype=np.float32))


def predict_scores(weights, gammas):
    """Scores W @ gamma for a (B, K) batch of responsibilities."""
    gammas = np.atleast_2d(np.asarray(gammas, dtype=np.float64))
    if gammas.shape[1] != weights.K:
        raise errors.DimensionMismatch(f"gamma dim {gammas.shape[1]} != K={weights.K}")
    return gammas @ weights.W.astype(np.float64).T


def predict(weights, gamma):
    """(scores, argmax class) for one responsibility vector.

    Ties resolve to the lowest class index (np.argmax convention).
    """
    scores = predict_scores(weights, gamma)[0]
    return scores, int(np.argmax(scores))


def predict_classes(weights, gammas):
    """Argmax classes for a batch of responsibility vectors."""
    return np.argmax(predict_scores(weights, gammas), axis=1)


def mse_loss_and_gradient(W, gammas, targets):
    """Mean squared error against one-hot targets and its gradient in W.

    Pure float64 function of raw arrays (finite-difference testable).
    Loss is (1/B) * sum_n ||W gamma_n - onehot(y_n)||^2.
    """
    W = np.asarray(W, dtype=np.float64)
    gammas = np.asarray(gammas, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    B = gammas.shape[0]
    if B == 0:
        raise errors.EmptyBatch("empty readout batch")
    err = gammas @ W.T - targets  # (B, C)
    loss = float((err * err).sum() / B)
    grad = 2.0 * err.T @ gammas / B
    return loss, grad


def train_readout(weights, gammas, labels, learning_rate=0.05, epochs=1,
                  batch_size=100, rng_seed=0):
    """Mini-batch SGD on the MSE read-out loss.

    Args:
        weights: starting ReadoutWeights (not mutated).
        gammas: (N, K) responsibility vectors.
        labels: LabelSet (or plain int array) aligned with gammas.
        epochs: full passes over the data; 0 returns weights unchanged.
    """
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    y = np.asarray(getattr(labels, "labels", labels))
    gammas = np.asarray(gammas, dtype=np.float64)
    if gammas.shape[0] == 0:
        raise errors.EmptyBatch("no training samples for readout")
    if gammas.shape[0] != y.shape[0]:
        raise errors.LengthMismatch("gammas and labels misaligned")
    if gammas.shape[1] != weights.K:
        raise errors.DimensionMismatch(f"gamma dim {gammas.shape[1]} != K={weights.K}")
    targets = np.zeros((y.shape[0], weights.num_classes))
    targets[np.arange(y.shape[0]), y] = 1.0

    W = weights.W.astype(np.float64)
    rng = np.random.default_rng(rng_seed)
    n = gammas.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, grad = mse_loss_and_gradient(W, gammas[idx], targets[idx])
            W = W - learning_rate * grad
    return ReadoutWeights(W.astype(np.float32))
