"""The replay scholar: GMM generator plus linear read-out in one model.

The update loop for a new task: query the scholar with the new samples,
self-label the generated variants, re-train the GMM from its current
state on mixed real/generated mini-batches, then continue training the
read-out on the merged set. No access path to earlier raw data exists.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from gmm_replay import checkpoint, errors, gmm, readout, sampler
from gmm_replay.datasets import ImageSet, LabelSet

CONSTANT_TIME = "constant-time"
BALANCED = "balanced"


@dataclass
class ReplayPlan:
    """Mixing configuration for replay training."""

    strategy: str = CONSTANT_TIME
    batch_size: int = 100

    def __post_init__(self):
        if self.strategy not in (CONSTANT_TIME, BALANCED):
            raise errors.ConfigError(f"unknown strategy {self.strategy!r}")


@dataclass
class MixSpec:
    """Resolved per-task mixing numbers."""

    chi: float
    generate_count: int
    beta_g: int
    beta_r: int


def plan_mix(plan, task_index, d_i, seen_classes, new_classes):
    """Resolve the replay mix for task task_index (1-based, >= 2).

    Constant-time: chi = 1, generate exactly d_i samples, split the
    batch 50/50 (the real side gets the extra sample when the batch
    size is odd). Balanced: chi = seen/new, generate chi * d_i.
    """
    if task_index < 2:
        raise errors.InvalidRatio("replay mixing starts at task 2")
    beta = plan.batch_size
    if plan.strategy == CONSTANT_TIME:
        chi = 1.0
        generate_count = d_i
    else:
        if new_classes is None or new_classes < 1:
            raise errors.InvalidRatio("balanced plan needs >= 1 new class")
        if seen_classes is None or seen_classes < 0:
            raise errors.InvalidRatio("balanced plan needs the seen-class count")
        chi = seen_classes / new_classes
        generate_count = int(round(chi * d_i))
    if chi == 0:
        return MixSpec(0.0, 0, 0, beta)
    beta_g = int(round(beta * chi / (1.0 + chi)))
    beta_g = min(max(beta_g, 1), beta - 1)
    if plan.strategy == CONSTANT_TIME and beta % 2 == 1:
        beta_g = beta // 2  # real side gets the extra sample
    return MixSpec(chi, generate_count, beta_g, beta - beta_g)


@dataclass
class ScholarConfig:
    """Hyper-parameters of the scholar, fixed across all experiments."""

    K: int = 400
    num_classes: int = 10
    learning_rate: float = 0.05
    batch_size: int = 100
    epochs_init: int = 128
    epochs_replay: int = 256
    gamma_init: float = 0.96
    gamma_replay: float = 0.9
    r0_replay: float = 0.1
    r_min: float = 0.01
    top_s: int = 3
    rho: float = 1.0
    readout_epochs: int = 50
    rng_seed: int = 0

    @property
    def r0_init(self):
        return math.sqrt(0.125 * self.K)


@dataclass
class Scholar:
    """GMM + read-out with training state."""

    cfg: ScholarConfig
    gmm_params: gmm.GmmParams = None
    readout_weights: readout.ReadoutWeights = None
    stage: int = 0  # number of tasks trained on
    logs: list = field(default_factory=list)
    generated_count: int = 0  # variants generated for the latest task


def new_scholar(cfg):
    return Scholar(cfg=cfg)


def _train_cfg(cfg, max_epochs, seed_offset):
    return gmm.TrainConfig(
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        max_epochs=max_epochs,
        rng_seed=cfg.rng_seed + seed_offset,
    )


def _train_readout_on(scholar, images, labels, seed_offset):
    gammas = gmm.batch_responsibilities(scholar.gmm_params, images.samples)
    weights = scholar.readout_weights
    if weights is None:
        weights = readout.init_readout(scholar.cfg.num_classes, scholar.cfg.K)
    return readout.train_readout(
        weights, gammas, labels,
        learning_rate=scholar.cfg.learning_rate,
        epochs=scholar.cfg.readout_epochs,
        batch_size=scholar.cfg.batch_size,
        rng_seed=scholar.cfg.rng_seed + seed_offset,
    )


def initial_fit(scholar, task):
    """From-scratch fit on the first task (wide annealing radius)."""
    if scholar.stage != 0:
        raise errors.SecondInitialFit("scholar already initially fit")
    images, labels = task
    cfg = scholar.cfg
    params = gmm.init_params(cfg.K, images.dim, cfg.rng_seed, images)
    annealing = gmm.AnnealingState(
        r=cfg.r0_init, r0=cfg.r0_init, gamma=cfg.gamma_init, r_min=cfg.r_min
    )
    params, log = gmm.fit(params, images, _train_cfg(cfg, cfg.epochs_init, 0), annealing)
    out = replace(scholar, gmm_params=params, stage=1, logs=scholar.logs + [log])
    out.readout_weights = _train_readout_on(out, images, labels, seed_offset=1)
    return out


def _mixed_batches(real, gen, beta_r, beta_g):
    """Per-epoch batches with fixed real/generated composition."""
    def make(rng):
        r_order = rng.permutation(real.shape[0])
        g_order = rng.permutation(gen.shape[0])
        n_batches = max(
            -(-real.shape[0] // beta_r) if beta_r else 0,
            -(-gen.shape[0] // beta_g) if beta_g else 0,
        )
        for b in range(n_batches):
            parts = []
            if beta_r:
                parts.append(real[r_order[b * beta_r:(b + 1) * beta_r]])
            if beta_g:
                parts.append(gen[g_order[b * beta_g:(b + 1) * beta_g]])
            batch = np.concatenate([p for p in parts if p.shape[0]])
            if batch.shape[0]:
                yield batch
    return make


def adiabatic_update(scholar, new_task, plan, seen_classes=None):
    """Selective replay update on one new task.

    Generates variants by querying the current scholar with the new
    samples, labels them with the current read-out, re-fits the GMM
    from its current state with the narrow replay radius, and continues
    read-out training on the merged set.
    """
    if scholar.stage < 1:
        raise errors.NotInitialized("adiabatic_update before initial_fit")
    images, labels = new_task
    cfg = scholar.cfg
    task_index = scholar.stage + 1
    mix = plan_mix(
        plan, task_index, images.count,
        seen_classes, int(np.unique(labels.labels).size),
    )

    if mix.generate_count > 0:
        per_query = -(-mix.generate_count // images.count)
        variants = sampler.generate_variants(
            scholar.gmm_params, images,
            sampler.SamplerConfig(cfg.top_s, cfg.rho, cfg.rng_seed + task_index),
            count_per_query=per_query,
        )
        gen_x = variants.samples[:mix.generate_count]
        gen_gammas = gmm.batch_responsibilities(scholar.gmm_params, gen_x)
        gen_y = readout.predict_classes(scholar.readout_weights, gen_gammas)
    else:
        gen_x = np.empty((0, images.dim), dtype=np.float32)
        gen_y = np.empty(0, dtype=np.int64)

    annealing = gmm.AnnealingState(
        r=cfg.r0_replay, r0=cfg.r0_replay, gamma=cfg.gamma_replay, r_min=cfg.r_min
    )
    params, log = gmm.fit_batches(
        scholar.gmm_params,
        _train_cfg(cfg, cfg.epochs_replay, 2 * task_index),
        annealing,
        _mixed_batches(images.samples, gen_x, mix.beta_r, mix.beta_g),
    )
    out = replace(
        scholar, gmm_params=params, stage=task_index,
        logs=scholar.logs + [log], generated_count=int(gen_x.shape[0]),
    )
    merged_x = ImageSet(np.concatenate([images.samples, gen_x]).astype(np.float32))
    merged_y = LabelSet(
        np.concatenate([labels.labels, gen_y]), cfg.num_classes
    )
    out.readout_weights = _train_readout_on(
        out, merged_x, merged_y, seed_offset=2 * task_index + 1
    )
    return out


def classify_batch(scholar, batch_x):
    """Predicted class indices for a batch of feature vectors."""
    if scholar.stage < 1:
        raise errors.NotInitialized("classify before initial_fit")
    gammas = gmm.batch_responsibilities(scholar.gmm_params, batch_x)
    return readout.predict_classes(scholar.readout_weights, gammas)


def classify(scholar, x):
    """Predicted class of a single feature vector."""
    return int(classify_batch(scholar, np.atleast_2d(x))[0])


def save_scholar(scholar, path):
    cfg = scholar.cfg
    header = {
        "kind": "scholar",
        "K": cfg.K,
        "dim": scholar.gmm_params.dim,
        "grid_side": scholar.gmm_params.grid_side,
        "stddev_floor": gmm.STDDEV_FLOOR,
        "rng_seed": cfg.rng_seed,
        "num_classes": cfg.num_classes,
        "stage": scholar.stage,
        "top_s": cfg.top_s,
        "rho": cfg.rho,
        "config": {
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "epochs_init": cfg.epochs_init,
            "epochs_replay": cfg.epochs_replay,
            "gamma_init": cfg.gamma_init,
            "gamma_replay": cfg.gamma_replay,
            "r0_replay": cfg.r0_replay,
            "readout_epochs": cfg.readout_epochs,
        },
    }
    checkpoint.write_arrays(path, header, [
        ("weight_logits", scholar.gmm_params.weight_logits),
        ("centroids", scholar.gmm_params.centroids),
        ("log_stddevs", scholar.gmm_params.log_stddevs),
        ("readout", scholar.readout_weights.W),
    ])


def load_scholar(path):
    header, arrays = checkpoint.read_arrays(path)
    if header.get("kind") != "scholar":
        raise errors.CheckpointError(f"{path}: not a scholar checkpoint")
    c = header["config"]
    cfg = ScholarConfig(
        K=header["K"], num_classes=header["num_classes"],
        learning_rate=c["learning_rate"], batch_size=c["batch_size"],
        epochs_init=c["epochs_init"], epochs_replay=c["epochs_replay"],
        gamma_init=c["gamma_init"], gamma_replay=c["gamma_replay"],
        r0_replay=c["r0_replay"], top_s=header["top_s"], rho=header["rho"],
        readout_epochs=c["readout_epochs"], rng_seed=header["rng_seed"],
    )
    params = gmm.GmmParams(
        arrays["weight_logits"], arrays["centroids"], arrays["log_stddevs"],
        header["grid_side"],
    )
    return Scholar(
        cfg=cfg, gmm_params=params,
        readout_weights=readout.ReadoutWeights(arrays["readout"]),
        stage=header["stage"],
    )
