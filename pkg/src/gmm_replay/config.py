"""Run configuration: a flat JSON key/value file with schema versioning.

An empty-override config reproduces the reference hyper-parameter
setting (K=400, lr 0.05, batch 100, 128/256 epoch budgets, gamma
0.96/0.9, r0 rules, S=3, rho=1.0, constant-time mixing, seeds 0..9).
The "desk" profile shrinks the model and budgets for CI-scale runs.
"""

import json
import math
import os
from dataclasses import dataclass, field, fields

import numpy as np

from gmm_replay import datasets, scholar
from gmm_replay.errors import ConfigError

SCHEMA_VERSION = 1

DESK_OVERRIDES = {
    "K": 100,
    "epochs_init": 32,
    "epochs_replay": 64,
    "data_fraction": 0.2,
}


@dataclass
class RunConfig:
    """Everything one experiment needs; defaults mirror the reference setup."""

    problem: str = "D5-1^5A"
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    transpose_images: bool = False  # EMNIST source files are transposed
    num_classes: int = 0            # 0: infer from the label files

    K: int = 400
    learning_rate: float = 0.05
    batch_size: int = 100
    epochs_init: int = 128
    epochs_replay: int = 256
    gamma_init: float = 0.96
    gamma_replay: float = 0.9
    r0_replay: float = 0.1
    top_s: int = 3
    rho: float = 1.0
    readout_epochs: int = 50

    strategy: str = scholar.CONSTANT_TIME
    seeds: list = field(default_factory=lambda: list(range(10)))
    profile: str = "full"
    data_fraction: float = 1.0
    task_classes: list = None  # optional explicit partition
    out_dir: str = "runs"

    def scholar_config(self, num_classes):
        return scholar.ScholarConfig(
            K=self.K, num_classes=num_classes,
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            epochs_init=self.epochs_init, epochs_replay=self.epochs_replay,
            gamma_init=self.gamma_init, gamma_replay=self.gamma_replay,
            r0_replay=self.r0_replay, top_s=self.top_s, rho=self.rho,
            readout_epochs=self.readout_epochs,
        )


def load_config(path, profile=None):
    """Load and validate a JSON config file.

    Args:
        path: config file path.
        profile: optional override of the file's profile field.
    """
    try:
        with open(path) as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    version = raw.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version {version} unsupported")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    cfg = RunConfig(**raw)
    if profile:
        cfg.profile = profile
    if cfg.profile not in ("full", "desk"):
        raise ConfigError(f"profile must be 'full' or 'desk', got {cfg.profile!r}")
    if cfg.profile == "desk":
        for key, value in DESK_OVERRIDES.items():
            if key not in raw:  # explicit file values win over the profile
                setattr(cfg, key, value)
    validate_config(cfg, path)
    return cfg


def validate_config(cfg, path="config"):
    side = math.isqrt(cfg.K)
    if side * side != cfg.K:
        raise ConfigError(f"{path}: K={cfg.K} is not a perfect square")
    if cfg.task_classes is None and cfg.problem not in datasets.CIL_PROBLEMS:
        raise ConfigError(
            f"{path}: unknown problem {cfg.problem!r}; "
            f"valid names: {sorted(datasets.CIL_PROBLEMS)}"
        )
    if not 0.0 < cfg.data_fraction <= 1.0:
        raise ConfigError(f"{path}: data_fraction must be in (0, 1]")
    for key in ("train_images", "train_labels", "test_images", "test_labels"):
        p = getattr(cfg, key)
        if not p:
            raise ConfigError(f"{path}: missing dataset path {key!r}")
        if not os.path.exists(p):
            raise ConfigError(f"{path}: {key} file not found: {p}")


def _subsample(images, labels, fraction, seed):
    if fraction >= 1.0:
        return images, labels
    rng = np.random.default_rng(seed)
    n = images.count
    keep = np.sort(rng.choice(n, size=max(1, int(round(n * fraction))), replace=False))
    return (
        datasets.ImageSet(images.samples[keep]),
        datasets.LabelSet(labels.labels[keep], labels.num_classes),
    )


def load_stream(cfg, subsample_seed=12345):
    """Load the dataset named by the config and slice the task stream."""
    train_x = datasets.load_idx_images(cfg.train_images, transpose=cfg.transpose_images)
    train_y = datasets.load_idx_labels(cfg.train_labels)
    test_x = datasets.load_idx_images(cfg.test_images, transpose=cfg.transpose_images)
    test_y = datasets.load_idx_labels(cfg.test_labels)
    if cfg.num_classes:
        train_y.num_classes = cfg.num_classes
        test_y.num_classes = cfg.num_classes
    else:
        n = max(train_y.num_classes, test_y.num_classes)
        train_y.num_classes = test_y.num_classes = n
    train_x, train_y = _subsample(train_x, train_y, cfg.data_fraction, subsample_seed)
    return datasets.make_cil_problem(
        cfg.problem, (train_x, train_y), (test_x, test_y), cfg.task_classes
    )
