import os
import struct

import numpy as np
import pytest

from gmm_replay.datasets import ImageSet, LabelSet

DATA_DIR = os.environ.get("GMM_REPLAY_DATA", os.path.join(os.path.dirname(__file__), "..", "data"))

# Common file-name variants for the IDX files of each dataset.
_IDX_NAMES = {
    ("mnist", "train-images"): ["train-images-idx3-ubyte"],
    ("mnist", "train-labels"): ["train-labels-idx1-ubyte"],
    ("mnist", "test-images"): ["t10k-images-idx3-ubyte"],
    ("mnist", "test-labels"): ["t10k-labels-idx1-ubyte"],
    ("fashion", "train-images"): ["train-images-idx3-ubyte"],
    ("fashion", "train-labels"): ["train-labels-idx1-ubyte"],
    ("fashion", "test-images"): ["t10k-images-idx3-ubyte"],
    ("fashion", "test-labels"): ["t10k-labels-idx1-ubyte"],
    ("emnist", "train-images"): ["emnist-balanced-train-images-idx3-ubyte"],
    ("emnist", "train-labels"): ["emnist-balanced-train-labels-idx1-ubyte"],
    ("emnist", "test-images"): ["emnist-balanced-test-images-idx3-ubyte"],
    ("emnist", "test-labels"): ["emnist-balanced-test-labels-idx1-ubyte"],
}


def find_idx(dataset, part):
    for name in _IDX_NAMES[(dataset, part)]:
        for candidate in (
            os.path.join(DATA_DIR, dataset, name),
            os.path.join(DATA_DIR, dataset, name + ".gz"),
            os.path.join(DATA_DIR, name),
            os.path.join(DATA_DIR, name + ".gz"),
        ):
            if os.path.exists(candidate):
                return candidate
    return None


def dataset_paths(dataset):
    """All four IDX paths of a dataset, or None if any is missing."""
    parts = ["train-images", "train-labels", "test-images", "test-labels"]
    paths = {p: find_idx(dataset, p) for p in parts}
    if any(v is None for v in paths.values()):
        return None
    return paths


def require_dataset(dataset):
    paths = dataset_paths(dataset)
    if paths is None:
        pytest.skip(
            f"{dataset} IDX files not found under {os.path.abspath(DATA_DIR)} "
            "(set GMM_REPLAY_DATA); datasets are not downloaded automatically"
        )
    return paths


def make_clusters(centers, sigma, per_cluster, seed, clip=None):
    """Isotropic Gaussian clusters; returns (ImageSet, LabelSet)."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for label, center in enumerate(centers):
        pts = rng.normal(center, sigma, size=(per_cluster, len(center)))
        xs.append(pts)
        ys.append(np.full(per_cluster, label))
    x = np.concatenate(xs)
    if clip is not None:
        x = np.clip(x, *clip)
    order = rng.permutation(x.shape[0])
    return (
        ImageSet(x[order].astype(np.float32)),
        LabelSet(np.concatenate(ys)[order], len(centers)),
    )


THREE_CLUSTER_CENTERS = ((0.2, 0.2), (0.8, 0.2), (0.2, 0.8))
THREE_CLUSTER_SIGMA = 0.05


def three_cluster_toy(seed=0):
    """The reference 2-D toy: three well-separated clusters in [0,1]^2.

    Features stay in the unit square because generated samples are
    clamped to the [0,1] feature domain.
    """
    return make_clusters(
        THREE_CLUSTER_CENTERS, THREE_CLUSTER_SIGMA, 100, seed, clip=(0.0, 1.0)
    )


def write_idx_images(path, pixels):
    """pixels: (n, side, side) uint8."""
    n, r, c = pixels.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", 0x00000803, n, r, c))
        f.write(pixels.tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", 0x00000801, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


def blob_image_dataset(n_per_class=60, side=8, seed=0):
    """Tiny image-like dataset: 4 classes, each a bright blob in one corner."""
    rng = np.random.default_rng(seed)
    corners = [(1, 1), (1, side - 3), (side - 3, 1), (side - 3, side - 3)]
    images, labels = [], []
    for label, (r, c) in enumerate(corners):
        for _ in range(n_per_class):
            img = rng.integers(0, 30, size=(side, side), dtype=np.uint8)
            img[r:r + 2, c:c + 2] = rng.integers(200, 255, size=(2, 2))
            images.append(img)
            labels.append(label)
    order = rng.permutation(len(images))
    pixels = np.stack(images)[order]
    return pixels, np.asarray(labels, dtype=np.uint8)[order]
