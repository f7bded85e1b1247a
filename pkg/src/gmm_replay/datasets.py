"""IDX ingestion and class-incremental task slicing.

Datasets arrive as the classic big-endian IDX container (optionally
gzipped). Images are flattened row-major and scaled into [0, 1]; labels
keep their original class indices so the read-out can allocate rows for
the full label space up front.
"""

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from gmm_replay import errors

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# Class partitions of the built-in class-incremental problems.  The two
# D20 problems are meant for EMNIST-balanced (47 classes); the rest for
# MNIST-like 10-class datasets.
CIL_PROBLEMS = {
    "D5-1^5A": [list(range(5)), [5], [6], [7], [8], [9]],
    "D5-1^5B": [list(range(5, 10)), [0], [1], [2], [3], [4]],
    "D7-1^3A": [list(range(7)), [7], [8], [9]],
    "D7-1^3B": [list(range(3, 10)), [0], [1], [2]],
    "D20-1^5A": [list(range(20)), [20], [21], [22], [23], [24]],
    "D20-1^5B": [list(range(5, 25)), [0], [1], [2], [3], [4]],
}


@dataclass
class ImageSet:
    """Flattened image batch with features in [0, 1]."""

    samples: np.ndarray  # (count, dim) float32

    @property
    def count(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]

    def validate(self):
        if self.samples.ndim != 2:
            raise errors.DimensionMismatch("samples must be 2-D (count, dim)")
        if self.samples.size and (self.samples.min() < 0.0 or self.samples.max() > 1.0):
            raise ValueError("features must lie in [0, 1]")
        return self


@dataclass
class LabelSet:
    """Per-sample class indices over a fixed label space."""

    labels: np.ndarray  # (count,) int64
    num_classes: int

    @property
    def count(self):
        return self.labels.shape[0]

    def validate(self):
        if self.labels.size and int(self.labels.max()) >= self.num_classes:
            raise ValueError("label exceeds num_classes")
        if self.labels.size and int(self.labels.min()) < 0:
            raise ValueError("negative label")
        return self


@dataclass
class CilProblem:
    """Named ordered partition of the class space into disjoint tasks."""

    name: str
    task_class_lists: list

    def validate(self):
        if len(self.task_class_lists) < 2:
            raise errors.EmptyTask("a CIL problem needs at least 2 tasks")
        seen = set()
        for classes in self.task_class_lists:
            if not classes:
                raise errors.EmptyTask("task with empty class list")
            overlap = seen.intersection(classes)
            if overlap:
                raise errors.OverlappingClasses(f"classes reused across tasks: {sorted(overlap)}")
            seen.update(classes)
        return self


@dataclass
class TaskStream:
    """Per-task train/test splits plus the union baseline test set."""

    problem: CilProblem
    tasks: list  # [(ImageSet, LabelSet), ...]
    test_tasks: list  # [(ImageSet, LabelSet), ...]
    baseline_test: tuple = field(default=None)  # (ImageSet, LabelSet)

    @property
    def num_tasks(self):
        return len(self.tasks)


def _open_maybe_gzip(path):
    with open(path, "rb") as f:
        head = f.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, expected_magic):
    try:
        f = _open_maybe_gzip(path)
    except OSError as exc:
        raise errors.GmmReplayError(f"cannot open {path}: {exc}") from exc
    with f:
        header = f.read(4)
        if len(header) < 4:
            raise errors.TruncatedPayload(f"{path}: missing magic")
        (magic,) = struct.unpack(">i", header)
        if magic != expected_magic:
            raise errors.WrongMagic(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
        ndim = magic & 0xFF
        dims_raw = f.read(4 * ndim)
        if len(dims_raw) < 4 * ndim:
            raise errors.TruncatedPayload(f"{path}: truncated dimension header")
        dims = struct.unpack(f">{ndim}i", dims_raw)
        total = int(np.prod(dims))
        payload = f.read(total)
        if len(payload) != total:
            raise errors.TruncatedPayload(
                f"{path}: header promises {total} bytes, got {len(payload)}"
            )
        return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx_images(path, transpose=False):
    """Load an IDX image file into an ImageSet with features in [0, 1].

    Args:
        path: IDX or gzipped IDX file with magic 0x00000803.
        transpose: swap the two image axes per sample. EMNIST source
            files store images transposed; pass True so they render
            upright.
    """
    raw = _read_idx(path, IMAGE_MAGIC)
    if transpose:
        raw = raw.transpose(0, 2, 1)
    samples = raw.reshape(raw.shape[0], -1).astype(np.float32) / 255.0
    return ImageSet(samples).validate()


def load_idx_labels(path):
    """Load an IDX label file; num_classes is max(label) + 1."""
    raw = _read_idx(path, LABEL_MAGIC)
    labels = raw.astype(np.int64)
    num_classes = int(labels.max()) + 1 if labels.size else 0
    return LabelSet(labels, num_classes).validate()


def save_idx_images(images, path):
    """Write an ImageSet back to IDX as 28x28 (or dim-derived) bytes."""
    side = int(round(np.sqrt(images.dim)))
    if side * side != images.dim:
        raise errors.DimensionMismatch(f"dim {images.dim} is not a square image")
    data = np.clip(np.rint(images.samples * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", IMAGE_MAGIC, images.count, side, side))
        f.write(data.tobytes())


def _subset(images, labels, classes):
    mask = np.isin(labels.labels, list(classes))
    return (
        ImageSet(images.samples[mask]),
        LabelSet(labels.labels[mask], labels.num_classes),
    )


def make_cil_problem(name, train, test, task_class_lists=None):
    """Slice a dataset into a class-incremental task stream.

    Args:
        name: one of the built-in problem names, or any identifier when
            task_class_lists is supplied.
        train: (ImageSet, LabelSet) training split.
        test: (ImageSet, LabelSet) test split.
        task_class_lists: optional explicit class partition overriding
            the built-in table.
    """
    if task_class_lists is None:
        if name not in CIL_PROBLEMS:
            raise errors.ConfigError(
                f"unknown CIL problem {name!r}; known: {sorted(CIL_PROBLEMS)}"
            )
        task_class_lists = CIL_PROBLEMS[name]
    problem = CilProblem(name, [list(c) for c in task_class_lists]).validate()

    train_x, train_y = train
    test_x, test_y = test
    present = set(np.unique(train_y.labels).tolist())
    tasks, test_tasks = [], []
    for classes in problem.task_class_lists:
        missing = set(classes) - present
        if missing:
            raise errors.UnknownClass(f"classes absent from dataset: {sorted(missing)}")
        tr = _subset(train_x, train_y, classes)
        te = _subset(test_x, test_y, classes)
        if tr[0].count == 0 or te[0].count == 0:
            raise errors.EmptyTask(f"no samples for classes {classes}")
        tasks.append(tr)
        test_tasks.append(te)

    base_x = ImageSet(np.concatenate([t[0].samples for t in test_tasks]))
    base_y = LabelSet(
        np.concatenate([t[1].labels for t in test_tasks]), test_y.num_classes
    )
    return TaskStream(problem, tasks, test_tasks, (base_x, base_y))


def merge_tasks(pairs):
    """Concatenate (ImageSet, LabelSet) pairs into one pair."""
    xs = ImageSet(np.concatenate([p[0].samples for p in pairs]))
    ys = LabelSet(
        np.concatenate([p[1].labels for p in pairs]), pairs[0][1].num_classes
    )
    return xs, ys
