"""Accuracy matrices, forgetting, and backward transfer.

The accuracy matrix holds alpha[i][j]: accuracy on test task i after
training stage j (defined for i <= j), plus a baseline row measured on
the union test set after every stage. Forgetting of task i at stage t
is the running-peak accuracy over stages i..t-1 minus the accuracy at
t; backward transfer is its negation.
"""

import csv
from dataclasses import dataclass

import numpy as np

from gmm_replay import errors


@dataclass
class AccuracyMatrix:
    """Upper-triangular per-task accuracies plus baseline row."""

    entries: np.ndarray   # (T, T) float, NaN below the diagonal
    baseline: np.ndarray  # (T,) accuracy on the union test set per stage

    @property
    def T(self):
        return self.entries.shape[0]

    def alpha(self, i, j):
        """Accuracy on task i after stage j (1-based, i <= j)."""
        if not 1 <= i <= j <= self.T:
            raise errors.StageOutOfRange(f"alpha({i},{j}) outside triangle")
        return float(self.entries[i - 1, j - 1])

    @property
    def alpha_init(self):
        return self.alpha(1, 1)

    @property
    def alpha_init_final(self):
        return self.alpha(1, self.T)

    @property
    def alpha_base_final(self):
        return float(self.baseline[-1])


@dataclass
class ForgettingReport:
    """Per-task and average forgetting at one stage."""

    stage: int
    per_task: np.ndarray  # (stage - 1,) forgetting of tasks 1..stage-1
    average: float

    @property
    def backward_transfer(self):
        return -self.per_task


def accuracy(predictions, labels):
    """Fraction of exact matches between predictions and labels."""
    predictions = np.asarray(predictions)
    y = np.asarray(getattr(labels, "labels", labels))
    if predictions.shape[0] != y.shape[0]:
        raise errors.LengthMismatch(
            f"{predictions.shape[0]} predictions vs {y.shape[0]} labels"
        )
    return float(np.mean(predictions == y))


def forgetting(matrix, t=None):
    """Forgetting of every earlier task at stage t (default: final stage).

    F_i^t = max_{l in i..t-1} alpha[i][l] - alpha[i][t]; the average
    runs over the t-1 earlier tasks. Negative values indicate backward
    transfer.
    """
    if t is None:
        t = matrix.T
    if not 2 <= t <= matrix.T:
        raise errors.StageOutOfRange(f"stage {t} outside [2, {matrix.T}]")
    per_task = np.empty(t - 1)
    for i in range(1, t):
        peak = max(matrix.alpha(i, l) for l in range(i, t))
        per_task[i - 1] = peak - matrix.alpha(i, t)
    return ForgettingReport(t, per_task, float(per_task.mean()))


def assemble_matrix(rows, baseline):
    """Build an AccuracyMatrix from per-stage accuracy rows.

    Args:
        rows: rows[j] lists accuracies on tasks 1..j+1 after stage j+1.
        baseline: per-stage accuracy on the union test set.
    """
    T = len(rows)
    if len(baseline) != T:
        raise errors.IncompleteRecord("baseline length != stage count")
    entries = np.full((T, T), np.nan)
    for j, row in enumerate(rows):
        if len(row) != j + 1:
            raise errors.IncompleteRecord(
                f"stage {j + 1} row has {len(row)} entries, expected {j + 1}"
            )
        entries[: j + 1, j] = row
    return AccuracyMatrix(entries, np.asarray(baseline, dtype=float))


def mean_matrix(matrices):
    """Entrywise mean of accuracy matrices (e.g. across seeds)."""
    if not matrices:
        raise errors.IncompleteRecord("no matrices to average")
    entries = np.mean([m.entries for m in matrices], axis=0)
    baseline = np.mean([m.baseline for m in matrices], axis=0)
    return AccuracyMatrix(entries, baseline)


def write_matrix_csv(matrix, path):
    """CSV layout: header `task,T1..Tn`, one row per task, `Tbase` last."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["task"] + [f"T{j}" for j in range(1, matrix.T + 1)])
        for i in range(matrix.T):
            row = [f"T{i + 1}"]
            for j in range(matrix.T):
                v = matrix.entries[i, j]
                row.append("" if np.isnan(v) else f"{v:.6f}")
            w.writerow(row)
        w.writerow(["Tbase"] + [f"{v:.6f}" for v in matrix.baseline])


def read_matrix_csv(path):
    """Inverse of write_matrix_csv."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    T = len(header) - 1
    entries = np.full((T, T), np.nan)
    baseline = None
    for row in body:
        if row[0] == "Tbase":
            baseline = np.array([float(v) for v in row[1:]])
        else:
            i = int(row[0][1:]) - 1
            for j, v in enumerate(row[1:]):
                if v:
                    entries[i, j] = float(v)
    if baseline is None:
        raise errors.IncompleteRecord(f"{path}: missing Tbase row")
    return AccuracyMatrix(entries, baseline)
