"""Full class-incremental experiment drivers.

run_cil trains through a task stream (initial fit, then one replay
update per task), evaluating after every stage on all seen test tasks
and the union baseline set. Constant-time replay asserts in-run that
the number of generated samples at task i equals that task's size.
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from gmm_replay import errors, gmm, metrics, scholar as scholar_mod
from gmm_replay.datasets import merge_tasks


@dataclass
class RunRecord:
    """Everything one seeded run produced."""

    problem: str
    seed: int
    accuracy_rows: list = field(default_factory=list)   # rows[j]: tasks 1..j+1
    baseline_accuracies: list = field(default_factory=list)
    generated_counts: list = field(default_factory=list)  # per task >= 2
    task_sizes: list = field(default_factory=list)
    loss_curves: list = field(default_factory=list)
    stage_seconds: list = field(default_factory=list)
    failure: str = ""

    def to_json(self):
        return json.dumps({
            "problem": self.problem,
            "seed": self.seed,
            "accuracy_rows": self.accuracy_rows,
            "baseline_accuracies": self.baseline_accuracies,
            "generated_counts": self.generated_counts,
            "task_sizes": self.task_sizes,
            "loss_curves": self.loss_curves,
            "stage_seconds": self.stage_seconds,
            "failure": self.failure,
        }, indent=2)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _evaluate_stage(model, stream, stage):
    row = []
    for i in range(stage):
        x, y = stream.test_tasks[i]
        row.append(metrics.accuracy(scholar_mod.classify_batch(model, x.samples), y))
    bx, by = stream.baseline_test
    base = metrics.accuracy(scholar_mod.classify_batch(model, bx.samples), by)
    return row, base


def run_cil(stream, cfg, plan, seed, progress=None):
    """One full CIL run; returns (RunRecord, final Scholar).

    On failure mid-stream the partial record carries a failure marker.
    """
    if stream.num_tasks < 2:
        raise errors.ConfigError("a CIL run needs at least 2 tasks")
    from dataclasses import replace
    cfg = replace(cfg, rng_seed=seed)
    record = RunRecord(problem=stream.problem.name, seed=seed)
    record.task_sizes = [t[0].count for t in stream.tasks]
    model = scholar_mod.new_scholar(cfg)
    seen_classes = 0
    try:
        for stage in range(1, stream.num_tasks + 1):
            t0 = time.perf_counter()
            task = stream.tasks[stage - 1]
            if stage == 1:
                model = scholar_mod.initial_fit(model, task)
            else:
                model = scholar_mod.adiabatic_update(
                    model, task, plan, seen_classes=seen_classes
                )
                record.generated_counts.append(model.generated_count)
                if plan.strategy == scholar_mod.CONSTANT_TIME:
                    assert model.generated_count == task[0].count, (
                        "constant-time contract violated: "
                        f"{model.generated_count} != {task[0].count}"
                    )
            seen_classes += len(stream.problem.task_class_lists[stage - 1])
            row, base = _evaluate_stage(model, stream, stage)
            record.accuracy_rows.append(row)
            record.baseline_accuracies.append(base)
            record.loss_curves.append(list(model.logs[-1].losses))
            record.stage_seconds.append(time.perf_counter() - t0)
            if progress:
                progress(stage, row, base)
    except errors.GmmReplayError as exc:
        record.failure = f"{type(exc).__name__}: {exc}"
    return record, model


def offline_baseline(stream, cfg, seed):
    """Joint training on the union of all tasks; returns (accuracy, model)."""
    from dataclasses import replace
    cfg = replace(cfg, rng_seed=seed)
    joint = merge_tasks(stream.tasks)
    model = scholar_mod.initial_fit(scholar_mod.new_scholar(cfg), joint)
    bx, by = stream.baseline_test
    acc = metrics.accuracy(scholar_mod.classify_batch(model, bx.samples), by)
    return acc, model


def task_similarity_probe(model, future_tasks):
    """Mean NLL of each future task's samples under the frozen GMM."""
    if model.stage < 1:
        raise errors.NotInitialized("probe before initial_fit")
    return [
        gmm.batch_loss(model.gmm_params, x) for x in future_tasks
    ]


def record_matrix(record):
    """AccuracyMatrix of a completed run."""
    if record.failure:
        raise errors.IncompleteRecord(f"run failed: {record.failure}")
    return metrics.assemble_matrix(record.accuracy_rows, record.baseline_accuracies)


def summarize_records(records):
    """Mean +/- std of the headline numbers over seeds.

    Returns a dict with alpha_init, alpha_init_final, alpha_base_final
    and average forgetting at the final stage, each as (mean, std).
    """
    mats = [record_matrix(r) for r in records]
    mean = metrics.mean_matrix(mats)

    def agg(values):
        v = np.asarray(values, dtype=float)
        return float(v.mean()), float(v.std())

    return {
        "num_seeds": len(records),
        "alpha_init": agg([m.alpha_init for m in mats]),
        "alpha_init_final": agg([m.alpha_init_final for m in mats]),
        "alpha_base_final": agg([m.alpha_base_final for m in mats]),
        "forgetting_final": agg([metrics.forgetting(m).average for m in mats]),
        "mean_matrix": mean,
    }
