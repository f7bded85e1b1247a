"""Command-line entry points.

Subcommands: run (CIL experiment over seeds), baseline (joint offline
training), sample (variant generation demo), probe (task-similarity
NLL), report (re-aggregate existing run records).

Exit codes: 0 ok, 2 usage/config error, 3 output conflict, 4 runtime
failure.
"""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from gmm_replay import config as config_mod
from gmm_replay import datasets, errors, gmm, metrics, protocol, render, sampler, scholar

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_OUTPUT = 3
EXIT_RUNTIME = 4


def _prepare_out_dir(path, force):
    os.makedirs(path, exist_ok=True)
    if os.listdir(path) and not force:
        print(f"error: output dir {path!r} is not empty (use --force)", file=sys.stderr)
        return False
    return True


def _write_atomic(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _one_seed(args):
    cfg, seed = args
    stream = config_mod.load_stream(cfg)
    num_classes = stream.tasks[0][1].num_classes
    record, _ = protocol.run_cil(
        stream, cfg.scholar_config(num_classes),
        scholar.ReplayPlan(cfg.strategy, cfg.batch_size), seed,
    )
    return record


def _summary_lines(problem, summary):
    fmt = lambda pair: f"{pair[0]:.4f} +/- {pair[1]:.4f}"
    return [
        f"problem: {problem} ({summary['num_seeds']} seeds)",
        f"  alpha_init        {fmt(summary['alpha_init'])}",
        f"  alpha_init_final  {fmt(summary['alpha_init_final'])}",
        f"  alpha_base_final  {fmt(summary['alpha_base_final'])}",
        f"  forgetting_final  {fmt(summary['forgetting_final'])}",
    ]


def _write_run_outputs(out_dir, records):
    mats = [protocol.record_matrix(r) for r in records]
    for record, mat in zip(records, mats):
        metrics.write_matrix_csv(mat, os.path.join(out_dir, f"matrix_seed{record.seed}.csv"))
    mean = metrics.mean_matrix(mats)
    metrics.write_matrix_csv(mean, os.path.join(out_dir, "matrix_mean.csv"))

    with open(os.path.join(out_dir, "forgetting.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["seed"] + [f"F_T{i}" for i in range(1, mats[0].T)] + ["F_avg"])
        for record, mat in zip(records, mats):
            rep = metrics.forgetting(mat)
            w.writerow([record.seed] + [f"{v:.6f}" for v in rep.per_task]
                       + [f"{rep.average:.6f}"])

    with open(os.path.join(out_dir, "generated_counts.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["seed", "task", "generated", "task_size"])
        for record in records:
            for i, count in enumerate(record.generated_counts):
                w.writerow([record.seed, i + 2, count, record.task_sizes[i + 1]])

    summary = protocol.summarize_records(records)
    problem = records[0].problem
    payload = {k: v for k, v in summary.items() if k != "mean_matrix"}
    _write_atomic(os.path.join(out_dir, "summary.json"), json.dumps(payload, indent=2))
    lines = _summary_lines(problem, summary)
    _write_atomic(os.path.join(out_dir, "summary.txt"), "\n".join(lines) + "\n")
    print("\n".join(lines))


def cmd_run(args):
    cfg = config_mod.load_config(args.config, profile=args.profile)
    if args.out:
        cfg.out_dir = args.out
    seeds = args.seeds if args.seeds is not None else cfg.seeds
    if not _prepare_out_dir(cfg.out_dir, args.force):
        return EXIT_OUTPUT
    jobs = max(1, args.jobs)
    work = [(cfg, seed) for seed in seeds]
    if jobs == 1:
        records = [_one_seed(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_one_seed, work))
    for record in records:
        _write_atomic(
            os.path.join(cfg.out_dir, f"record_seed{record.seed}.json"),
            record.to_json(),
        )
    failed = [r for r in records if r.failure]
    if failed:
        for r in failed:
            print(f"seed {r.seed} failed: {r.failure}", file=sys.stderr)
        return EXIT_RUNTIME
    _write_run_outputs(cfg.out_dir, records)
    return EXIT_OK


def cmd_baseline(args):
    cfg = config_mod.load_config(args.config, profile=args.profile)
    if args.out:
        cfg.out_dir = args.out
    seeds = args.seeds if args.seeds is not None else cfg.seeds
    if not _prepare_out_dir(cfg.out_dir, args.force):
        return EXIT_OUTPUT
    stream = config_mod.load_stream(cfg)
    num_classes = stream.tasks[0][1].num_classes
    accs = []
    for seed in seeds:
        acc, _ = protocol.offline_baseline(stream, cfg.scholar_config(num_classes), seed)
        accs.append(acc)
        print(f"seed {seed}: alpha_base = {acc:.4f}")
    result = {
        "problem": cfg.problem,
        "seeds": list(seeds),
        "alpha_base_per_seed": accs,
        "alpha_base_mean": float(np.mean(accs)),
        "alpha_base_std": float(np.std(accs)),
    }
    _write_atomic(os.path.join(cfg.out_dir, "baseline.json"), json.dumps(result, indent=2))
    print(f"alpha_base = {result['alpha_base_mean']:.4f} +/- {result['alpha_base_std']:.4f}")
    return EXIT_OK


def cmd_sample(args):
    if args.count < 1:
        print("error: --count must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if not os.path.exists(args.checkpoint):
        print(f"error: checkpoint not found: {args.checkpoint}", file=sys.stderr)
        return EXIT_USAGE
    model = scholar.load_scholar(args.checkpoint)
    queries = datasets.load_idx_images(args.queries)
    if args.limit and queries.count > args.limit:
        queries = datasets.ImageSet(queries.samples[: args.limit])
    cfg = sampler.SamplerConfig(model.cfg.top_s, model.cfg.rho, args.seed)
    variants, drawn = sampler.generate_variants(
        model.gmm_params, queries, cfg, args.count, return_components=True
    )
    gammas = gmm.batch_responsibilities(model.gmm_params, queries.samples)
    for i in range(queries.count):
        top = np.argsort(-gammas[i], kind="stable")[: model.cfg.top_s]
        print(f"query {i}: top-{model.cfg.top_s} components {top.tolist()}")
    datasets.save_idx_images(variants, args.out)
    render.write_pgm_sheet(variants, args.out + ".pgm")
    print(f"wrote {variants.count} variants to {args.out} (+ contact sheet .pgm)")
    del drawn
    return EXIT_OK


def cmd_probe(args):
    if not os.path.exists(args.checkpoint):
        print(f"error: checkpoint not found: {args.checkpoint}", file=sys.stderr)
        return EXIT_USAGE
    cfg = config_mod.load_config(args.config, profile=args.profile)
    model = scholar.load_scholar(args.checkpoint)
    stream = config_mod.load_stream(cfg)
    nlls = protocol.task_similarity_probe(model, [t[0] for t in stream.test_tasks])
    for i, nll in enumerate(nlls):
        print(f"task {i + 1}: mean NLL = {nll:.4f}")
    if args.out:
        with open(args.out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["task", "mean_nll"])
            for i, nll in enumerate(nlls):
                w.writerow([i + 1, f"{nll:.6f}"])
    return EXIT_OK


def cmd_report(args):
    paths = sorted(
        os.path.join(args.run_dir, p)
        for p in os.listdir(args.run_dir)
        if p.startswith("record_seed") and p.endswith(".json")
    ) if os.path.isdir(args.run_dir) else []
    if not paths:
        print(f"error: no run records in {args.run_dir!r}", file=sys.stderr)
        return EXIT_USAGE
    by_problem = {}
    bad = 0
    for path in paths:
        try:
            with open(path) as f:
                record = protocol.RunRecord.from_json(f.read())
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            print(f"skipping {path}: {exc}", file=sys.stderr)
            bad += 1
            continue
        by_problem.setdefault(record.problem, []).append(record)
    for problem, records in sorted(by_problem.items()):
        ok = [r for r in records if not r.failure]
        if not ok:
            print(f"problem {problem}: all {len(records)} records failed")
            continue
        summary = protocol.summarize_records(ok)
        print("\n".join(_summary_lines(problem, summary)))
        with open(os.path.join(args.run_dir, f"loss_curves_{problem}.csv"), "w",
                  newline="") as f:
            w = csv.writer(f)
            w.writerow(["seed", "stage", "epoch", "mean_nll"])
            for r in ok:
                for stage, curve in enumerate(r.loss_curves, start=1):
                    for epoch, loss in enumerate(curve, start=1):
                        w.writerow([r.seed, stage, epoch, f"{loss:.6f}"])
    return EXIT_OK if bad == 0 else EXIT_RUNTIME


def _parse_seeds(text):
    return [int(s) for s in text.split(",") if s.strip() != ""]


def build_parser():
    p = argparse.ArgumentParser(prog="gmm-replay")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True)
        sp.add_argument("--profile", choices=["desk", "full"], default=None)
        sp.add_argument("--seeds", type=_parse_seeds, default=None,
                        help="comma-separated seed list (default: from config)")
        sp.add_argument("--out", default=None)
        sp.add_argument("--force", action="store_true")

    sp = sub.add_parser("run", help="full CIL experiment over seeds")
    common(sp)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("baseline", help="offline joint training")
    common(sp)
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("sample", help="variant generation from a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--queries", required=True, help="IDX image file of queries")
    sp.add_argument("--count", type=int, default=1, help="variants per query")
    sp.add_argument("--limit", type=int, default=0, help="use at most N queries")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output IDX path")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("probe", help="task-similarity NLL probe")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--config", required=True)
    sp.add_argument("--profile", choices=["desk", "full"], default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_probe)

    sp = sub.add_parser("report", help="re-aggregate existing run records")
    sp.add_argument("run_dir")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except errors.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except errors.GmmReplayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
