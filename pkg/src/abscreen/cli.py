"""Command-line surface tying the pipeline together.

Commands: stats, build-prompts, screen, baseline, gen-irrelevancy,
evaluate, compare-runs, bench. Exit codes: 0 success, 1 defined results
with warnings (parse failures, skipped folds, undefined metrics), 2
configuration or input error.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import evalsets, metrics, promptgen
from .baseline.crossval import crossval_review
from .config import RunConfig
from .corpus import (
    ScreeningDecision,
    ScreeningInstance,
    Split,
    compute_split_stats,
    doi_gaps,
    join_instances,
    load_doi_list,
    load_manifest,
    load_studies,
    topic_distribution,
)
from .errors import AbscreenError, ConfigError
from .inference import (
    PredictionStatus,
    bench_latency,
    load_predictions,
    run_screening,
    write_predictions,
)
from .jsonl import write_records
from .promptgen import TaskKind, build_dataset, bundle_to_record, load_bundles, parse_bundle_id
from .reports import fmt_metric, write_csv, write_run_record, write_text

_SPLIT_CHOICES = ("train", "test", "subset", "safety-first", "irrelevancy")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _load_split_instances(cfg: RunConfig, which: str) -> list[ScreeningInstance]:
    """Joined instances for one manifest pair ("train" or "test")."""
    reviews = load_manifest(cfg.path(f"reviews_{which}"))
    studies = load_studies(cfg.path(f"studies_{which}"))
    split = Split.TRAIN if which == "train" else Split.TEST
    return join_instances(reviews, studies, split)


def _subset_instances(cfg: RunConfig, test_instances: Sequence[ScreeningInstance],
                      ) -> tuple[evalsets.SubsetSpec, list[ScreeningInstance]]:
    spec = evalsets.select_review_subset(test_instances, cfg.subset_threshold)
    members = set(spec.review_ids)
    chosen = [
        ScreeningInstance(inst.review, inst.study, Split.SUBSET)
        for inst in test_instances
        if inst.review.review_id in members
    ]
    return spec, chosen


def _instances_for(cfg: RunConfig, split: str) -> list[ScreeningInstance]:
    if split == "train":
        return _load_split_instances(cfg, "train")
    test = _load_split_instances(cfg, "test")
    if split == "test":
        return test
    if split == "subset":
        return _subset_instances(cfg, test)[1]
    if split == "safety-first":
        annotations = evalsets.load_annotations(cfg.path("annotations"))
        return evalsets.build_safety_set(annotations, test).instances
    if split == "irrelevancy":
        pairs = evalsets.load_irrelevancy_pairs(cfg.path("irrelevancy"))
        return evalsets.irrelevancy_instances(pairs, test)
    raise ConfigError(f"unknown split {split!r}")


# ---------------------------------------------------------------- stats ----

_TASK_ROWS = (
    ("inclusion", None),
    ("exclusion", None),
    ("include_exclude", "include_exclude"),
    ("population", "population"),
    ("intervention", "intervention"),
    ("outcome", "outcome"),
    ("exclusion_reason", "exclusion_reason"),
    ("total", None),
)

_SPLIT_COLUMNS = (
    ("train", Split.TRAIN),
    ("test", Split.TEST),
    ("subset", Split.SUBSET),
    ("safety_first", Split.SAFETY_FIRST),
    ("irrelevancy", Split.IRRELEVANCY),
)


def cmd_stats(cfg: RunConfig, args) -> int:
    counter = cfg.make_counter()
    out_dir = Path(args.out_dir or cfg.output_dir)
    started = _now()

    instances: list[ScreeningInstance] = []
    reviews_seen: dict[str, list] = {}
    for which in ("train", "test"):
        if cfg.paths.get(f"reviews_{which}") is not None:
            part = _load_split_instances(cfg, which)
            instances.extend(part)
            reviews_seen[which] = part
    if not instances and not reviews_seen:
        raise ConfigError("stats needs reviews_train/studies_train and/or "
                          "reviews_test/studies_test paths")

    test_part = reviews_seen.get("test", [])
    if test_part:
        _, subset_part = _subset_instances(cfg, test_part)
        instances.extend(subset_part)
        if cfg.paths.get("annotations"):
            annotations = evalsets.load_annotations(cfg.path("annotations"))
            instances.extend(evalsets.build_safety_set(annotations, test_part).instances)
        if cfg.paths.get("irrelevancy"):
            pairs = evalsets.load_irrelevancy_pairs(cfg.path("irrelevancy"))
            instances.extend(evalsets.irrelevancy_instances(pairs, test_part))

    stats = compute_split_stats(instances, counter)
    header = cfg.header("stats")

    split_rows = []
    for row_name, task_key in _TASK_ROWS:
        row = {"task": row_name}
        for col, split in _SPLIT_COLUMNS:
            labels = stats.labels.get(split)
            tasks = stats.tasks.get(split)
            if labels is None:
                row[col] = ""
                continue
            if row_name == "inclusion":
                row[col] = labels.include
            elif row_name == "exclusion":
                row[col] = labels.exclude
            elif row_name == "total":
                row[col] = sum(tasks.values())
            else:
                row[col] = tasks[task_key]
        split_rows.append(row)
    splits_csv = out_dir / "stats_splits.csv"
    write_csv(splits_csv, ["task"] + [c for c, _ in _SPLIT_COLUMNS], split_rows, header)

    topic_rows: dict[str, dict] = {}
    for which, part in reviews_seen.items():
        for topic, count in sorted(topic_distribution(part).items()):
            topic_rows.setdefault(topic, {"topic": topic})[which] = count
    topics_csv = out_dir / "stats_topics.csv"
    write_csv(topics_csv, ["topic", "train", "test"],
              [topic_rows[t] for t in sorted(topic_rows)], header)

    field_rows = []
    for name, fstats in stats.fields.items():
        field_rows.append({
            "field": name,
            "count": fstats.count,
            "mean": f"{fstats.mean:.2f}",
            "min": fstats.minimum,
            "max": fstats.maximum,
        })
    fields_csv = out_dir / "stats_fields.csv"
    write_csv(fields_csv, ["field", "count", "mean", "min", "max"], field_rows, header)

    summary = [f"instances: {len(instances)}"]
    for col, split in _SPLIT_COLUMNS:
        labels = stats.labels.get(split)
        if labels is not None:
            summary.append(
                f"{col}: {labels.include} included / {labels.exclude} excluded"
                f" ({labels.total} total)")
    if cfg.paths.get("doi_list"):
        dois = load_doi_list(cfg.path("doi_list"))
        all_reviews = [inst.review for inst in instances]
        gaps = doi_gaps(list({r.review_id: r for r in all_reviews}.values()), dois)
        summary.append(f"doi list: {len(dois)} entries, {len(gaps)} not covered")
        summary.extend(f"  missing: {doi}" for doi in gaps)
    summary_txt = out_dir / "stats_summary.txt"
    write_text(summary_txt, summary, header)

    write_run_record(out_dir, "stats", cfg.snapshot(), started, _now(),
                     [splits_csv, topics_csv, fields_csv, summary_txt])
    return 0


# --------------------------------------------------------- build-prompts ----

def _parse_tasks(spec: str) -> list[TaskKind]:
    if spec == "all":
        return list(TaskKind)
    out = []
    for name in spec.split(","):
        try:
            out.append(TaskKind(name.strip()))
        except ValueError:
            valid = ", ".join(t.value for t in TaskKind)
            raise ConfigError(f"unknown task {name!r} (valid: {valid}, or 'all')") from None
    return out


def cmd_build_prompts(cfg: RunConfig, args) -> int:
    started = _now()
    counter = cfg.make_counter()
    instances = _instances_for(cfg, args.split)
    tasks = _parse_tasks(args.tasks)
    bundles = build_dataset(instances, tasks, counter, cfg.max_tokens)
    out = Path(args.out)
    write_records(out, (bundle_to_record(b) for b in bundles),
                  header=cfg.header("build-prompts"))
    write_run_record(out.parent, "build-prompts", cfg.snapshot(), started, _now(), [out])
    print(f"wrote {len(bundles)} bundles to {out}")
    return 0


# ------------------------------------------------------------------ screen ----

def cmd_screen(cfg: RunConfig, args) -> int:
    started = _now()
    bundles = load_bundles(Path(args.bundles))
    endpoint = cfg.make_endpoint(parallelism=args.parallelism)
    predictions = run_screening(bundles, endpoint)
    out = Path(args.out)
    write_predictions(out, predictions, header=cfg.header("screen"))
    write_run_record(out.parent, "screen", cfg.snapshot(), started, _now(), [out])
    failures = sum(1 for p in predictions if p.status is not PredictionStatus.OK)
    print(f"screened {len(predictions)} bundles, {failures} failure(s)")
    return 1 if failures else 0


# ---------------------------------------------------------------- baseline ----

def cmd_baseline(cfg: RunConfig, args) -> int:
    started = _now()
    out_dir = Path(args.out_dir or cfg.output_dir)
    test_instances = _load_split_instances(cfg, "test")
    spec, subset_instances = _subset_instances(cfg, test_instances)
    if not spec.review_ids:
        raise ConfigError(
            f"no review exceeds the subset threshold ({cfg.subset_threshold})")
    pre = cfg.make_preprocess()
    bl = cfg.baseline
    header = cfg.header("baseline")

    by_review: dict[str, list[ScreeningInstance]] = {}
    for inst in subset_instances:
        by_review.setdefault(inst.review.review_id, []).append(inst)

    rows = []
    collected: dict[str, list[float | None]] = {
        "precision": [], "recall": [], "accuracy": [], "f1": []}
    skipped_total = 0
    for review_id in sorted(by_review):
        result = crossval_review(
            by_review[review_id], k=bl.k, lam=bl.lam, seed=cfg.seed, config=pre,
            ngram_range=(1, bl.ngram_max), max_iters=bl.max_iters, tol=bl.tol)
        m = result.metrics
        skipped_total += len(result.skipped_folds)
        rows.append({
            "review_id": review_id,
            "n": len(by_review[review_id]),
            "precision": fmt_metric(m.precision),
            "recall": fmt_metric(m.recall),
            "accuracy": fmt_metric(m.accuracy),
            "f1": fmt_metric(m.f1),
            "skipped_folds": len(result.skipped_folds),
        })
        for key in collected:
            collected[key].append(getattr(m, key))

    def avg(key: str) -> float | None:
        defined = [v for v in collected[key] if v is not None]
        return sum(defined) / len(defined) if defined else None

    rows.append({
        "review_id": "AVERAGE",
        "n": sum(len(v) for v in by_review.values()),
        "precision": fmt_metric(avg("precision")),
        "recall": fmt_metric(avg("recall")),
        "accuracy": fmt_metric(avg("accuracy")),
        "f1": fmt_metric(avg("f1")),
        "skipped_folds": skipped_total,
    })
    reviews_csv = out_dir / "baseline_reviews.csv"
    write_csv(reviews_csv,
              ["review_id", "n", "precision", "recall", "accuracy", "f1", "skipped_folds"],
              rows, header)
    summary_txt = out_dir / "baseline_summary.txt"
    write_text(summary_txt, [
        f"subset reviews: {len(spec.review_ids)} (threshold > {spec.threshold})",
        f"averaged precision: {fmt_metric(avg('precision'))}",
        f"averaged recall: {fmt_metric(avg('recall'))}",
        f"averaged accuracy: {fmt_metric(avg('accuracy'))}",
        f"skipped folds: {skipped_total}",
    ], header)
    write_run_record(out_dir, "baseline", cfg.snapshot(), started, _now(),
                     [reviews_csv, summary_txt])
    return 1 if skipped_total else 0


# --------------------------------------------------------- gen-irrelevancy ----

def cmd_gen_irrelevancy(cfg: RunConfig, args) -> int:
    started = _now()
    test_instances = _load_split_instances(cfg, "test")
    spec, _ = _subset_instances(cfg, test_instances)
    pairs = evalsets.build_irrelevancy_set(test_instances, spec,
                                           per_pair=cfg.per_pair, seed=cfg.seed)
    out = Path(args.out)
    write_records(out, (evalsets.irrelevancy_pair_to_record(p) for p in pairs),
                  header=cfg.header("gen-irrelevancy"))
    write_run_record(out.parent, "gen-irrelevancy", cfg.snapshot(), started, _now(), [out])
    print(f"wrote {len(pairs)} irrelevancy pairs to {out}")
    return 0


# ---------------------------------------------------------------- evaluate ----

def _golds_for(cfg: RunConfig, predictions, eval_set: str):
    """Per-prediction (id, gold) pairs and topics, per the eval-set rule."""
    test_instances = _load_split_instances(cfg, "test")
    review_by_id = {i.review.review_id: i.review for i in test_instances}
    study_gold = {i.study.study_id: i.study.gold for i in test_instances}
    safety_gold: dict[str, ScreeningDecision] = {}
    if eval_set == "safety-first":
        annotations = evalsets.load_annotations(cfg.path("annotations"))
        safety_gold = {
            a.instance_id: evalsets.map_safety_label(a.annotator_label)
            for a in annotations
        }
    golds: list[tuple[str, ScreeningDecision]] = []
    topics: list[str] = []
    for pred in predictions:
        review_id, study_id, task = parse_bundle_id(pred.bundle_id)
        if task is not TaskKind.INCLUDE_EXCLUDE:
            raise ConfigError(
                f"cannot evaluate decisions for task {task.value!r} "
                f"(bundle {pred.bundle_id})")
        if eval_set == "irrelevancy":
            gold = ScreeningDecision.EXCLUDE
        elif eval_set == "safety-first":
            if study_id not in safety_gold:
                raise ConfigError(f"no safety annotation for study {study_id!r}")
            gold = safety_gold[study_id]
        else:
            if study_id not in study_gold:
                raise ConfigError(f"study {study_id!r} not in the test split")
            gold = study_gold[study_id]
        review = review_by_id.get(review_id)
        if review is None:
            raise ConfigError(f"review {review_id!r} not in the test manifest")
        golds.append((pred.bundle_id, gold))
        topics.append(review.topic)
    return golds, topics


def _metric_rows(name: str, counts, cm) -> dict:
    return {
        "eval_set": name,
        "n": counts.total,
        "tp": counts.tp, "fp": counts.fp, "fn": counts.fn, "tn": counts.tn,
        "ambiguous": counts.ambiguous, "errored": counts.errored,
        "precision": fmt_metric(cm.precision),
        "recall": fmt_metric(cm.recall),
        "accuracy": fmt_metric(cm.accuracy),
        "f1": fmt_metric(cm.f1),
    }


_METRIC_FIELDS = ["eval_set", "n", "tp", "fp", "fn", "tn", "ambiguous", "errored",
                  "precision", "recall", "accuracy", "f1"]


def cmd_evaluate(cfg: RunConfig, args) -> int:
    started = _now()
    out_dir = Path(args.out_dir or cfg.output_dir)
    predictions = load_predictions(Path(args.predictions))
    golds, topics = _golds_for(cfg, predictions, args.eval_set)
    header = cfg.header("evaluate")

    counts = metrics.confusion(predictions, golds,
                               ambiguous_policy=cfg.ambiguous_policy)
    cm = metrics.class_metrics(counts)
    rows = [_metric_rows(args.eval_set, counts, cm)]
    metrics_csv = out_dir / f"evaluate_{args.eval_set}_metrics.csv"
    write_csv(metrics_csv, _METRIC_FIELDS, rows, header)

    breakdown = metrics.per_topic(predictions, golds, topics,
                                  ambiguous_policy=cfg.ambiguous_policy)
    topic_rows = [
        {
            "topic": topic,
            "support": tm.support,
            "include_f1": fmt_metric(tm.include_f1),
            "exclude_f1": fmt_metric(tm.exclude_f1),
            "accuracy": fmt_metric(tm.accuracy),
        }
        for topic, tm in sorted(breakdown.topics.items())
    ]
    topics_csv = out_dir / f"evaluate_{args.eval_set}_per_topic.csv"
    write_csv(topics_csv, ["topic", "support", "include_f1", "exclude_f1", "accuracy"],
              topic_rows, header)

    summary = [
        f"eval set: {args.eval_set}",
        f"n: {counts.total}",
        f"precision: {fmt_metric(cm.precision)}",
        f"recall: {fmt_metric(cm.recall)}",
        f"accuracy: {fmt_metric(cm.accuracy)}",
        f"f1: {fmt_metric(cm.f1)}",
        f"ambiguous: {counts.ambiguous}",
        f"errored: {counts.errored}",
    ]
    if args.eval_set == "irrelevancy":
        summary.append(
            f"irrelevancy exclusion accuracy: "
            f"{fmt_metric(metrics.irrelevancy_accuracy(predictions))}")
    summary_txt = out_dir / f"evaluate_{args.eval_set}_summary.txt"
    write_text(summary_txt, summary, header)

    write_run_record(out_dir, "evaluate", cfg.snapshot(), started, _now(),
                     [metrics_csv, topics_csv, summary_txt])
    warnings = counts.ambiguous + counts.errored
    undefined = any(v is None for v in (cm.precision, cm.recall, cm.accuracy, cm.f1))
    return 1 if warnings or undefined else 0


def cmd_compare_runs(cfg: RunConfig, args) -> int:
    started = _now()
    out = Path(args.out)
    rows = []
    for path in args.predictions:
        predictions = load_predictions(Path(path))
        golds, _ = _golds_for(cfg, predictions, args.eval_set)
        counts = metrics.confusion(predictions, golds,
                                   ambiguous_policy=cfg.ambiguous_policy)
        cm = metrics.class_metrics(counts)
        row = _metric_rows(args.eval_set, counts, cm)
        row["run"] = Path(path).name
        rows.append(row)
    write_csv(out, ["run"] + _METRIC_FIELDS, rows, cfg.header("compare-runs"))
    write_run_record(out.parent, "compare-runs", cfg.snapshot(), started, _now(), [out])
    return 0


# ------------------------------------------------------------------- bench ----

def cmd_bench(cfg: RunConfig, args) -> int:
    started = _now()
    bundles = load_bundles(Path(args.bundles))
    batch_sizes = [int(b) for b in args.batch_sizes.split(",") if b.strip()]
    endpoint = cfg.make_endpoint()
    rows = bench_latency(bundles, endpoint, batch_sizes)
    out = Path(args.out)
    write_csv(out, ["batch_size", "mean_ms_per_sample"],
              [{"batch_size": r.batch_size,
                "mean_ms_per_sample": f"{r.mean_ms_per_sample:.3f}"} for r in rows],
              cfg.header("bench"))
    write_run_record(out.parent, "bench", cfg.snapshot(), started, _now(), [out])
    return 0


# ------------------------------------------------------------------ parser ----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abscreen",
        description="Abstract screening pipeline and evaluation harness.")
    parser.add_argument("--config", help="JSON run configuration file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", dest="overrides",
                        help="override a config entry (dotted keys, JSON values)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="corpus statistics tables")
    p.add_argument("--out-dir", help="output directory (default: config output_dir)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("build-prompts", help="build instruction bundles")
    p.add_argument("--split", choices=_SPLIT_CHOICES, default="test")
    p.add_argument("--tasks", default="include_exclude",
                   help="comma-separated task names or 'all'")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_prompts)

    p = sub.add_parser("screen", help="send bundles to the inference endpoint")
    p.add_argument("--bundles", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--parallelism", type=int, default=None)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("baseline", help="per-review cross-validated baseline")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("gen-irrelevancy", help="build the irrelevancy set")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_irrelevancy)

    p = sub.add_parser("evaluate", help="score a prediction file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--eval-set", choices=("test", "subset", "safety-first", "irrelevancy"),
                   default="test")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare-runs", help="side-by-side metrics for several runs")
    p.add_argument("--predictions", nargs="+", required=True)
    p.add_argument("--eval-set", choices=("test", "subset", "safety-first", "irrelevancy"),
                   default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare_runs)

    p = sub.add_parser("bench", help="client-side latency benchmark")
    p.add_argument("--bundles", required=True)
    p.add_argument("--batch-sizes", default="1,2,3")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, args.overrides)
        return args.func(cfg, args)
    except AbscreenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
