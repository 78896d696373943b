"""``fd`` command-line interface.

Subcommands cover the full pipeline: ingest, seneca, agreement, bucket,
compare, balance, sample, featurize, train, cv, sweep, report. Diagnostics
go to stderr via logging; stdout carries tables and summary lines. The
FD_CACHE_DIR environment variable (default ``.fd-cache``) provides the
default output directory for sweep artifacts.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, alignment, crowd, harness, sampler
from .classify import Hyperparameters, LabeledExample, train as train_model
from .features import (DEFAULT_DICT_SIZE, assemble, canonical_blocks,
                       fit_feature_space, write_matrix)
from .store import EntityStore, IngestConfig, ingest_files

logger = logging.getLogger("fd")

DEFAULT_CROWD_THRESHOLD = 0.8


def cache_dir() -> Path:
    return Path(os.environ.get("FD_CACHE_DIR", ".fd-cache"))


def _parse_blocks(text: str) -> tuple[str, ...]:
    letters = [c for c in text.replace(",", "").upper() if not c.isspace()]
    return canonical_blocks(letters)


def _load_colmap(path: str | None) -> dict | None:
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _load_labels_arg(args, attr="labels", colmap_attr="colmap"):
    return crowd.load_labels(getattr(args, attr), _load_colmap(getattr(args, colmap_attr, None)))


def _prepare_eval_labels(args, labels):
    """Shared cv/sweep label preparation: agreement bucketing + balance check."""
    dataset = args.dataset or harness.dataset_tag(labels)
    threshold = args.threshold
    if threshold is None and dataset == "C":
        threshold = DEFAULT_CROWD_THRESHOLD
    if threshold:
        labels, _ = crowd.bucket(labels, threshold)
    counts = {}
    for lab in labels:
        counts[lab.label] = counts.get(lab.label, 0) + 1
    if len(set(counts.values())) > 1:
        logger.warning("label counts are unbalanced (%s); run `fd balance` first", counts)
    return labels, dataset, threshold


def _corpus_for(args, labels, task):
    store = EntityStore.load(args.store)
    verdicts = alignment.read_verdicts(args.verdicts) if args.verdicts else None
    return harness.make_corpus(store, verdicts, labels, task)


# -- subcommand handlers -------------------------------------------------


def cmd_ingest(args) -> int:
    cfg = IngestConfig(abstract_pred=args.abstract_pred,
                       category_pred=args.category_pred,
                       lang=args.lang if args.lang != "*" else None,
                       count_literal_objects=args.count_literal_objects)
    store, stats = ingest_files(args.files, cfg, strict=args.strict)
    store.save(args.output, stats)
    print(f"ingested {stats.triples} triples from {len(args.files)} file(s) -> "
          f"{stats.records} records ({stats.abstracts} abstracts, "
          f"{stats.malformed_lines} malformed lines)")
    print(f"wrote {args.output} (+ {args.output}.json)")
    return 0


def cmd_seneca(args) -> int:
    g = alignment.load_alignments(args.graph, symmetrize_aligned=not args.no_symmetrize)
    store = EntityStore.load(args.store)
    verdicts = alignment.seneca_batch(store, g)
    alignment.write_verdicts(args.output, verdicts)
    summary = alignment.summarize_verdicts(verdicts)
    print(f"verdicts for {summary['entities']} entities -> {args.output}")
    print(f"candidate classes: {summary['class']}   candidate physical objects: {summary['po']}")
    if args.audit_log:
        alignment.write_witness_log(args.audit_log, verdicts)
        print(f"witness audit log -> {args.audit_log}")
    if args.eval_labels:
        task = harness.TASKS[args.task.upper()]
        gold = crowd.load_labels(args.eval_labels, _load_colmap(args.colmap))
        report = harness.eval_seneca(verdicts, gold, task,
                                     dataset=args.dataset or harness.dataset_tag(gold))
        print(harness.render_table([report]))
        if args.report_out:
            Path(args.report_out).write_text(report.to_json(), encoding="utf-8")
            print(f"report -> {args.report_out}")
    return 0


def cmd_agreement(args) -> int:
    judgments = crowd.load_judgments(args.judgments)
    labels = crowd.aggregate_all(judgments, source=args.source)
    crowd.write_labels(args.output, labels)
    print(f"aggregated {len(labels)} entities -> {args.output}")
    print(f"macro-average agreement: {crowd.mean_agreement(labels):.4f}")
    contested = sum(1 for lab in labels if lab.contested)
    if contested:
        print(f"contested entities: {contested}")
    return 0


def cmd_bucket(args) -> int:
    labels = _load_labels_arg(args)
    thresholds = args.threshold or [0.5]
    order = args.label_order.split(",") if args.label_order else None
    print(crowd.render_bucket_table(labels, thresholds, order))
    if args.output:
        if len(thresholds) != 1:
            raise ValueError("-o needs exactly one --threshold")
        kept, _ = crowd.bucket(labels, thresholds[0])
        crowd.write_labels(args.output, kept)
        print(f"kept {len(kept)} entities -> {args.output}")
    return 0


def cmd_compare(args) -> int:
    a = crowd.load_labels(args.a, _load_colmap(args.colmap_a))
    b = crowd.load_labels(args.b, _load_colmap(args.colmap_b))
    if args.threshold is not None:
        a, _ = crowd.bucket(a, args.threshold)
        b, _ = crowd.bucket(b, args.threshold)
    result = crowd.compare(a, b)
    print(f"common entities: {result.common}")
    print(f"matching: {result.matches}   disagreements: {len(result.disagreements)}")
    print(f"agreement rate: {result.rate:.4f}")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            for entity, la, lb in result.disagreements:
                fh.write(f"{entity}\t{la}\t{lb}\n")
        print(f"disagreement list -> {args.output}")
    return 0


def cmd_balance(args) -> int:
    labels = _load_labels_arg(args)
    if args.threshold is not None:
        labels, _ = crowd.bucket(labels, args.threshold)
    balanced = crowd.balance(labels, args.strategy, seed=args.seed)
    crowd.write_labels(args.output, balanced)
    counts = {}
    for lab in balanced:
        counts[lab.label] = counts.get(lab.label, 0) + 1
    print(f"balanced {len(labels)} -> {len(balanced)} entities {counts} -> {args.output}")
    return 0


def cmd_sample(args) -> int:
    vectors = sampler.load_vectors(args.vectors)
    store = EntityStore.load(args.store)
    seeds = sampler.load_names(args.seeds)
    places = sampler.load_names(args.places) if args.places else []
    cfg = sampler.SamplerConfig(redirect_pred=args.redirect_pred,
                                disambig_pred=args.disambig_pred,
                                places_category=args.places_category)
    sample = sampler.build_sample(seeds, vectors, store, places,
                                  k=args.k, min_cos=args.min_cos, config=cfg)
    with open(args.output, "w", encoding="utf-8") as fh:
        for iri in sample:
            fh.write(iri + "\n")
    print(f"sampled {len(sample)} entities from {len(seeds)} seeds -> {args.output}")
    return 0


def _assemble_examples(corpus, space, task):
    return [LabeledExample(it.record.iri, assemble(it.record, it.verdict, space),
                           1 if it.label == task.positive else -1, it.weight)
            for it in corpus]


def cmd_featurize(args) -> int:
    task = harness.TASKS[args.task.upper()]
    labels = _load_labels_arg(args)
    if args.threshold is not None:
        labels, _ = crowd.bucket(labels, args.threshold)
    corpus = _corpus_for(args, labels, task)
    blocks = _parse_blocks(args.blocks)
    space = fit_feature_space([it.record for it in corpus], blocks, task=task.name,
                              max_tokens=args.max_tokens, binarize_e=args.binarize_e,
                              case_sensitive_uri=not args.case_insensitive_uri)
    rows = [it.record.iri for it in corpus]
    matrix = np.vstack([assemble(it.record, it.verdict, space) for it in corpus])
    write_matrix(args.output, rows, matrix, space)
    print(f"featurized {len(rows)} entities x {space.n_cols} columns -> {args.output}")
    return 0


def cmd_train(args) -> int:
    task = harness.TASKS[args.task.upper()]
    labels = _load_labels_arg(args)
    if args.threshold is not None:
        labels, _ = crowd.bucket(labels, args.threshold)
    corpus = _corpus_for(args, labels, task)
    blocks = _parse_blocks(args.blocks)
    space = fit_feature_space([it.record for it in corpus], blocks, task=task.name,
                              max_tokens=args.max_tokens, binarize_e=args.binarize_e,
                              case_sensitive_uri=not args.case_insensitive_uri)
    examples = _assemble_examples(corpus, space, task)
    model = train_model(args.kind, examples, space, Hyperparameters(seed=args.seed))
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"trained {args.kind} on {len(examples)} examples "
          f"({'+'.join(space.blocks)}) -> {args.output}")
    return 0


def cmd_cv(args) -> int:
    task = harness.TASKS[args.task.upper()]
    labels = _load_labels_arg(args)
    labels, dataset, threshold = _prepare_eval_labels(args, labels)
    corpus = _corpus_for(args, labels, task)
    report = harness.cross_validate(
        corpus, task, args.kind, _parse_blocks(args.blocks),
        folds=args.folds, seed=args.seed, dataset=dataset,
        max_tokens=args.max_tokens, binarize_e=args.binarize_e,
        case_sensitive_uri=not args.case_insensitive_uri,
        extra_config={"threshold": threshold})
    print(harness.render_table([report]))
    if args.output:
        Path(args.output).write_text(report.to_json(), encoding="utf-8")
        print(f"report -> {args.output}")
    return 0


def cmd_sweep(args) -> int:
    task = harness.TASKS[args.task.upper()]
    labels = _load_labels_arg(args)
    labels, dataset, threshold = _prepare_eval_labels(args, labels)
    corpus = _corpus_for(args, labels, task)
    universe = ("A", "U", "E", "D")
    if not args.verdicts:
        logger.warning("no --verdicts given; sweeping A,U,E combinations only")
        universe = ("A", "U", "E")
    reports = harness.sweep(
        corpus, task, args.kind, universe=universe,
        folds=args.folds, seed=args.seed, dataset=dataset,
        max_tokens=args.max_tokens, binarize_e=args.binarize_e,
        case_sensitive_uri=not args.case_insensitive_uri,
        extra_config={"threshold": threshold})
    table = harness.render_table(reports)
    print(table)
    outdir = Path(args.output) if args.output else (
        cache_dir() / f"sweep-{task.name}-{dataset}-{args.kind}")
    outdir.mkdir(parents=True, exist_ok=True)
    for report in reports:
        name = "report_" + "".join(report.blocks) + ".json"
        (outdir / name).write_text(report.to_json(), encoding="utf-8")
    (outdir / "table.txt").write_text(table + "\n", encoding="utf-8")
    print(f"{len(reports)} reports -> {outdir}/")
    return 0


def cmd_report(args) -> int:
    reports = []
    for path in args.files:
        with open(path, "r", encoding="utf-8") as fh:
            reports.append(harness.EvalReport.from_dict(json.load(fh)))
    print(harness.render_table(reports))
    return 0


# -- argument parser -----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fd",
        description="Classify knowledge-graph entities along foundational "
                    "distinctions (class vs. instance, physical object vs. not).")
    p.add_argument("--version", action="version", version=f"fd {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="stream N-Triples dumps into an entity store")
    sp.add_argument("files", nargs="+", help="N-Triples files, optionally .gz")
    sp.add_argument("-o", "--output", required=True, help="binary store path")
    sp.add_argument("--abstract-pred", default=IngestConfig.abstract_pred)
    sp.add_argument("--category-pred", default=IngestConfig.category_pred)
    sp.add_argument("--lang", default="en", help="abstract language filter ('*' keeps all)")
    sp.add_argument("--strict", action="store_true", help="abort on malformed lines")
    sp.add_argument("--count-literal-objects", action="store_true",
                    help="also count literal-valued statements into out-degrees")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("seneca", help="alignment-path verdicts per store entity")
    sp.add_argument("--graph", action="append", required=True, help="alignment TSV (repeatable)")
    sp.add_argument("--store", required=True)
    sp.add_argument("-o", "--output", required=True, help="verdict TSV path")
    sp.add_argument("--no-symmetrize", action="store_true",
                    help="treat ALIGNED edges as directed as loaded")
    sp.add_argument("--audit-log", help="JSONL witness-path audit log")
    sp.add_argument("--eval-labels", help="reference labels to score the verdicts against")
    sp.add_argument("--task", default="ci", choices=["ci", "po", "CI", "PO"])
    sp.add_argument("--dataset", choices=["E", "C"])
    sp.add_argument("--colmap", help="column-map JSON for --eval-labels")
    sp.add_argument("--report-out", help="write the evaluation report JSON here")
    sp.set_defaults(func=cmd_seneca)

    sp = sub.add_parser("agreement", help="aggregate trust-weighted crowd judgments")
    sp.add_argument("--judgments", required=True, help="entity/worker/label/trust TSV")
    sp.add_argument("-o", "--output", required=True, help="aggregated labels TSV")
    sp.add_argument("--source", default=crowd.SOURCE_CROWD,
                    choices=[crowd.SOURCE_CROWD, crowd.SOURCE_EXPERT])
    sp.set_defaults(func=cmd_agreement)

    sp = sub.add_parser("bucket", help="filter labels by agreement threshold")
    sp.add_argument("--labels", required=True)
    sp.add_argument("--colmap")
    sp.add_argument("--threshold", type=float, action="append")
    sp.add_argument("--label-order", help="comma-separated column order for the table")
    sp.add_argument("-o", "--output", help="write the filtered label set")
    sp.set_defaults(func=cmd_bucket)

    sp = sub.add_parser("compare", help="agreement rate between two label sets")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--colmap-a")
    sp.add_argument("--colmap-b")
    sp.add_argument("--threshold", type=float, help="bucket both sides first")
    sp.add_argument("-o", "--output", help="write the disagreement list")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("balance", help="equalize class counts")
    sp.add_argument("--labels", required=True)
    sp.add_argument("--colmap")
    sp.add_argument("--strategy", required=True,
                    choices=["random_drop", "low_agreement_drop"])
    sp.add_argument("--threshold", type=float, help="bucket before balancing")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_balance)

    sp = sub.add_parser("sample", help="nearest-neighbor dataset sampling")
    sp.add_argument("--vectors", required=True, help="entity vector file (text or binary)")
    sp.add_argument("--store", required=True)
    sp.add_argument("--seeds", required=True, help="seed IRIs, one per line")
    sp.add_argument("--places", help="place names, one per line")
    sp.add_argument("--k", type=int, default=100)
    sp.add_argument("--min-cos", type=float, default=0.6)
    sp.add_argument("--redirect-pred", default=sampler.DEFAULT_REDIRECT_PRED)
    sp.add_argument("--disambig-pred", default=sampler.DEFAULT_DISAMBIG_PRED)
    sp.add_argument("--places-category", default=sampler.DEFAULT_PLACES_CATEGORY)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_sample)

    def add_featurize_args(sp, with_blocks=True):
        sp.add_argument("--store", required=True)
        sp.add_argument("--labels", required=True)
        sp.add_argument("--colmap")
        sp.add_argument("--verdicts", help="verdict TSV (required for the D block)")
        sp.add_argument("--task", default="ci", choices=["ci", "po", "CI", "PO"])
        if with_blocks:
            sp.add_argument("--blocks", "--features", dest="blocks", required=True,
                            help="e.g. AUED or A,U,E")
        sp.add_argument("--max-tokens", type=int, default=DEFAULT_DICT_SIZE)
        sp.add_argument("--binarize-e", action="store_true")
        sp.add_argument("--case-insensitive-uri", action="store_true")

    sp = sub.add_parser("featurize", help="write a sparse feature matrix")
    add_featurize_args(sp)
    sp.add_argument("--threshold", type=float)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_featurize)

    sp = sub.add_parser("train", help="train one classifier on all given labels")
    add_featurize_args(sp)
    sp.add_argument("--kind", required=True,
                    choices=["svm", "logreg", "bernoulli_nb", "multinomial_nb", "knn"])
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output", required=True, help="model JSON path")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("cv", help="stratified k-fold cross-validation")
    add_featurize_args(sp)
    sp.add_argument("--kind", required=True,
                    choices=["svm", "logreg", "bernoulli_nb", "multinomial_nb", "knn"])
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threshold", type=float,
                    help="agreement bucket (default 0.8 for crowd labels)")
    sp.add_argument("--dataset", choices=["E", "C"])
    sp.add_argument("-o", "--output", help="report JSON path")
    sp.set_defaults(func=cmd_cv)

    sp = sub.add_parser("sweep", help="cross-validate every feature combination")
    add_featurize_args(sp, with_blocks=False)
    sp.add_argument("--kind", required=True,
                    choices=["svm", "logreg", "bernoulli_nb", "multinomial_nb", "knn"])
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threshold", type=float,
                    help="agreement bucket (default 0.8 for crowd labels)")
    sp.add_argument("--dataset", choices=["E", "C"])
    sp.add_argument("-o", "--output", help="report directory (default under FD_CACHE_DIR)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="render report JSON files as an aligned table")
    sp.add_argument("files", nargs="+")
    sp.set_defaults(func=cmd_report)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
