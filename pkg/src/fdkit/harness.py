"""Experiment harness: stratified k-fold cross-validation, the feature
combination sweep, alignment-verdict evaluation, and report rendering.

Per-fold feature spaces (token dictionary, E-key layout, standardization)
are fit on the training folds only; held-out predictions are pooled over
all folds before computing metrics. All randomness flows from one seed
that is recorded in every report.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .alignment import SenecaVerdict
from .classify import Hyperparameters, LabeledExample, predict, train
from .crowd import AggregatedLabel, SOURCE_CROWD, SOURCE_EXPERT
from .features import (BLOCK_ORDER, DEFAULT_DICT_SIZE, assemble,
                       canonical_blocks, fit_feature_space)
from .store import EntityRecord, EntityStore

logger = logging.getLogger(__name__)

REPORT_FORMAT = "fd-report"
REPORT_VERSION = 1


@dataclass(frozen=True)
class TaskSpec:
    name: str
    positive: str
    negative: str

    @property
    def labels(self) -> tuple[str, str]:
        return (self.positive, self.negative)


TASK_CI = TaskSpec("CI", "C", "I")
TASK_PO = TaskSpec("PO", "PO", "NPO")
TASKS = {"CI": TASK_CI, "PO": TASK_PO}


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvalReport:
    task: str
    dataset: str                    # "E" (expert) or "C" (crowd)
    method: str                     # classifier kind or "SENECA"
    blocks: tuple[str, ...]
    per_class: dict[str, ClassMetrics]
    avg_f1: float
    folds: int
    seed: int
    config: dict

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "task": self.task,
            "dataset": self.dataset,
            "method": self.method,
            "blocks": list(self.blocks),
            "per_class": {label: {"precision": m.precision, "recall": m.recall,
                                  "f1": m.f1}
                          for label, m in self.per_class.items()},
            "avg_f1": self.avg_f1,
            "folds": self.folds,
            "seed": self.seed,
            "config": self.config,
            "config_hash": self.config_hash,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        if d.get("format") != REPORT_FORMAT:
            raise ValueError("not a report file")
        per_class = {label: ClassMetrics(m["precision"], m["recall"], m["f1"])
                     for label, m in d["per_class"].items()}
        report = cls(task=d["task"], dataset=d["dataset"], method=d["method"],
                     blocks=tuple(d["blocks"]), per_class=per_class,
                     avg_f1=d["avg_f1"], folds=d["folds"], seed=d["seed"],
                     config=d["config"])
        if d.get("config_hash") not in (None, report.config_hash):
            raise ValueError("config hash mismatch in report file")
        return report


def metrics(predictions: Sequence[str], gold: Sequence[str],
            labels: Sequence[str] | None = None) -> tuple[dict[str, ClassMetrics], float]:
    """One-vs-rest precision/recall/F1 per class and their average F1."""
    if len(predictions) != len(gold):
        raise ValueError(f"prediction/gold length mismatch: {len(predictions)} vs {len(gold)}")
    if labels is None:
        labels = sorted(set(gold) | set(predictions))
    per_class = {}
    f1s = []
    for label in labels:
        tp = sum(1 for p, g in zip(predictions, gold) if p == label and g == label)
        fp = sum(1 for p, g in zip(predictions, gold) if p == label and g != label)
        fn = sum(1 for p, g in zip(predictions, gold) if p != label and g == label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[label] = ClassMetrics(precision, recall, f1)
        f1s.append(f1)
    return per_class, float(np.mean(f1s))


# -- corpus assembly ---------------------------------------------------------


@dataclass(frozen=True)
class CorpusItem:
    record: EntityRecord
    verdict: SenecaVerdict | None
    label: str
    weight: float


def make_corpus(store: EntityStore, verdicts: dict[str, SenecaVerdict] | None,
                labels: Sequence[AggregatedLabel], task: TaskSpec) -> list[CorpusItem]:
    """Join labels with their store records and verdicts, sorted by IRI.

    Crowd labels weigh examples by their agreement score; expert labels
    always carry weight 1.
    """
    items = []
    missing = 0
    for lab in sorted(labels, key=lambda a: a.entity):
        if lab.label not in task.labels:
            raise ValueError(f"{lab.entity}: label {lab.label!r} is not "
                             f"{task.positive!r}/{task.negative!r} for task {task.name}")
        rec = store.get(lab.entity)
        if rec is None:
            missing += 1
            continue
        v = verdicts.get(lab.entity) if verdicts else None
        weight = 1.0 if lab.source == SOURCE_EXPERT else lab.agreement
        items.append(CorpusItem(rec, v, lab.label, weight))
    if missing:
        logger.warning("make_corpus: %d labeled entities missing from the store", missing)
    return items


def dataset_tag(labels: Iterable[AggregatedLabel]) -> str:
    return "C" if any(lab.source == SOURCE_CROWD for lab in labels) else "E"


# -- cross-validation ---------------------------------------------------------


def stratified_folds(items: Sequence[CorpusItem], folds: int, seed: int) -> list[int]:
    """Seeded stratified fold id per item (by position)."""
    if len(items) < folds:
        raise ValueError(f"{len(items)} examples cannot fill {folds} folds")
    rng = np.random.default_rng(seed)
    assignment = [0] * len(items)
    bylabel: dict[str, list[int]] = {}
    for i, it in enumerate(items):
        bylabel.setdefault(it.label, []).append(i)
    for label in sorted(bylabel):
        idx = sorted(bylabel[label], key=lambda i: items[i].record.iri)
        order = rng.permutation(len(idx))
        for pos, j in enumerate(order):
            assignment[idx[j]] = pos % folds
    return assignment


def _fold_seed(seed: int, fold: int) -> int:
    return seed * 100003 + fold


def cross_validate(
    items: Sequence[CorpusItem],
    task: TaskSpec,
    kind: str,
    blocks: Iterable[str],
    folds: int = 10,
    seed: int = 0,
    hp: Hyperparameters | None = None,
    dataset: str = "C",
    max_tokens: int = DEFAULT_DICT_SIZE,
    binarize_e: bool = False,
    case_sensitive_uri: bool = True,
    extra_config: dict | None = None,
) -> EvalReport:
    """Stratified k-fold CV with per-fold feature fitting (no leakage)."""
    blocks = canonical_blocks(blocks)
    hp = hp or Hyperparameters(seed=seed)
    if "D" in blocks and any(it.verdict is None for it in items):
        raise ValueError("D block requested but some items lack alignment verdicts")
    assignment = stratified_folds(items, folds, seed)
    gold: list[str] = []
    pred: list[str] = []
    for fold in range(folds):
        train_items = [it for it, f in zip(items, assignment) if f != fold]
        test_items = [it for it, f in zip(items, assignment) if f == fold]
        if not test_items:
            continue
        space = fit_feature_space([it.record for it in train_items], blocks,
                                  task=task.name, max_tokens=max_tokens,
                                  binarize_e=binarize_e,
                                  case_sensitive_uri=case_sensitive_uri)
        train_ex = [LabeledExample(it.record.iri,
                                   assemble(it.record, it.verdict, space),
                                   1 if it.label == task.positive else -1,
                                   it.weight)
                    for it in train_items]
        fold_hp = Hyperparameters(**{**hp.to_dict(), "seed": _fold_seed(hp.seed, fold)})
        model = train(kind, train_ex, space, fold_hp)
        for it in test_items:
            x = assemble(it.record, it.verdict, space)
            label, _ = predict(model, x, space)
            pred.append(task.positive if label == 1 else task.negative)
            gold.append(it.label)
    per_class, avg_f1 = metrics(pred, gold, labels=task.labels)
    config = {
        "task": task.name, "dataset": dataset, "method": kind,
        "blocks": list(blocks), "folds": folds, "seed": seed,
        "hp": hp.to_dict(), "max_tokens": max_tokens,
        "binarize_e": binarize_e, "case_sensitive_uri": case_sensitive_uri,
    }
    if extra_config:
        config["extra"] = dict(sorted(extra_config.items()))
    return EvalReport(task=task.name, dataset=dataset, method=kind, blocks=blocks,
                      per_class=per_class, avg_f1=avg_f1, folds=folds, seed=seed,
                      config=config)


def block_combinations(universe: Sequence[str] = BLOCK_ORDER) -> list[tuple[str, ...]]:
    """All non-empty block subsets except {D} alone, ordered by size then
    block position (the published table's row order)."""
    universe = canonical_blocks(universe)
    combos = []
    for size in range(1, len(universe) + 1):
        for combo in itertools.combinations(universe, size):
            if combo == ("D",):
                continue
            combos.append(combo)
    return combos


def sweep(
    items: Sequence[CorpusItem],
    task: TaskSpec,
    kind: str,
    folds: int = 10,
    seed: int = 0,
    hp: Hyperparameters | None = None,
    dataset: str = "C",
    universe: Sequence[str] = BLOCK_ORDER,
    **cv_kwargs,
) -> list[EvalReport]:
    """One cross-validated report per feature combination (14 for A,U,E,D).

    multinomial_nb sweeps the A,U,E universe only (the verdict flag is
    excluded from its feature sets).
    """
    universe = canonical_blocks(universe)
    if kind == "multinomial_nb":
        universe = tuple(b for b in universe if b != "D")
    reports = []
    for blocks in block_combinations(universe):
        reports.append(cross_validate(items, task, kind, blocks, folds=folds,
                                      seed=seed, hp=hp, dataset=dataset, **cv_kwargs))
    return reports


def eval_seneca(verdicts: dict[str, SenecaVerdict],
                gold: Sequence[AggregatedLabel],
                task: TaskSpec,
                dataset: str = "C") -> EvalReport:
    """Metrics of the alignment verdicts against reference labels; entities
    without a verdict take the default (negative) side of the rule."""
    gold_sorted = sorted(gold, key=lambda a: a.entity)
    gold_labels = [lab.label for lab in gold_sorted]
    pred = []
    for lab in gold_sorted:
        v = verdicts.get(lab.entity)
        if v is None:
            pred.append(task.negative)
        elif task.name == "CI":
            pred.append("C" if v.class_or_instance == "C" else "I")
        else:
            pred.append("PO" if v.physical == "PO" else "NPO")
    per_class, avg_f1 = metrics(pred, gold_labels, labels=task.labels)
    config = {"task": task.name, "dataset": dataset, "method": "SENECA",
              "entities": len(gold_sorted)}
    return EvalReport(task=task.name, dataset=dataset, method="SENECA", blocks=(),
                      per_class=per_class, avg_f1=avg_f1, folds=0, seed=0,
                      config=config)


# -- rendering ----------------------------------------------------------------


def _fmt3(v: float) -> str:
    s = f"{v:.3f}"
    return s[1:] if s.startswith("0.") else s


def render_table(reports: Sequence[EvalReport]) -> str:
    """Aligned plain-text table, one row per report, in the published
    table's shape: feature-block marks then P/R/F1 per class and avg F1."""
    if not reports:
        return "(no reports)"
    task = TASKS[reports[0].task]
    pos, neg = task.positive, task.negative
    header = (["A", "U", "E", "D", "method"]
              + [f"P^{pos}", f"R^{pos}", f"F1^{pos}",
                 f"P^{neg}", f"R^{neg}", f"F1^{neg}", "avgF1"])
    rows = [header]
    for r in reports:
        marks = ["x" if b in r.blocks else "." for b in BLOCK_ORDER]
        pc, nc = r.per_class[pos], r.per_class[neg]
        rows.append(marks + [r.method]
                    + [_fmt3(v) for v in (pc.precision, pc.recall, pc.f1,
                                          nc.precision, nc.recall, nc.f1, r.avg_f1)])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    caption = (f"task {reports[0].task}  dataset {reports[0].dataset}"
               f"  folds {reports[0].folds}  seed {reports[0].seed}")
    lines.append(caption)
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)
