"""Trust-weighted aggregation of crowd judgments, agreement bucketing,
expert/crowd comparison and class balancing.

The agreement of an entity with a class is the trust mass of the workers
who chose that class divided by the trust mass of all workers who judged
the entity; the per-entity agreement values over all classes sum to 1.
Aggregated winners carry their agreement score, which downstream training
uses as the sample weight (expert labels carry weight 1.0).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SOURCE_CROWD = "crowd"
SOURCE_EXPERT = "expert"


@dataclass(frozen=True)
class Vote:
    worker_id: str
    label: str
    trust: float


@dataclass(frozen=True)
class JudgmentSet:
    entity: str
    votes: tuple[Vote, ...]

    def __post_init__(self):
        if not self.votes:
            raise ValueError(f"{self.entity}: a judgment set needs at least one vote")
        for v in self.votes:
            if not (0.0 < v.trust <= 1.0):
                raise ValueError(f"{self.entity}: trust {v.trust} outside (0, 1]")


@dataclass(frozen=True)
class AggregatedLabel:
    entity: str
    label: str
    agreement: float
    source: str = SOURCE_CROWD
    contested: bool = field(default=False, compare=False)


def agreement(judgments: JudgmentSet, label: str) -> float:
    """Trust mass for `label` over the total trust mass of the entity."""
    total = sum(v.trust for v in judgments.votes)
    if total <= 0.0:
        raise ValueError(f"{judgments.entity}: zero trust mass")
    return sum(v.trust for v in judgments.votes if v.label == label) / total


def agreements(judgments: JudgmentSet) -> dict[str, float]:
    total = sum(v.trust for v in judgments.votes)
    if total <= 0.0:
        raise ValueError(f"{judgments.entity}: zero trust mass")
    masses: dict[str, float] = {}
    for v in judgments.votes:
        masses[v.label] = masses.get(v.label, 0.0) + v.trust
    return {label: mass / total for label, mass in sorted(masses.items())}


def aggregate(judgments: JudgmentSet, source: str = SOURCE_CROWD) -> AggregatedLabel:
    """Winning class with its agreement; exact ties go to the
    lexicographically smaller label and are flagged contested."""
    byclass = agreements(judgments)
    best = max(byclass.values())
    winners = sorted(label for label, a in byclass.items() if a == best)
    contested = len(winners) > 1
    if contested:
        logger.warning("%s: contested aggregation (tie at %.4f between %s)",
                       judgments.entity, best, winners)
    return AggregatedLabel(judgments.entity, winners[0], best, source, contested)


def aggregate_all(judgment_sets: Iterable[JudgmentSet],
                  source: str = SOURCE_CROWD) -> list[AggregatedLabel]:
    out = [aggregate(j, source) for j in judgment_sets]
    return sorted(out, key=lambda a: a.entity)


def mean_agreement(labels: Iterable[AggregatedLabel]) -> float:
    """Macro-average of winning agreement over entities."""
    vals = [lab.agreement for lab in labels]
    if not vals:
        raise ValueError("no labels to average")
    return float(np.mean(vals))


def bucket(labels: Iterable[AggregatedLabel],
           threshold: float) -> tuple[list[AggregatedLabel], dict[str, int]]:
    """Keep entities whose winning agreement is >= threshold; count per class."""
    kept = sorted((lab for lab in labels if lab.agreement >= threshold),
                  key=lambda a: a.entity)
    counts: dict[str, int] = {}
    for lab in kept:
        counts[lab.label] = counts.get(lab.label, 0) + 1
    return kept, dict(sorted(counts.items()))


def render_bucket_table(labels: Sequence[AggregatedLabel],
                        thresholds: Sequence[float],
                        label_order: Sequence[str] | None = None) -> str:
    """Count table per agreement level, one row per threshold."""
    if label_order is None:
        label_order = sorted({lab.label for lab in labels})
    header = ["Agreement"] + [f"# {label}" for label in label_order] + ["Total"]
    rows = [header]
    for th in thresholds:
        kept, counts = bucket(labels, th)
        rows.append([f">= {th:g}"] + [str(counts.get(label, 0)) for label in label_order]
                    + [str(len(kept))])
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
                     for row in rows)


@dataclass(frozen=True)
class ComparisonResult:
    common: int
    matches: int
    rate: float
    disagreements: tuple[tuple[str, str, str], ...]  # (entity, label_a, label_b)


def compare(a: Iterable[AggregatedLabel], b: Iterable[AggregatedLabel]) -> ComparisonResult:
    """Agreement rate over the entity intersection, plus the disagreement list."""
    amap = {lab.entity: lab.label for lab in a}
    bmap = {lab.entity: lab.label for lab in b}
    common = sorted(amap.keys() & bmap.keys())
    if not common:
        raise ValueError("label sets share no entities")
    disagreements = tuple((e, amap[e], bmap[e]) for e in common if amap[e] != bmap[e])
    matches = len(common) - len(disagreements)
    return ComparisonResult(len(common), matches, matches / len(common), disagreements)


def balance(labels: Sequence[AggregatedLabel], strategy: str,
            seed: int = 0) -> list[AggregatedLabel]:
    """Equalize the two class counts by dropping majority-class entities only.

    random_drop picks the removals with a seeded RNG; low_agreement_drop
    removes ascending by agreement (ties by entity IRI).
    """
    byclass: dict[str, list[AggregatedLabel]] = {}
    for lab in labels:
        byclass.setdefault(lab.label, []).append(lab)
    if len(byclass) != 2:
        raise ValueError(f"balance needs exactly 2 classes, got {sorted(byclass)}")
    (l1, g1), (l2, g2) = sorted(byclass.items(), key=lambda kv: (len(kv[1]), kv[0]))
    minority, majority = g1, g2
    excess = len(majority) - len(minority)
    if excess == 0:
        return sorted(labels, key=lambda a: a.entity)
    majority = sorted(majority, key=lambda a: a.entity)
    if strategy == "random_drop":
        rng = np.random.default_rng(seed)
        drop_idx = set(rng.permutation(len(majority))[:excess].tolist())
        kept_major = [lab for i, lab in enumerate(majority) if i not in drop_idx]
    elif strategy == "low_agreement_drop":
        ranked = sorted(majority, key=lambda a: (a.agreement, a.entity))
        kept_major = ranked[excess:]
    else:
        raise ValueError(f"unknown balance strategy {strategy!r}")
    logger.info("balance: dropped %d of %d %r entities", excess, len(majority), l2)
    return sorted(minority + kept_major, key=lambda a: a.entity)


# -- file formats -------------------------------------------------------------


def load_judgments(path) -> list[JudgmentSet]:
    """``entity<TAB>worker_id<TAB>label<TAB>trust`` rows grouped by entity."""
    votes: dict[str, list[Vote]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for row_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{row_no}: expected 4 tab-separated fields")
            entity, worker, label, trust_s = parts
            try:
                trust = float(trust_s)
            except ValueError:
                raise ValueError(f"{path}:{row_no}: bad trust value {trust_s!r}") from None
            votes.setdefault(entity, []).append(Vote(worker, label, trust))
    return [JudgmentSet(e, tuple(votes[e])) for e in sorted(votes)]


def write_labels(path, labels: Iterable[AggregatedLabel]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for lab in sorted(labels, key=lambda a: a.entity):
            fh.write(f"{lab.entity}\t{lab.label}\t{lab.agreement!r}\t{lab.source}\n")


def load_labels(path, colmap: dict | None = None) -> list[AggregatedLabel]:
    """Read an aggregated-label file.

    Without a column map, the native format is expected:
    ``entity<TAB>label<TAB>agreement<TAB>source``. A column map adapts
    externally published files: ``{"delimiter": ",", "has_header": true,
    "entity": <name or index>, "label": ..., "agreement": ... (optional),
    "source": ... (optional), "label_map": {...}, "default_source": "crowd"}``.
    """
    if colmap is None:
        colmap = {"delimiter": "\t", "has_header": False,
                  "entity": 0, "label": 1, "agreement": 2, "source": 3}
    delim = colmap.get("delimiter", "\t")
    has_header = colmap.get("has_header", False)
    label_map = colmap.get("label_map", {})
    default_source = colmap.get("default_source", SOURCE_CROWD)
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delim)
        header = next(reader) if has_header else None

        def cell(row, key, default=None):
            sel = colmap.get(key)
            if sel is None:
                return default
            if isinstance(sel, int):
                return row[sel]
            if header is None:
                raise ValueError(f"column {sel!r} referenced by name but file has no header")
            return row[header.index(sel)]

        for row_no, row in enumerate(reader, start=2 if has_header else 1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            entity = cell(row, "entity")
            label = cell(row, "label")
            if entity is None or label is None:
                raise ValueError(f"{path}:{row_no}: missing entity or label column")
            label = label_map.get(label, label)
            agreement_s = cell(row, "agreement", "1.0")
            source = cell(row, "source", default_source)
            out.append(AggregatedLabel(entity, label, float(agreement_s), source))
    return sorted(out, key=lambda a: a.entity)


def as_expert(labels: Iterable[AggregatedLabel]) -> list[AggregatedLabel]:
    """Expert labels: agreement pinned to 1.0."""
    return [replace(lab, agreement=1.0, source=SOURCE_EXPERT) for lab in labels]
