"""Entity store: per-entity abstracts, property-degree tallies, categories.

Built by streaming triples once. Degree tallies count link triples only
(object is an IRI or blank node), so that total out-degree mass equals
total in-degree mass equals the number of link triples; literal-valued
statements can additionally be counted into out-degrees via
``IngestConfig.count_literal_objects``. Literals themselves never become
records. Blank nodes are tallied like IRIs but are not classification
targets.

The store serializes to a sorted, length-prefixed binary file (stable
bytes for identical input) plus a JSON sidecar of ingest statistics.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .ntriples import Diagnostic, Literal, Triple, open_dump, parse_ntriples

logger = logging.getLogger(__name__)

DEFAULT_ABSTRACT_PRED = "http://dbpedia.org/ontology/abstract"
DEFAULT_CATEGORY_PRED = "http://purl.org/dc/terms/subject"

_MAGIC = b"FDES"
_VERSION = 1


@dataclass
class IngestConfig:
    abstract_pred: str = DEFAULT_ABSTRACT_PRED
    category_pred: str = DEFAULT_CATEGORY_PRED
    lang: str | None = "en"           # None keeps the first abstract of any language
    count_literal_objects: bool = False


@dataclass
class EntityRecord:
    iri: str
    abstract: str | None = None
    out_degree: dict[str, int] = field(default_factory=dict)
    in_degree: dict[str, int] = field(default_factory=dict)
    categories: set[str] = field(default_factory=set)

    @property
    def is_blank(self) -> bool:
        return self.iri.startswith("_:")

    def local_id(self) -> str:
        """Text after the final '/' of the IRI (the URI ID)."""
        return self.iri.rsplit("/", 1)[-1]


@dataclass
class IngestStats:
    triples: int = 0
    link_triples: int = 0
    literal_triples: int = 0
    abstracts: int = 0
    duplicate_abstracts: int = 0
    empty_abstracts: int = 0
    category_links: int = 0
    malformed_lines: int = 0
    records: int = 0

    def to_dict(self) -> dict:
        return dict(sorted(self.__dict__.items()))


class EntityStore:
    """Immutable-after-build mapping from node id (IRI or blank label) to record."""

    def __init__(self, records: dict[str, EntityRecord] | None = None):
        self.records: dict[str, EntityRecord] = records if records is not None else {}

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, iri: str) -> bool:
        return iri in self.records

    def get(self, iri: str) -> EntityRecord | None:
        return self.records.get(iri)

    def __getitem__(self, iri: str) -> EntityRecord:
        return self.records[iri]

    def entities(self) -> Iterator[EntityRecord]:
        """Records in sorted node-id order."""
        for iri in sorted(self.records):
            yield self.records[iri]

    def classifiable(self) -> Iterator[EntityRecord]:
        """IRI-keyed records only (blank nodes carry no URI ID)."""
        for rec in self.entities():
            if not rec.is_blank:
                yield rec

    # -- persistence --------------------------------------------------

    def save(self, path, stats: IngestStats | None = None) -> None:
        """Write the sorted length-prefixed binary file; sidecar at <path>.json."""
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", _VERSION))
            fh.write(struct.pack("<Q", len(self.records)))
            for key in sorted(self.records):
                rec = self.records[key]
                _write_str(fh, key)
                has_abstract = rec.abstract is not None
                fh.write(struct.pack("<B", 1 if has_abstract else 0))
                if has_abstract:
                    _write_str(fh, rec.abstract)
                _write_degree(fh, rec.out_degree)
                _write_degree(fh, rec.in_degree)
                cats = sorted(rec.categories)
                fh.write(struct.pack("<I", len(cats)))
                for c in cats:
                    _write_str(fh, c)
        if stats is not None:
            sidecar = str(path) + ".json"
            with open(sidecar, "w", encoding="utf-8") as fh:
                json.dump(stats.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")

    @classmethod
    def load(cls, path) -> "EntityStore":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _MAGIC:
                raise ValueError(f"{path}: not an entity store file")
            (version,) = struct.unpack("<I", fh.read(4))
            if version != _VERSION:
                raise ValueError(f"{path}: unsupported store version {version}")
            (count,) = struct.unpack("<Q", fh.read(8))
            records = {}
            for _ in range(count):
                key = _read_str(fh)
                (flags,) = struct.unpack("<B", fh.read(1))
                abstract = _read_str(fh) if flags & 1 else None
                out_deg = _read_degree(fh)
                in_deg = _read_degree(fh)
                (ncats,) = struct.unpack("<I", fh.read(4))
                cats = {_read_str(fh) for _ in range(ncats)}
                records[key] = EntityRecord(key, abstract, out_deg, in_deg, cats)
        return cls(records)


def _write_str(fh, s: str) -> None:
    data = s.encode("utf-8")
    fh.write(struct.pack("<I", len(data)))
    fh.write(data)


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", fh.read(4))
    return fh.read(n).decode("utf-8")


def _write_degree(fh, deg: dict[str, int]) -> None:
    fh.write(struct.pack("<I", len(deg)))
    for pred in sorted(deg):
        _write_str(fh, pred)
        fh.write(struct.pack("<Q", deg[pred]))


def _read_degree(fh) -> dict[str, int]:
    (n,) = struct.unpack("<I", fh.read(4))
    out = {}
    for _ in range(n):
        pred = _read_str(fh)
        (count,) = struct.unpack("<Q", fh.read(8))
        out[pred] = count
    return out


def build_entity_store(
    triples: Iterable[Triple],
    config: IngestConfig | None = None,
    stats: IngestStats | None = None,
) -> EntityStore:
    """Materialize an EntityStore from a triple stream in one pass."""
    cfg = config or IngestConfig()
    st = stats if stats is not None else IngestStats()
    records: dict[str, EntityRecord] = {}

    def rec(node: str) -> EntityRecord:
        r = records.get(node)
        if r is None:
            r = records[node] = EntityRecord(node)
        return r

    want_lang = cfg.lang.lower() if cfg.lang else None
    for t in triples:
        st.triples += 1
        subj = rec(t.subject)
        if isinstance(t.obj, Literal):
            st.literal_triples += 1
            if cfg.count_literal_objects:
                subj.out_degree[t.predicate] = subj.out_degree.get(t.predicate, 0) + 1
            if t.predicate == cfg.abstract_pred:
                lit = t.obj
                if want_lang is not None and (lit.lang or "").lower() != want_lang:
                    continue
                if not lit.lexical:
                    st.empty_abstracts += 1
                    logger.warning("empty abstract for %s ignored", t.subject)
                    continue
                if subj.abstract is None:
                    subj.abstract = lit.lexical
                    st.abstracts += 1
                else:
                    st.duplicate_abstracts += 1
                    logger.warning("duplicate abstract for %s, keeping first", t.subject)
        else:
            st.link_triples += 1
            obj = rec(t.obj)
            subj.out_degree[t.predicate] = subj.out_degree.get(t.predicate, 0) + 1
            obj.in_degree[t.predicate] = obj.in_degree.get(t.predicate, 0) + 1
            if t.predicate == cfg.category_pred:
                subj.categories.add(t.obj)
                st.category_links += 1

    st.records = len(records)
    return EntityStore(records)


def ingest_files(
    paths: Iterable,
    config: IngestConfig | None = None,
    strict: bool = False,
) -> tuple[EntityStore, IngestStats]:
    """Stream one or more N-Triples files (optionally .gz) into a store."""
    stats = IngestStats()

    def stream() -> Iterator[Triple]:
        for path in paths:
            diags: list[Diagnostic] = []
            with open_dump(path) as fh:
                yield from parse_ntriples(fh, strict=strict, diagnostics=diags)
            stats.malformed_lines += len(diags)

    store = build_entity_store(stream(), config, stats)
    return store, stats
