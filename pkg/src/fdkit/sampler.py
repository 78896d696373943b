"""Dataset-construction sampling: nearest-neighbor expansion over dense
entity vectors, cleanup, and place-name enrichment.

Neighbor retrieval is cosine-based over a fixed-dimension vector store
(all vectors non-zero). Sample cleanup drops redirect sources and
disambiguation pages (recognized by their marker predicates in the entity
store) and entities without abstracts; redirect targets survive because
only sources carry the marker predicate. Place enrichment adds store
entities whose ID-derived label matches a place name (case-insensitive) or
that belong to the configured places category. The module is fully
deterministic: no RNG anywhere.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .store import EntityStore

logger = logging.getLogger(__name__)

_MAGIC = b"FDVS"
_VERSION = 1

DEFAULT_REDIRECT_PRED = "http://dbpedia.org/ontology/wikiPageRedirects"
DEFAULT_DISAMBIG_PRED = "http://dbpedia.org/ontology/wikiPageDisambiguates"
DEFAULT_PLACES_CATEGORY = "http://dbpedia.org/resource/Category:Places"


@dataclass
class SamplerConfig:
    redirect_pred: str = DEFAULT_REDIRECT_PRED
    disambig_pred: str = DEFAULT_DISAMBIG_PRED
    places_category: str = DEFAULT_PLACES_CATEGORY


class VectorStore:
    """Entity IRI -> dense vector of one fixed dimension, all non-zero."""

    def __init__(self, vectors: dict[str, np.ndarray]):
        if not vectors:
            raise ValueError("vector store is empty")
        dims = {v.shape for v in vectors.values()}
        if len(dims) != 1 or len(next(iter(dims))) != 1:
            raise ValueError(f"inconsistent vector dimensionality: {sorted(dims)}")
        self.ids = sorted(vectors)
        self.matrix = np.vstack([vectors[i] for i in self.ids]).astype(np.float64)
        self.norms = np.linalg.norm(self.matrix, axis=1)
        if np.any(self.norms == 0.0):
            zero = self.ids[int(np.argmin(self.norms))]
            raise ValueError(f"zero vector for {zero}: cosine undefined")
        self._index = {iri: i for i, iri in enumerate(self.ids)}
        self.dim = self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, iri: str) -> bool:
        return iri in self._index

    def get(self, iri: str) -> np.ndarray:
        return self.matrix[self._index[iri]]

    # -- persistence --------------------------------------------------

    @classmethod
    def load_text(cls, path) -> "VectorStore":
        """``iri<TAB>v1 v2 ... vd`` rows."""
        vectors = {}
        with open(path, "r", encoding="utf-8") as fh:
            for row_no, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                iri, _, rest = line.partition("\t")
                if not rest:
                    raise ValueError(f"{path}:{row_no}: missing vector values")
                vectors[iri] = np.asarray([float(v) for v in rest.split()])
        return cls(vectors)

    def save_text(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, iri in enumerate(self.ids):
                vals = " ".join(repr(float(v)) for v in self.matrix[i])
                fh.write(f"{iri}\t{vals}\n")

    @classmethod
    def load_binary(cls, path) -> "VectorStore":
        with open(path, "rb") as fh:
            if fh.read(4) != _MAGIC:
                raise ValueError(f"{path}: not a vector store file")
            (version,) = struct.unpack("<I", fh.read(4))
            if version != _VERSION:
                raise ValueError(f"{path}: unsupported version {version}")
            (dim,) = struct.unpack("<I", fh.read(4))
            (count,) = struct.unpack("<Q", fh.read(8))
            vectors = {}
            for _ in range(count):
                (ln,) = struct.unpack("<I", fh.read(4))
                iri = fh.read(ln).decode("utf-8")
                vec = np.frombuffer(fh.read(8 * dim), dtype="<f8").copy()
                vectors[iri] = vec
        return cls(vectors)

    def save_binary(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", _VERSION))
            fh.write(struct.pack("<I", self.dim))
            fh.write(struct.pack("<Q", len(self.ids)))
            for i, iri in enumerate(self.ids):
                data = iri.encode("utf-8")
                fh.write(struct.pack("<I", len(data)))
                fh.write(data)
                fh.write(self.matrix[i].astype("<f8").tobytes())


def load_vectors(path) -> VectorStore:
    """Dispatch on content: binary magic or the text format."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == _MAGIC:
        return VectorStore.load_binary(path)
    return VectorStore.load_text(path)


def nearest_neighbors(seed: str, store: VectorStore, k: int,
                      min_cos: float = 0.0) -> list[tuple[str, float]]:
    """Top-k neighbors of the seed by cosine, descending, ties by IRI;
    entries below min_cos are dropped and the seed itself is excluded."""
    if seed not in store:
        raise ValueError(f"seed entity {seed} not in vector store")
    if k < 1:
        raise ValueError("k must be >= 1")
    q = store.get(seed)
    cos = (store.matrix @ q) / (store.norms * np.linalg.norm(q))
    ranked = sorted(
        ((iri, float(c)) for iri, c in zip(store.ids, cos)
         if iri != seed and c >= min_cos),
        key=lambda ic: (-ic[1], ic[0]))
    return ranked[:k]


def label_from_iri(iri: str) -> str:
    """ID-derived label: text after the final '/', underscores as spaces."""
    return iri.rsplit("/", 1)[-1].replace("_", " ")


def _passes_cleanup(rec, cfg: SamplerConfig) -> bool:
    if rec is None or rec.abstract is None:
        return False
    if cfg.redirect_pred in rec.out_degree:
        return False
    if cfg.disambig_pred in rec.out_degree:
        return False
    return True


def build_sample(
    seeds: Sequence[str],
    vectors: VectorStore,
    store: EntityStore,
    places: Iterable[str] = (),
    k: int = 100,
    min_cos: float = 0.6,
    config: SamplerConfig | None = None,
) -> list[str]:
    """Union of per-seed neighbor sets, cleaned up, plus place matches.

    Cleanup drops redirect sources, disambiguation pages and entities
    without abstracts. Place matches come from the whole entity store:
    ID-derived label equal (case-insensitively) to a place name, or
    membership in the configured places category.
    """
    cfg = config or SamplerConfig()
    pool: set[str] = set()
    for seed in seeds:
        pool.update(iri for iri, _ in nearest_neighbors(seed, vectors, k, min_cos))
    sample = {iri for iri in pool if _passes_cleanup(store.get(iri), cfg)}
    dropped = len(pool) - len(sample)

    place_names = {name.casefold() for name in places}
    added = 0
    for rec in store.classifiable():
        if rec.iri in sample or not _passes_cleanup(rec, cfg):
            continue
        if (label_from_iri(rec.iri).casefold() in place_names
                or cfg.places_category in rec.categories):
            sample.add(rec.iri)
            added += 1
    logger.info("sample: %d neighbors (%d dropped in cleanup), %d place entities added",
                len(pool), dropped, added)
    return sorted(sample)


def load_names(path) -> list[str]:
    """One name per line; blank lines and # comments skipped."""
    names = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line and not line.startswith("#"):
                names.append(line)
    return names
