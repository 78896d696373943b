"""Feature extraction: abstract bag-of-words (A), URI ID statistics (U),
incoming/outgoing property counts (E) and the alignment verdict flag (D).

Tokenization, used for both the dictionary and abstract matching: split on
Unicode whitespace, strip leading/trailing punctuation from each piece
(internal hyphens and apostrophes survive), no case folding, no stemming,
no stop-word removal. The token dictionary keeps the most frequent tokens
(default cap 1000), ordered by frequency descending with ties broken
lexicographically ascending; it is case-sensitive.
"""

from __future__ import annotations

import hashlib
import json
import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .alignment import CLASS, PHYSICAL, SenecaVerdict
from .store import EntityRecord

logger = logging.getLogger(__name__)

BLOCK_ORDER = ("A", "U", "E", "D")
TASK_CI = "CI"
TASK_PO = "PO"
DEFAULT_DICT_SIZE = 1000

EKey = tuple[str, str]  # ("in" | "out", predicate IRI)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Whitespace split, then strip punctuation off both ends of each piece."""
    tokens = []
    for piece in text.split():
        start, end = 0, len(piece)
        while start < end and _is_punct(piece[start]):
            start += 1
        while end > start and _is_punct(piece[end - 1]):
            end -= 1
        if end > start:
            tokens.append(piece[start:end])
    return tokens


@dataclass(frozen=True)
class TokenDictionary:
    tokens: tuple[str, ...]
    index: dict[str, int] = field(compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.tokens)

    def sha256(self) -> str:
        h = hashlib.sha256()
        for tok in self.tokens:
            h.update(tok.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()


def build_dictionary(abstracts: Iterable[str], max_tokens: int = DEFAULT_DICT_SIZE) -> TokenDictionary:
    """Most frequent tokens over all abstracts; error on an empty corpus."""
    counts: Counter[str] = Counter()
    seen_any = False
    for text in abstracts:
        seen_any = True
        counts.update(tokenize(text))
    if not seen_any or not counts:
        raise ValueError("cannot build a token dictionary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    tokens = tuple(tok for tok, _ in ranked[:max_tokens])
    return TokenDictionary(tokens, {tok: i for i, tok in enumerate(tokens)})


def abstract_features(abstract: str | None, dictionary: TokenDictionary,
                      entity: str = "?") -> np.ndarray:
    """0/1 vector: position i is 1 iff dictionary token i occurs in the abstract."""
    vec = np.zeros(len(dictionary), dtype=np.float64)
    if abstract is None:
        logger.warning("entity %s has no abstract; zero A block", entity)
        return vec
    for tok in tokenize(abstract):
        i = dictionary.index.get(tok)
        if i is not None:
            vec[i] = 1.0
    return vec


def uri_terms(iri: str) -> list[str]:
    """Underscore-separated terms of the URI ID (text after the last '/')."""
    local = iri.rsplit("/", 1)[-1]
    return [seg for seg in local.split("_") if seg]


def uri_features(iri: str, abstract: str | None,
                 case_sensitive: bool = True) -> tuple[int, int, int]:
    """(terms starting with a capital, terms found in the abstract, term count)."""
    terms = uri_terms(iri)
    if not terms:
        logger.warning("entity %s has an empty URI ID", iri)
        return (0, 0, 0)
    caps = sum(1 for t in terms if t[0].isupper())
    if abstract is None:
        in_abstract = 0
    else:
        toks = tokenize(abstract)
        if case_sensitive:
            tok_set = set(toks)
            in_abstract = sum(1 for t in terms if t in tok_set)
        else:
            tok_set = {t.casefold() for t in toks}
            in_abstract = sum(1 for t in terms if t.casefold() in tok_set)
    return (caps, in_abstract, len(terms))


def property_features(rec: EntityRecord) -> dict[EKey, int]:
    """Direction-tagged per-predicate degree counts."""
    out: dict[EKey, int] = {}
    for pred, n in rec.out_degree.items():
        out[("out", pred)] = n
    for pred, n in rec.in_degree.items():
        out[("in", pred)] = n
    return out


@dataclass(frozen=True)
class FeatureSpace:
    """Fixed column layout for a block combination, fit on a training corpus."""

    task: str
    blocks: tuple[str, ...]
    dictionary: TokenDictionary | None
    e_keys: tuple[EKey, ...]
    binarize_e: bool = False
    case_sensitive_uri: bool = True

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("blocks must be a non-empty subset of A,U,E,D")
        if tuple(b for b in BLOCK_ORDER if b in self.blocks) != self.blocks:
            raise ValueError("blocks must be in canonical A,U,E,D order without repeats")
        if "A" in self.blocks and self.dictionary is None:
            raise ValueError("A block requires a token dictionary")

    def block_size(self, block: str) -> int:
        if block == "A":
            return len(self.dictionary) if self.dictionary else 0
        if block == "U":
            return 3
        if block == "E":
            return len(self.e_keys)
        if block == "D":
            return 1
        raise ValueError(f"unknown block {block!r}")

    def block_slices(self) -> dict[str, slice]:
        slices = {}
        offset = 0
        for b in self.blocks:
            size = self.block_size(b)
            slices[b] = slice(offset, offset + size)
            offset += size
        return slices

    @property
    def n_cols(self) -> int:
        return sum(self.block_size(b) for b in self.blocks)

    def dense_columns(self) -> np.ndarray:
        """Column indices of the dense (U, D) blocks."""
        slices = self.block_slices()
        cols: list[int] = []
        for b in ("U", "D"):
            if b in slices:
                cols.extend(range(slices[b].start, slices[b].stop))
        return np.asarray(cols, dtype=np.intp)

    def sparse_columns(self) -> np.ndarray:
        """Column indices of the sparse (A, E) blocks."""
        slices = self.block_slices()
        cols: list[int] = []
        for b in ("A", "E"):
            if b in slices:
                cols.extend(range(slices[b].start, slices[b].stop))
        return np.asarray(cols, dtype=np.intp)

    def sha256(self) -> str:
        cached = self.__dict__.get("_sha256")
        if cached is not None:
            return cached
        blob = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False).encode("utf-8")
        digest = hashlib.sha256(blob).hexdigest()
        object.__setattr__(self, "_sha256", digest)
        return digest

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "blocks": list(self.blocks),
            "tokens": list(self.dictionary.tokens) if self.dictionary else None,
            "e_keys": [list(k) for k in self.e_keys],
            "binarize_e": self.binarize_e,
            "case_sensitive_uri": self.case_sensitive_uri,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpace":
        tokens = d.get("tokens")
        dictionary = None
        if tokens is not None:
            dictionary = TokenDictionary(tuple(tokens), {t: i for i, t in enumerate(tokens)})
        return cls(
            task=d["task"],
            blocks=tuple(d["blocks"]),
            dictionary=dictionary,
            e_keys=tuple((dirn, pred) for dirn, pred in d["e_keys"]),
            binarize_e=d.get("binarize_e", False),
            case_sensitive_uri=d.get("case_sensitive_uri", True),
        )


def canonical_blocks(blocks: Iterable[str]) -> tuple[str, ...]:
    """Normalize a block collection into canonical A,U,E,D order."""
    blockset = set(blocks)
    unknown = blockset - set(BLOCK_ORDER)
    if unknown:
        raise ValueError(f"unknown feature blocks: {sorted(unknown)}")
    if not blockset:
        raise ValueError("blocks must be non-empty")
    return tuple(b for b in BLOCK_ORDER if b in blockset)


def fit_feature_space(
    records: Sequence[EntityRecord],
    blocks: Iterable[str],
    task: str = TASK_CI,
    max_tokens: int = DEFAULT_DICT_SIZE,
    binarize_e: bool = False,
    case_sensitive_uri: bool = True,
) -> FeatureSpace:
    """Fit dictionary and E-key layout on a training corpus only."""
    blocks = canonical_blocks(blocks)
    dictionary = None
    if "A" in blocks:
        dictionary = build_dictionary(
            (r.abstract for r in records if r.abstract is not None), max_tokens)
    e_keys: tuple[EKey, ...] = ()
    if "E" in blocks:
        keys: set[EKey] = set()
        for r in records:
            keys.update(property_features(r))
        e_keys = tuple(sorted(keys))
    return FeatureSpace(task=task, blocks=blocks, dictionary=dictionary,
                        e_keys=e_keys, binarize_e=binarize_e,
                        case_sensitive_uri=case_sensitive_uri)


def assemble(rec: EntityRecord, verdict: SenecaVerdict | None,
             space: FeatureSpace) -> np.ndarray:
    """Concatenate the requested blocks for one entity, in A,U,E,D order."""
    parts: list[np.ndarray] = []
    for b in space.blocks:
        if b == "A":
            parts.append(abstract_features(rec.abstract, space.dictionary, rec.iri))
        elif b == "U":
            parts.append(np.asarray(
                uri_features(rec.iri, rec.abstract, space.case_sensitive_uri),
                dtype=np.float64))
        elif b == "E":
            vec = np.zeros(len(space.e_keys), dtype=np.float64)
            feats = property_features(rec)
            for i, key in enumerate(space.e_keys):
                n = feats.get(key)
                if n:
                    vec[i] = 1.0 if space.binarize_e else float(n)
            parts.append(vec)
        elif b == "D":
            if verdict is None:
                raise ValueError(f"entity {rec.iri}: D block requested but no verdict given")
            flag = (verdict.class_or_instance == CLASS if space.task == TASK_CI
                    else verdict.physical == PHYSICAL)
            parts.append(np.asarray([1.0 if flag else 0.0]))
    return np.concatenate(parts) if parts else np.zeros(0)


def assemble_matrix(
    records: Sequence[EntityRecord],
    verdicts: dict[str, SenecaVerdict] | None,
    space: FeatureSpace,
) -> np.ndarray:
    rows = [assemble(r, verdicts.get(r.iri) if verdicts else None, space)
            for r in records]
    return np.vstack(rows) if rows else np.zeros((0, space.n_cols))


# -- sparse text persistence ---------------------------------------------


def write_matrix(path, row_ids: Sequence[str], matrix: np.ndarray,
                 space: FeatureSpace) -> None:
    """``row_id<TAB>col:val ...`` rows under a JSON header line."""
    if len(row_ids) != matrix.shape[0]:
        raise ValueError("row_ids and matrix row count differ")
    header = {
        "format": "fd-matrix",
        "version": 1,
        "n_cols": int(matrix.shape[1]),
        "blocks": list(space.blocks),
        "block_sizes": {b: space.block_size(b) for b in space.blocks},
        "space_sha256": space.sha256(),
        "dictionary_sha256": space.dictionary.sha256() if space.dictionary else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#" + json.dumps(header, sort_keys=True) + "\n")
        for rid, row in zip(row_ids, matrix):
            cells = " ".join(f"{i}:{float(row[i])!r}" for i in np.flatnonzero(row))
            fh.write(f"{rid}\t{cells}\n" if cells else f"{rid}\t\n")


def read_matrix(path) -> tuple[dict, list[str], np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing matrix header line")
        header = json.loads(first[1:])
        n_cols = header["n_cols"]
        row_ids: list[str] = []
        rows: list[np.ndarray] = []
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            rid, _, rest = line.partition("\t")
            vec = np.zeros(n_cols, dtype=np.float64)
            if rest:
                for cell in rest.split():
                    col, _, val = cell.partition(":")
                    vec[int(col)] = float(val)
            row_ids.append(rid)
            rows.append(vec)
    matrix = np.vstack(rows) if rows else np.zeros((0, n_cols))
    return header, row_ids, matrix
