"""Cross-dataset alignment graph and the two alignment-path verdicts.

Nodes are (dataset, ident) pairs written in TSV files as ``dataset:ident``
(split on the first colon, so idents may themselves contain colons, e.g.
full IRIs). Canonical dataset tags: dbpedia, category, babelnet, wordnet,
wiktionary, omegawiki, yago, ontowordnet, tipalo, dul.

Verdict rules, evaluated over typed edges:

* class-vs-instance: an entity is a candidate class iff it is ALIGNED to a
  BabelNet node that is ALIGNED to a WordNet, OmegaWiki or Wiktionary node,
  or it HAS_TYPE the ``tipalo:owl:Class`` marker. Everything else defaults
  to instance. A WordNet endpoint carrying an explicit instance flag cannot
  witness the rule (manual instance annotations take precedence over the
  dictionary-membership heuristic for that endpoint; kept per-endpoint so
  adding edges can never flip a class verdict back to instance).
* physical-object: an entity is a candidate physical object iff one of its
  MEMBER_OF_CATEGORY categories is ALIGNED into the YAGO taxonomy from
  which some SUBCLASS_OF* descendant is ALIGNED to a WordNet/OntoWordNet
  node reaching ``dul:PhysicalObject`` via SUBCLASS_OF*, or it HAS_TYPE a
  Tipalo type reaching ``dul:PhysicalObject`` via SUBCLASS_OF*.

SUBCLASS_OF* is reflexive-transitive reachability; endpoint datasets are
constrained as above, intermediate hops are not. SUBCLASS_OF cycles are
collapsed by strongly-connected-component condensation at load time (with
a diagnostic), which preserves reachability. Positive verdicts retain a
witness path replayable against the graph.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .store import EntityStore

logger = logging.getLogger(__name__)

Node = tuple[str, str]
Edge = tuple[Node, str, Node]

ALIGNED = "ALIGNED"
SUBCLASS_OF = "SUBCLASS_OF"
HAS_TYPE = "HAS_TYPE"
MEMBER_OF_CATEGORY = "MEMBER_OF_CATEGORY"
INSTANCE_FLAG = "INSTANCE_FLAG"
EDGE_TYPES = (ALIGNED, SUBCLASS_OF, HAS_TYPE, MEMBER_OF_CATEGORY)

DUL_PHYSICAL_OBJECT: Node = ("dul", "PhysicalObject")
TIPALO_OWL_CLASS: Node = ("tipalo", "owl:Class")
CLASS_LEXICON_DATASETS = frozenset({"wordnet", "omegawiki", "wiktionary"})
PO_LEXICON_DATASETS = frozenset({"wordnet", "ontowordnet"})

CLASS = "C"
INSTANCE = "I"
PHYSICAL = "PO"
NON_PHYSICAL = "NPO"


def parse_node(text: str) -> Node:
    dataset, sep, ident = text.partition(":")
    if not sep or not dataset or not ident:
        raise ValueError(f"node {text!r} is not of the form dataset:ident")
    return (dataset, ident)


def format_node(node: Node) -> str:
    return f"{node[0]}:{node[1]}"


@dataclass(frozen=True)
class SenecaVerdict:
    entity: str
    class_or_instance: str                  # CLASS or INSTANCE
    physical: str                           # PHYSICAL or NON_PHYSICAL
    class_witness: tuple[Edge, ...] | None = None
    physical_witness: tuple[Edge, ...] | None = None


class AlignmentGraph:
    """Typed directed graph over opaque dataset-tagged nodes.

    Mutable while loading; ``finalize()`` symmetrizes ALIGNED edges
    (optional), condenses SUBCLASS_OF cycles and builds the query caches.
    """

    def __init__(self) -> None:
        self.nodes: set[Node] = set()
        self.edges: dict[str, set[tuple[Node, Node]]] = {t: set() for t in EDGE_TYPES}
        self.instance_flags: set[Node] = set()
        self.collapsed: list[tuple[Node, ...]] = []
        self._canon: dict[Node, Node] = {}
        self._out: dict[str, dict[Node, tuple[Node, ...]]] = {}
        self._finalized = False
        # physical-object query caches
        self._reach_po: set[Node] = set()
        self._po_parent: dict[Node, Node] = {}
        self._yago_hubs: dict[Node, Node] = {}
        self._pre_hub: set[Node] = set()
        self._hub_parent: dict[Node, Node] = {}

    # -- construction --------------------------------------------------

    def add_node(self, node: Node) -> None:
        self.nodes.add(node)

    def add_edge(self, src: Node, etype: str, dst: Node) -> None:
        if etype == INSTANCE_FLAG:
            self.nodes.add(src)
            self.instance_flags.add(src)
            return
        if etype not in self.edges:
            raise ValueError(f"unknown edge type {etype!r}")
        self.nodes.add(src)
        self.nodes.add(dst)
        self.edges[etype].add((src, dst))

    def finalize(self, symmetrize_aligned: bool = True) -> None:
        if symmetrize_aligned:
            self.edges[ALIGNED] |= {(b, a) for (a, b) in self.edges[ALIGNED]}
        self._condense_subclass_cycles()
        self._build_adjacency()
        self._build_po_caches()
        self._finalized = True

    def canon(self, node: Node) -> Node:
        return self._canon.get(node, node)

    def _condense_subclass_cycles(self) -> None:
        sccs = _tarjan_sccs(self.nodes, _adjacency(self.edges[SUBCLASS_OF]))
        canon: dict[Node, Node] = {}
        for comp in sccs:
            if len(comp) > 1:
                rep = min(comp)
                group = tuple(sorted(comp))
                self.collapsed.append(group)
                logger.warning("collapsed SUBCLASS_OF cycle into %s: %s",
                               format_node(rep), [format_node(n) for n in group])
                for n in comp:
                    canon[n] = rep
        if not canon:
            return
        self._canon = canon
        self.nodes = {canon.get(n, n) for n in self.nodes}
        self.instance_flags = {canon.get(n, n) for n in self.instance_flags}
        for etype, pairs in self.edges.items():
            remapped = set()
            for a, b in pairs:
                a2, b2 = canon.get(a, a), canon.get(b, b)
                if a2 != b2:
                    remapped.add((a2, b2))
            self.edges[etype] = remapped

    def _build_adjacency(self) -> None:
        self._out = {etype: _adjacency(pairs) for etype, pairs in self.edges.items()}

    def _build_po_caches(self) -> None:
        root = self.canon(DUL_PHYSICAL_OBJECT)
        rev_sub = _adjacency({(b, a) for (a, b) in self.edges[SUBCLASS_OF]})
        if root in self.nodes:
            self._reach_po, self._po_parent = _reverse_bfs([root], rev_sub)
        wn_targets = {n for n in self._reach_po if n[0] in PO_LEXICON_DATASETS}
        hubs: dict[Node, Node] = {}
        for y, w in sorted(self.edges[ALIGNED]):
            if y[0] == "yago" and w in wn_targets and y not in hubs:
                hubs[y] = w
        self._yago_hubs = hubs
        self._pre_hub, self._hub_parent = _reverse_bfs(sorted(hubs), rev_sub)

    # -- introspection --------------------------------------------------

    def stats(self) -> dict:
        per_dataset: dict[str, int] = {}
        for ds, _ in self.nodes:
            per_dataset[ds] = per_dataset.get(ds, 0) + 1
        return {
            "nodes": len(self.nodes),
            "nodes_per_dataset": dict(sorted(per_dataset.items())),
            "edges": {t: len(self.edges[t]) for t in EDGE_TYPES},
            "instance_flags": len(self.instance_flags),
            "collapsed_cycles": len(self.collapsed),
        }

    def _neighbors(self, etype: str, node: Node) -> tuple[Node, ...]:
        return self._out.get(etype, {}).get(node, ())

    # -- verdict rules --------------------------------------------------

    def class_witness(self, entity_iri: str) -> tuple[Edge, ...] | None:
        """Witness path for the candidate-class rule, or None."""
        assert self._finalized, "finalize() the graph before querying"
        e = self.canon(("dbpedia", entity_iri))
        for b in self._neighbors(ALIGNED, e):
            if b[0] != "babelnet":
                continue
            for n in self._neighbors(ALIGNED, b):
                if n[0] not in CLASS_LEXICON_DATASETS:
                    continue
                if n[0] == "wordnet" and n in self.instance_flags:
                    continue
                return ((e, ALIGNED, b), (b, ALIGNED, n))
        marker = self.canon(TIPALO_OWL_CLASS)
        for t in self._neighbors(HAS_TYPE, e):
            if t == marker:
                return ((e, HAS_TYPE, t),)
        return None

    def physical_witness(self, entity_iri: str) -> tuple[Edge, ...] | None:
        """Witness path for the candidate-physical-object rule, or None."""
        assert self._finalized, "finalize() the graph before querying"
        e = self.canon(("dbpedia", entity_iri))
        for c in self._neighbors(MEMBER_OF_CATEGORY, e):
            if c[0] != "category":
                continue
            for y in self._neighbors(ALIGNED, c):
                if y[0] != "yago" or y not in self._pre_hub:
                    continue
                path = [(e, MEMBER_OF_CATEGORY, c), (c, ALIGNED, y)]
                hub = _walk_parents(y, self._hub_parent, path)
                w = self._yago_hubs[hub]
                path.append((hub, ALIGNED, w))
                _walk_parents(w, self._po_parent, path)
                return tuple(path)
        for t in self._neighbors(HAS_TYPE, e):
            if t[0] == "tipalo" and t in self._reach_po:
                path = [(e, HAS_TYPE, t)]
                _walk_parents(t, self._po_parent, path)
                return tuple(path)
        return None


def _walk_parents(node: Node, parents: dict[Node, Node], path: list[Edge]) -> Node:
    """Append the cached SUBCLASS_OF chain from node to its BFS seed."""
    cur = node
    while True:
        nxt = parents[cur]
        if nxt == cur:
            return cur
        path.append((cur, SUBCLASS_OF, nxt))
        cur = nxt


def _adjacency(pairs: Iterable[tuple[Node, Node]]) -> dict[Node, tuple[Node, ...]]:
    adj: dict[Node, list[Node]] = {}
    for a, b in pairs:
        adj.setdefault(a, []).append(b)
    return {a: tuple(sorted(bs)) for a, bs in adj.items()}


def _reverse_bfs(
    seeds: list[Node], rev_adj: dict[Node, tuple[Node, ...]]
) -> tuple[set[Node], dict[Node, Node]]:
    """Multi-source BFS; parents point one hop toward the owning seed."""
    parent: dict[Node, Node] = {s: s for s in seeds}
    queue = deque(seeds)
    while queue:
        cur = queue.popleft()
        for prev in rev_adj.get(cur, ()):
            if prev not in parent:
                parent[prev] = cur
                queue.append(prev)
    return set(parent), parent


def _tarjan_sccs(nodes: set[Node], adj: dict[Node, tuple[Node, ...]]) -> list[list[Node]]:
    """Iterative Tarjan strongly-connected components."""
    index: dict[Node, int] = {}
    lowlink: dict[Node, int] = {}
    on_stack: set[Node] = set()
    stack: list[Node] = []
    sccs: list[list[Node]] = []
    counter = 0

    for root in sorted(nodes):
        if root in index:
            continue
        work: list[tuple[Node, int]] = [(root, 0)]
        while work:
            node, child_i = work[-1]
            if child_i == 0:
                index[node] = lowlink[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            advanced = False
            children = adj.get(node, ())
            for i in range(child_i, len(children)):
                child = children[i]
                if child not in index:
                    work[-1] = (node, i + 1)
                    work.append((child, 0))
                    advanced = True
                    break
                if child in on_stack:
                    lowlink[node] = min(lowlink[node], index[child])
            if advanced:
                continue
            work.pop()
            if lowlink[node] == index[node]:
                comp = []
                while True:
                    n = stack.pop()
                    on_stack.discard(n)
                    comp.append(n)
                    if n == node:
                        break
                sccs.append(comp)
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
    return sccs


# -- module-level operations -------------------------------------------


def load_alignments(paths: Iterable, symmetrize_aligned: bool = True) -> AlignmentGraph:
    """Build an AlignmentGraph from ``src<TAB>edge_type<TAB>dst`` TSV files.

    Duplicate rows deduplicate. Unknown edge types abort with the row
    number. ``INSTANCE_FLAG`` rows mark the src node as a manually
    annotated instance (dst is conventionally the same node).
    """
    g = AlignmentGraph()
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            for row_no, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n").rstrip("\r")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{row_no}: expected 3 tab-separated fields")
                src, etype, dst = parts
                if etype not in EDGE_TYPES and etype != INSTANCE_FLAG:
                    raise ValueError(f"{path}:{row_no}: unknown edge type {etype!r}")
                g.add_edge(parse_node(src), etype, parse_node(dst))
    g.finalize(symmetrize_aligned=symmetrize_aligned)
    stats = g.stats()
    logger.info("alignment graph: %d nodes, edges %s", stats["nodes"], stats["edges"])
    return g


def seneca_class_instance(entity_iri: str, g: AlignmentGraph) -> str:
    """CLASS if an alignment path into a dictionary resource exists, else INSTANCE."""
    return CLASS if g.class_witness(entity_iri) is not None else INSTANCE


def seneca_physical_object(entity_iri: str, g: AlignmentGraph) -> str:
    """PHYSICAL if a taxonomy path to dul:PhysicalObject exists, else NON_PHYSICAL."""
    return PHYSICAL if g.physical_witness(entity_iri) is not None else NON_PHYSICAL


def seneca_verdict(entity_iri: str, g: AlignmentGraph) -> SenecaVerdict:
    cw = g.class_witness(entity_iri)
    pw = g.physical_witness(entity_iri)
    return SenecaVerdict(
        entity=entity_iri,
        class_or_instance=CLASS if cw is not None else INSTANCE,
        physical=PHYSICAL if pw is not None else NON_PHYSICAL,
        class_witness=cw,
        physical_witness=pw,
    )


def seneca_batch(store: EntityStore, g: AlignmentGraph) -> dict[str, SenecaVerdict]:
    """One verdict per classifiable (non-blank) store entity."""
    verdicts = {rec.iri: seneca_verdict(rec.iri, g) for rec in store.classifiable()}
    summary = summarize_verdicts(verdicts)
    logger.info("seneca: %(entities)d entities, %(class)d candidate classes, "
                "%(po)d candidate physical objects", summary)
    return verdicts


def summarize_verdicts(verdicts: dict[str, SenecaVerdict]) -> dict:
    return {
        "entities": len(verdicts),
        "class": sum(v.class_or_instance == CLASS for v in verdicts.values()),
        "instance": sum(v.class_or_instance == INSTANCE for v in verdicts.values()),
        "po": sum(v.physical == PHYSICAL for v in verdicts.values()),
        "npo": sum(v.physical == NON_PHYSICAL for v in verdicts.values()),
    }


def write_verdicts(path, verdicts: dict[str, SenecaVerdict]) -> None:
    """Emit ``iri<TAB>C|I<TAB>PO|NPO`` sorted by IRI."""
    with open(path, "w", encoding="utf-8") as fh:
        for iri in sorted(verdicts):
            v = verdicts[iri]
            fh.write(f"{iri}\t{v.class_or_instance}\t{v.physical}\n")


def read_verdicts(path) -> dict[str, SenecaVerdict]:
    verdicts = {}
    with open(path, "r", encoding="utf-8") as fh:
        for row_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[1] not in (CLASS, INSTANCE) \
                    or parts[2] not in (PHYSICAL, NON_PHYSICAL):
                raise ValueError(f"{path}:{row_no}: malformed verdict row")
            verdicts[parts[0]] = SenecaVerdict(parts[0], parts[1], parts[2])
    return verdicts


def write_witness_log(path, verdicts: dict[str, SenecaVerdict]) -> None:
    """JSONL audit log of witness paths for positive verdicts."""
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for iri in sorted(verdicts):
            v = verdicts[iri]
            entry = {"entity": iri, "class_or_instance": v.class_or_instance,
                     "physical": v.physical}
            for key, wit in (("class_witness", v.class_witness),
                             ("physical_witness", v.physical_witness)):
                if wit is not None:
                    entry[key] = [[format_node(a), t, format_node(b)] for a, t, b in wit]
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
