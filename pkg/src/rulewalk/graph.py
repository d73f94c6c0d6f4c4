"""Typed knowledge graph: loading, inverse augmentation and the agent's action space."""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    AlreadyAugmented,
    EmptyInput,
    MalformedRow,
    MissingTypeMapping,
    UnknownEntity,
)

INVERSE_SUFFIX = "^-1"
STAY_NAME = "STAY"


class Action(NamedTuple):
    relation: int
    target: int


@dataclass(frozen=True)
class Vocabulary:
    """Bijective name <-> id maps for entities, relations and types."""

    entities: tuple[str, ...]
    relations: tuple[str, ...]
    types: tuple[str, ...]

    def __post_init__(self):
        for label, names in (("entity", self.entities), ("relation", self.relations), ("type", self.types)):
            if len(set(names)) != len(names):
                raise MalformedRow(f"duplicate {label} names in vocabulary")
        object.__setattr__(self, "_entity_ids", {n: i for i, n in enumerate(self.entities)})
        object.__setattr__(self, "_relation_ids", {n: i for i, n in enumerate(self.relations)})
        object.__setattr__(self, "_type_ids", {n: i for i, n in enumerate(self.types)})

    def entity_id(self, name: str) -> int:
        try:
            return self._entity_ids[name]
        except KeyError:
            raise UnknownEntity(name) from None

    def relation_id(self, name: str) -> int:
        return self._relation_ids[name]

    def type_id(self, name: str) -> int:
        return self._type_ids[name]

    def has_relation(self, name: str) -> bool:
        return name in self._relation_ids

    def has_type(self, name: str) -> bool:
        return name in self._type_ids

    def digest(self) -> str:
        h = hashlib.sha256()
        for section in (self.entities, self.relations, self.types):
            h.update(b"\x1e")
            for name in section:
                h.update(name.encode("utf-8"))
                h.update(b"\x1f")
        return h.hexdigest()


class KnowledgeGraph:
    """Immutable directed multigraph with CSR adjacency sorted by (head, relation, tail).

    Relations ``0 .. n_base_relations-1`` are the loaded ones; after augmentation the
    inverse of ``r`` is ``r + n_base_relations``. The relation id ``num_relations`` is
    reserved for STAY and never appears on a stored edge.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        heads,
        relations,
        tails,
        entity_types,
        *,
        augmented: bool = False,
        n_base_relations: int | None = None,
        duplicates_removed: int = 0,
    ):
        heads = np.asarray(heads, dtype=np.int64)
        relations = np.asarray(relations, dtype=np.int64)
        tails = np.asarray(tails, dtype=np.int64)
        order = np.lexsort((tails, relations, heads))
        self.vocab = vocab
        self.heads = heads[order]
        self.relations = relations[order]
        self.tails = tails[order]
        self.entity_types = np.asarray(entity_types, dtype=np.int64)
        self.augmented = augmented
        self.n_base_relations = len(vocab.relations) if n_base_relations is None else n_base_relations
        self.duplicates_removed = duplicates_removed
        counts = np.bincount(self.heads, minlength=self.num_entities)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self._keys = self._encode(self.heads, self.relations, self.tails)
        for arr in (self.heads, self.relations, self.tails, self.entity_types, self.indptr, self._keys):
            arr.setflags(write=False)

    # -- sizes -------------------------------------------------------------
    @property
    def num_entities(self) -> int:
        return len(self.vocab.entities)

    @property
    def num_relations(self) -> int:
        return len(self.vocab.relations)

    @property
    def num_types(self) -> int:
        return len(self.vocab.types)

    @property
    def num_edges(self) -> int:
        return len(self.heads)

    @property
    def stay_relation(self) -> int:
        return self.num_relations

    # -- lookups -----------------------------------------------------------
    def _encode(self, h, r, t):
        return (np.asarray(h, np.int64) * (self.num_relations + 1) + np.asarray(r, np.int64)) * self.num_entities + np.asarray(t, np.int64)

    def has_edges(self, h, r, t) -> np.ndarray:
        keys = self._encode(h, r, t)
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, max(len(self._keys) - 1, 0))
        if len(self._keys) == 0:
            return np.zeros(np.shape(keys), dtype=bool)
        return self._keys[pos] == keys

    def has_edge(self, h: int, r: int, t: int) -> bool:
        return bool(self.has_edges(h, r, t))

    def check_entity(self, e: int) -> None:
        if not (0 <= int(e) < self.num_entities):
            raise UnknownEntity(e)

    def neighbors(self, e: int) -> tuple[np.ndarray, np.ndarray]:
        self.check_entity(e)
        lo, hi = self.indptr[e], self.indptr[e + 1]
        return self.relations[lo:hi], self.tails[lo:hi]

    def inverse(self, r: int) -> int:
        if not self.augmented:
            raise ValueError("inverse relations exist only after augmentation")
        nb = self.n_base_relations
        return r + nb if r < nb else r - nb

    def relation_name(self, r: int) -> str:
        return STAY_NAME if r == self.stay_relation else self.vocab.relations[r]

    def entity_name(self, e: int) -> str:
        return self.vocab.entities[e]

    def type_name_of(self, e: int) -> str:
        return self.vocab.types[self.entity_types[e]]

    def entities_of_type(self, type_name: str) -> np.ndarray:
        if not self.vocab.has_type(type_name):
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(self.entity_types == self.vocab.type_id(type_name))

    def triples(self) -> list[tuple[int, int, int]]:
        return list(zip(self.heads.tolist(), self.relations.tolist(), self.tails.tolist()))

    def vocab_hash(self) -> str:
        return self.vocab.digest()

    def without_edges(self, edges: Iterable[tuple[int, int, int]]) -> "KnowledgeGraph":
        """Copy of an unaugmented graph with the given (h, r, t) triples dropped."""
        if self.augmented:
            raise AlreadyAugmented("remove edges before augmentation")
        edges = list(edges)
        if not edges:
            return self
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
        drop = np.isin(self._keys, self._encode(e[:, 0], e[:, 1], e[:, 2]))
        keep = ~drop
        return KnowledgeGraph(
            self.vocab,
            self.heads[keep],
            self.relations[keep],
            self.tails[keep],
            self.entity_types,
            n_base_relations=self.n_base_relations,
        )

    # -- action space ------------------------------------------------------
    def action_table(self, nodes, mask=None):
        """Padded admissible actions for a batch of nodes.

        Returns ``(rel, ent, valid)`` arrays of shape ``(N, K)``. Column order is
        (relation, target) ascending with STAY in column ``degree``; masked edges
        are marked invalid in place so column positions stay deterministic.
        ``mask`` is an optional ``(N, 3)`` array of (head, base relation, tail)
        query edges; a row with head ``-1`` masks nothing.
        """
        nodes = np.asarray(nodes, dtype=np.int64)
        start = self.indptr[nodes]
        deg = self.indptr[nodes + 1] - start
        k = int(deg.max()) + 1 if len(nodes) else 1
        col = np.arange(k)[None, :]
        in_edge = col < deg[:, None]
        idx = np.where(in_edge, start[:, None] + col, 0)
        if self.num_edges:
            rel = np.where(in_edge, self.relations[idx], 0)
            ent = np.where(in_edge, self.tails[idx], 0)
        else:
            rel = np.zeros(idx.shape, np.int64)
            ent = np.zeros(idx.shape, np.int64)
        is_stay = col == deg[:, None]
        rel = np.where(is_stay, self.stay_relation, rel)
        ent = np.where(is_stay, nodes[:, None], ent)
        valid = col <= deg[:, None]
        if mask is not None:
            mask = np.asarray(mask, dtype=np.int64).reshape(-1, 3)
            mh, mr, mt = (mask[:, i : i + 1] for i in range(3))
            hit = (nodes[:, None] == mh) & (rel == mr) & (ent == mt)
            if self.augmented:
                inv = np.where(mr < self.n_base_relations, mr + self.n_base_relations, mr - self.n_base_relations)
                hit |= (nodes[:, None] == mt) & (rel == inv) & (ent == mh)
            valid &= ~(hit & in_edge & (mh >= 0))
        return rel, ent, valid


def _read_rows(source, ncols: int, label: str) -> list[list[str]]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            lines = [ln.rstrip("\r\n") for ln in fh]
        rows = []
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != ncols:
                raise MalformedRow(f"{source}:{lineno}: expected {ncols} tab-separated columns, got {len(parts)}")
            rows.append(parts)
    else:
        rows = []
        for i, row in enumerate(source):
            row = list(row)
            if len(row) != ncols:
                raise MalformedRow(f"{label} row {i}: expected {ncols} columns, got {len(row)}")
            rows.append([str(x) for x in row])
    if not rows:
        raise EmptyInput(f"no rows in {label} source")
    return rows


def load_graph(triples_source, types_source) -> KnowledgeGraph:
    """Build a graph from a ``head<TAB>relation<TAB>tail`` edge list and an ``entity<TAB>type`` map.

    Either source may be a path or an iterable of rows. Entity ids follow the
    order of the types source; relation and type ids follow sorted names.
    """
    type_rows = _read_rows(types_source, 2, "types")
    triple_rows = _read_rows(triples_source, 3, "triples")

    entity_type: dict[str, str] = {}
    for name, tname in type_rows:
        prev = entity_type.setdefault(name, tname)
        if prev != tname:
            raise MalformedRow(f"entity {name!r} has two types: {prev!r} and {tname!r}")
    entities = tuple(entity_type)
    types = tuple(sorted(set(entity_type.values())))
    relations = tuple(sorted({r for _, r, _ in triple_rows}))
    vocab = Vocabulary(entities, relations, types)

    ent_ids = vocab._entity_ids
    rel_ids = vocab._relation_ids
    encoded = []
    for h, r, t in triple_rows:
        for name in (h, t):
            if name not in ent_ids:
                raise MissingTypeMapping(f"entity {name!r} appears in triples but has no type")
        encoded.append((ent_ids[h], rel_ids[r], ent_ids[t]))
    arr = np.unique(np.asarray(encoded, dtype=np.int64), axis=0)
    duplicates = len(encoded) - len(arr)
    etypes = [vocab.type_id(entity_type[e]) for e in entities]
    return KnowledgeGraph(vocab, arr[:, 0], arr[:, 1], arr[:, 2], etypes, duplicates_removed=duplicates)


def add_inverse_relations(kg: KnowledgeGraph) -> KnowledgeGraph:
    """Return a graph holding every edge plus its reverse under relation ``r^-1``."""
    if kg.augmented:
        raise AlreadyAugmented("graph already carries inverse relations")
    nb = kg.num_relations
    rel_names = kg.vocab.relations + tuple(r + INVERSE_SUFFIX for r in kg.vocab.relations)
    vocab = Vocabulary(kg.vocab.entities, rel_names, kg.vocab.types)
    heads = np.concatenate([kg.heads, kg.tails])
    rels = np.concatenate([kg.relations, kg.relations + nb])
    tails = np.concatenate([kg.tails, kg.heads])
    return KnowledgeGraph(
        vocab,
        heads,
        rels,
        tails,
        kg.entity_types,
        augmented=True,
        n_base_relations=nb,
        duplicates_removed=kg.duplicates_removed,
    )


def available_actions(kg: KnowledgeGraph, current: int, mask: Sequence[int] | None = None) -> list[Action]:
    """Outgoing (relation, target) pairs of ``current`` plus STAY, minus the masked edge and its inverse."""
    kg.check_entity(current)
    m = None if mask is None else np.asarray([mask], dtype=np.int64)
    rel, ent, valid = kg.action_table([current], m)
    return [Action(int(r), int(e)) for r, e, v in zip(rel[0], ent[0], valid[0]) if v]


def entity_type(kg: KnowledgeGraph, e: int) -> int:
    kg.check_entity(e)
    return int(kg.entity_types[e])


def graph_stats(
    kg: KnowledgeGraph,
    head_relation: str = "treats",
    source_type: str = "Compound",
    target_type: str = "Disease",
) -> dict[str, int]:
    """Exact counts over the stored graph, flat enough to print as key=value lines."""
    stats = {
        "entities": kg.num_entities,
        "edges": kg.num_edges,
        "relations": kg.num_relations,
        "types": kg.num_types,
        "augmented": int(kg.augmented),
        "duplicates_removed": kg.duplicates_removed,
    }
    base = kg.relations < kg.n_base_relations
    metaedges = np.unique(
        np.stack([kg.entity_types[kg.heads[base]], kg.relations[base], kg.entity_types[kg.tails[base]]], axis=1),
        axis=0,
    )
    stats["metaedges"] = len(metaedges)
    counts = np.bincount(kg.entity_types, minlength=kg.num_types)
    for name, c in zip(kg.vocab.types, counts.tolist()):
        stats[f"type[{name}]"] = c
    head_edges = 0
    if kg.vocab.has_relation(head_relation) and kg.vocab.has_type(source_type) and kg.vocab.has_type(target_type):
        r = kg.vocab.relation_id(head_relation)
        sel = (
            (kg.relations == r)
            & (kg.entity_types[kg.heads] == kg.vocab.type_id(source_type))
            & (kg.entity_types[kg.tails] == kg.vocab.type_id(target_type))
        )
        head_edges = int(sel.sum())
    stats[f"{head_relation}_edges"] = head_edges
    return stats


def format_stats(stats: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in stats.items())


def write_graph(kg: KnowledgeGraph, triples_path, types_path) -> None:
    """Write base (non-inverse) edges and the type map in the loader's TSV format."""
    names = kg.vocab.entities
    with open(triples_path, "w", encoding="utf-8", newline="\n") as fh:
        for h, r, t in kg.triples():
            if r < kg.n_base_relations:
                fh.write(f"{names[h]}\t{kg.vocab.relations[r]}\t{names[t]}\n")
    with open(types_path, "w", encoding="utf-8", newline="\n") as fh:
        for e, name in enumerate(names):
            fh.write(f"{name}\t{kg.type_name_of(e)}\n")
