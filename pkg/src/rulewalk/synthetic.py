"""Small typed graphs with one planted rule generating the head-relation edges."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InfeasibleConfig
from .graph import INVERSE_SUFFIX, KnowledgeGraph, Vocabulary
from .rules import Metapath, Rule


def _default_counts():
    return {"Compound": 60, "Disease": 40, "Gene": 120, "Anatomy": 30, "Side Effect": 50}


def _default_schema():
    # (source type, relation, target type, mean out-degree per source entity)
    return [
        ("Compound", "binds", "Gene", 2.0),
        ("Gene", "interacts", "Gene", 1.5),
        ("Disease", "associates", "Gene", 3.0),
        ("Compound", "resembles", "Compound", 1.0),
        ("Disease", "resembles", "Disease", 1.0),
        ("Anatomy", "expresses", "Gene", 3.0),
        ("Disease", "localizes", "Anatomy", 1.0),
        ("Compound", "causes", "Side Effect", 2.0),
        ("Compound", "palliates", "Disease", 0.3),
    ]


def _default_body():
    return ("Compound", "binds", "Gene", "interacts", "Gene", "associates^-1", "Disease")


@dataclass
class SyntheticGraphConfig:
    entity_counts: dict = field(default_factory=_default_counts)
    schema: list = field(default_factory=_default_schema)
    head: tuple = ("Compound", "treats", "Disease")
    rule_body: tuple = field(default_factory=_default_body)
    generation_probability: float = 1.0
    noise_edge_density: float = 1.0
    max_path_length: int = 3
    seed: int = 7

    @property
    def body(self) -> Metapath:
        seq = list(self.rule_body)
        return Metapath(tuple(seq[0::2]), tuple(seq[1::2]))

    def to_json(self) -> str:
        d = asdict(self)
        d["schema"] = [list(s) for s in self.schema]
        d["head"] = list(self.head)
        d["rule_body"] = list(self.rule_body)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticGraphConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InfeasibleConfig(f"unknown synthetic config keys: {sorted(unknown)}")
        d = dict(d)
        if "schema" in d:
            d["schema"] = [tuple(s) for s in d["schema"]]
        for key in ("head", "rule_body"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def _validate(config: SyntheticGraphConfig) -> Metapath:
    counts = config.entity_counts
    if len(config.rule_body) % 2 != 1 or len(config.rule_body) < 3:
        raise InfeasibleConfig("rule_body must alternate Type, relation, Type, ... with at least one hop")
    body = config.body
    if len(body) > config.max_path_length:
        raise InfeasibleConfig(f"planted body length {len(body)} exceeds max path length {config.max_path_length}")
    for t in body.types + (config.head[0], config.head[2]):
        if counts.get(t, 0) <= 0:
            raise InfeasibleConfig(f"type {t!r} has no entities")
    if body.types[0] != config.head[0] or body.types[-1] != config.head[2]:
        raise InfeasibleConfig("planted body must start at the head source type and end at the head target type")
    if not 0.0 <= config.generation_probability <= 1.0:
        raise InfeasibleConfig("generation_probability must lie in [0, 1]")
    declared = {(s, r, t) for s, r, t, *_ in config.schema}
    for r, a, b in zip(body.relations, body.types, body.types[1:]):
        if r.endswith(INVERSE_SUFFIX):
            base, a, b = r[: -len(INVERSE_SUFFIX)], b, a
        else:
            base = r
        if (a, base, b) not in declared:
            raise InfeasibleConfig(f"body hop {a} -[{r}]-> {b} has no matching schema relation")
    for s, r, t, *_ in config.schema:
        if r == config.head[1]:
            raise InfeasibleConfig(f"head relation {r!r} must not appear in the noise schema")
        if counts.get(s, 0) <= 0 or counts.get(t, 0) <= 0:
            raise InfeasibleConfig(f"schema relation {s} -[{r}]-> {t} references an empty type")
    return body


def generate_synthetic(config: SyntheticGraphConfig):
    """Returns ``(graph, planted head edges as (h, r, t) ids, planted Rule)``.

    Schema relations get uniformly random edges; every (source, target) pair
    joined by a body instance then receives a head edge with the configured
    generation probability.
    """
    body = _validate(config)
    rng = np.random.default_rng(config.seed)
    type_names = sorted(config.entity_counts)
    entities, etypes, by_type = [], [], {}
    for tname in type_names:
        n = int(config.entity_counts[tname])
        start = len(entities)
        tag = tname.replace(" ", "")
        entities.extend(f"{tag}_{i:04d}" for i in range(n))
        etypes.extend([type_names.index(tname)] * n)
        by_type[tname] = np.arange(start, start + n)
    n_ent = len(entities)

    rel_names = sorted({r for _, r, _, *_ in config.schema} | {config.head[1]})
    rid = {r: i for i, r in enumerate(rel_names)}
    edges = set()
    adjacency = {}
    for entry in config.schema:
        s, r, t = entry[:3]
        degree = float(entry[3]) if len(entry) > 3 else 1.0
        src, dst = by_type[s], by_type[t]
        n_edges = int(round(degree * config.noise_edge_density * len(src)))
        pairs = set()
        max_pairs = len(src) * len(dst) - (len(src) if s == t else 0)
        n_edges = min(n_edges, max_pairs)
        while len(pairs) < n_edges:
            need = n_edges - len(pairs)
            hs = src[rng.integers(0, len(src), size=need)]
            ts = dst[rng.integers(0, len(dst), size=need)]
            for h, tt in zip(hs.tolist(), ts.tolist()):
                if h != tt and len(pairs) < n_edges:
                    pairs.add((h, tt))
        pairs = sorted(pairs)
        edges.update((h, rid[r], tt) for h, tt in pairs)
        rows = [p[0] for p in pairs]
        cols = [p[1] for p in pairs]
        m = sp.csr_matrix((np.ones(len(pairs)), (rows, cols)), shape=(n_ent, n_ent))
        adjacency[(s, r, t)] = adjacency.get((s, r, t), 0) + m

    reach = None
    for r, a, b in zip(body.relations, body.types, body.types[1:]):
        if r.endswith(INVERSE_SUFFIX):
            m = adjacency[(b, r[: -len(INVERSE_SUFFIX)], a)].T
        else:
            m = adjacency[(a, r, b)]
        m = (m != 0).astype(np.float64)
        reach = m if reach is None else reach @ m
    reach = reach.tocoo()
    pairs = sorted(zip(reach.row.tolist(), reach.col.tolist()))
    src_type, tgt_type = config.head[0], config.head[2]
    pairs = [(c, d) for c, d in pairs if etypes[c] == type_names.index(src_type) and etypes[d] == type_names.index(tgt_type)]
    keep = rng.random(len(pairs)) < config.generation_probability
    head_id = rid[config.head[1]]
    planted = [(c, head_id, d) for (c, d), k in zip(pairs, keep) if k]
    edges.update(planted)

    arr = np.array(sorted(edges), dtype=np.int64).reshape(-1, 3)
    vocab = Vocabulary(tuple(entities), tuple(rel_names), tuple(type_names))
    kg = KnowledgeGraph(vocab, arr[:, 0], arr[:, 1], arr[:, 2], etypes)
    rule = Rule(config.head[0], config.head[1], config.head[2], body, float(config.generation_probability))
    return kg, planted, rule


def split_edges(edges, seed, fractions=(0.8, 0.1, 0.1)):
    """Seeded shuffle of edges into train/valid/test lists (sizes floor-rounded, remainder to train)."""
    edges = sorted(edges)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(edges))
    n = len(edges)
    n_valid = int(n * fractions[1])
    n_test = int(n * fractions[2])
    n_train = n - n_valid - n_test
    shuffled = [edges[i] for i in order]
    return (
        sorted(shuffled[:n_train]),
        sorted(shuffled[n_train : n_train + n_valid]),
        sorted(shuffled[n_train + n_valid :]),
    )
