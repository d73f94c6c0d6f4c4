"""Beam-search decoding and candidate ranking (full or rule-pruned)."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError
from .graph import KnowledgeGraph
from .policy import (
    PolicyNetwork,
    action_logits,
    encoder_input,
    lstm_forward,
    masked_log_softmax,
    policy_head,
    zero_state,
)
from .rules import InstancePath, RuleIndex, RuleSet

MODES = ("full", "pruned")


@dataclass(frozen=True)
class BeamConfig:
    beam_width: int = 100
    path_length: int = 3
    mode: str = "full"
    target_type: str | None = "Disease"
    aggregate: str = "max"

    def __post_init__(self):
        if self.beam_width < 1:
            raise ConfigError("beam width must be >= 1")
        if self.path_length < 1:
            raise ConfigError("path length must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.aggregate not in ("max", "sum"):
            raise ConfigError("aggregate must be 'max' or 'sum'")


class BeamPath(NamedTuple):
    path: InstancePath
    log_prob: float


def beam_search(
    kg: KnowledgeGraph,
    net: PolicyNetwork,
    e_c: int,
    config: BeamConfig,
    mask=None,
) -> list[BeamPath]:
    """Keep the ``beam_width`` most probable partial walks at each of ``path_length`` steps.

    Candidates are ordered by (-log-probability, entity reached, relation, parent
    rank, action column), which makes the result fully deterministic.
    """
    kg.check_entity(e_c)
    p_ = net.params
    L = net.config.num_layers
    T, B = config.path_length, config.beam_width
    src = np.array([e_c], dtype=np.int64)
    ents = src[:, None]
    rels = np.zeros((1, 0), dtype=np.int64)
    score = np.zeros(1)
    hs, cs = zero_state(net, 1)
    m = None if mask is None else np.asarray(mask, dtype=np.int64).reshape(1, 3)
    for t in range(T):
        n = len(ents)
        cur = ents[:, -1]
        sources = np.repeat(src, n)
        x = encoder_input(p_, net.d, rels[:, -1] if t else None, cur, sources, t == 0)
        hs, cs, _ = lstm_forward(p_, L, x, hs, cs)
        z, _ = policy_head(p_, hs[-1])
        rel, ent, valid = kg.action_table(cur, None if m is None else np.repeat(m, n, axis=0))
        logp, _ = masked_log_softmax(action_logits(p_, net.d, z, rel, ent), valid)
        b_idx, k_idx = np.nonzero(valid)
        cand = score[b_idx] + logp[b_idx, k_idx]
        order = np.lexsort((k_idx, b_idx, rel[b_idx, k_idx], ent[b_idx, k_idx], -cand))[:B]
        parent, col = b_idx[order], k_idx[order]
        ents = np.concatenate([ents[parent], ent[parent, col][:, None]], axis=1)
        rels = np.concatenate([rels[parent], rel[parent, col][:, None]], axis=1)
        score = cand[order]
        hs = [h[parent] for h in hs]
        cs = [c[parent] for c in cs]
    return [
        BeamPath(InstancePath(tuple(e), tuple(r)), float(s))
        for e, r, s in zip(ents.tolist(), rels.tolist(), score.tolist())
    ]


class Candidate(NamedTuple):
    entity: int
    score: float
    path: InstancePath
    log_prob: float


class RankedCandidates(list):
    """Candidates in descending score order; entities are distinct."""

    @property
    def entities(self) -> list[int]:
        return [c.entity for c in self]


def rank_targets(
    kg: KnowledgeGraph,
    beams: Sequence[BeamPath],
    rules: RuleSet | RuleIndex | None,
    mode: str = "full",
    target_type: str | None = "Disease",
    aggregate: str = "max",
) -> RankedCandidates:
    """Group beam paths by final entity and rank by path probability.

    ``pruned`` first drops paths whose metapath (STAY removed) matches no rule body.
    Each entity scores the max (or sum) of its paths' probabilities; the best
    path is kept as the explanation. Ties go to the smaller entity id.
    """
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    if aggregate not in ("max", "sum"):
        raise ConfigError("aggregate must be 'max' or 'sum'")
    if mode == "pruned":
        index = rules if isinstance(rules, RuleIndex) else RuleIndex(kg, rules or RuleSet(("", "", "")))
    type_id = None
    if target_type is not None:
        if not kg.vocab.has_type(target_type):
            return RankedCandidates()
        type_id = kg.vocab.type_id(target_type)
    best: dict[int, Candidate] = {}
    total: dict[int, float] = {}
    for bp in beams:
        path, lp = bp
        final = path.entities[-1]
        if type_id is not None and kg.entity_types[final] != type_id:
            continue
        if mode == "pruned" and index.score(path.entities, path.relations) is None:
            continue
        prob = float(np.exp(lp))
        total[final] = total.get(final, 0.0) + prob
        if final not in best or lp > best[final].log_prob:
            best[final] = Candidate(final, prob, path, lp)
    out = []
    for e, cand in best.items():
        s = cand.score if aggregate == "max" else total[e]
        out.append(Candidate(e, s, cand.path, cand.log_prob))
    out.sort(key=lambda c: (-c.score, c.entity))
    return RankedCandidates(out)


def rank_queries(
    kg: KnowledgeGraph,
    net: PolicyNetwork,
    compounds: Sequence[int],
    config: BeamConfig,
    rules: RuleSet | None = None,
    threads: int = 1,
) -> dict[int, RankedCandidates]:
    """Beam search + ranking for each distinct compound; order of results follows sorted compound ids."""
    index = RuleIndex(kg, rules) if rules is not None else RuleIndex(kg, RuleSet(("", "", "")))

    def one(c):
        beams = beam_search(kg, net, int(c), config)
        return rank_targets(kg, beams, index, config.mode, config.target_type, config.aggregate)

    todo = sorted({int(c) for c in compounds})
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, todo))
    else:
        results = [one(c) for c in todo]
    return dict(zip(todo, results))


def format_path(kg: KnowledgeGraph, path: InstancePath) -> str:
    out = [kg.entity_name(path.entities[0])]
    for r, e in zip(path.relations, path.entities[1:]):
        out.append(f"-[{kg.relation_name(r)}]-> {kg.entity_name(e)}")
    return " ".join(out)
