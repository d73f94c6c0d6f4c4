"""Filtered link-prediction metrics over per-compound rankings."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DataError, QueryNotInTruth

KS = (1, 3, 10)


@dataclass(frozen=True)
class QueryRank:
    compound: int
    disease: int
    rank: int | None  # None: true disease absent from the ranking


@dataclass
class EvaluationReport:
    ranks: list[QueryRank]
    hits: dict[int, float]
    mrr: float
    metadata: dict = field(default_factory=dict)

    @property
    def hits_at_1(self) -> float:
        return self.hits[1]

    @property
    def hits_at_3(self) -> float:
        return self.hits[3]

    @property
    def hits_at_10(self) -> float:
        return self.hits[10]

    def summary(self) -> dict:
        out = {f"hits@{k}": self.hits[k] for k in KS}
        out["mrr"] = self.mrr
        out["queries"] = len(self.ranks)
        out["unranked"] = sum(r.rank is None for r in self.ranks)
        return out

    def to_kv(self) -> str:
        items = dict(self.metadata)
        items.update(self.summary())
        return "".join(f"{k}={_fmt(v)}\n" for k, v in items.items())

    def to_json(self) -> str:
        return json.dumps({"metadata": self.metadata, "metrics": self.summary()}, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        lines = ["metric,value"]
        lines += [f"{k},{_fmt(v)}" for k, v in self.summary().items()]
        return "\n".join(lines) + "\n"


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def _entities(ranking) -> list[int]:
    if hasattr(ranking, "entities"):
        return list(ranking.entities)
    return [c if isinstance(c, (int,)) else int(c[0]) for c in ranking]


def filtered_rank(ranking: Sequence[int], compound: int, disease: int, known: set) -> int | None:
    """1-based position of ``disease`` after removing other known answers for ``compound``."""
    pos = 0
    for e in ranking:
        if e != disease and (compound, e) in known:
            continue
        pos += 1
        if e == disease:
            return pos
    return None


def evaluate(
    rankings: Mapping[int, object],
    truth: Iterable[tuple[int, int]],
    known_edges: Iterable[tuple[int, int]],
    metadata: dict | None = None,
) -> EvaluationReport:
    """Filtered hits@1/3/10 and MRR; a disease missing from its ranking scores 0 everywhere.

    ``rankings`` maps compound -> ranked candidates (objects with ``.entities`` or
    plain entity-id sequences); each (compound, disease) in ``truth`` is one query.
    """
    truth = [(int(c), int(d)) for c, d in truth]
    known = {(int(c), int(d)) for c, d in known_edges}
    compounds = {c for c, _ in truth}
    for c in rankings:
        if c not in compounds:
            raise QueryNotInTruth(f"ranking supplied for compound {c} with no test edge")
    ranks = []
    for c, d in truth:
        if c not in rankings:
            raise DataError(f"no ranking for query compound {c}")
        ranks.append(QueryRank(c, d, filtered_rank(_entities(rankings[c]), c, d, known)))
    n = len(ranks)
    hits = {k: (sum(1 for r in ranks if r.rank is not None and r.rank <= k) / n if n else 0.0) for k in KS}
    mrr = sum(1.0 / r.rank for r in ranks if r.rank is not None) / n if n else 0.0
    return EvaluationReport(ranks, hits, mrr, dict(metadata or {}))
