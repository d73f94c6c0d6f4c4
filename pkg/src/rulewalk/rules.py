"""Metapath rules: parsing, projection of instance paths, matching and confidence sampling."""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import InvalidPath, MalformedRule, ScoreOutOfRange, UnrealizableBody
from .graph import INVERSE_SUFFIX, KnowledgeGraph

_ARROW = re.compile(r"\s*-\[([^\]]*)\]->\s*")


class InstancePath(NamedTuple):
    """A walk ``entities[0] -relations[0]-> entities[1] ...``; STAY steps repeat the entity."""

    entities: tuple[int, ...]
    relations: tuple[int, ...]


@dataclass(frozen=True)
class Metapath:
    types: tuple[str, ...]
    relations: tuple[str, ...]

    def __post_init__(self):
        if len(self.types) != len(self.relations) + 1:
            raise MalformedRule(f"metapath needs one more type than relations: {self.types} / {self.relations}")

    def __len__(self) -> int:
        return len(self.relations)

    def __str__(self) -> str:
        out = [self.types[0]]
        for r, t in zip(self.relations, self.types[1:]):
            out.append(f"-[{r}]-> {t}")
        return " ".join(out)


@dataclass(frozen=True)
class Rule:
    head_source: str
    head_relation: str
    head_target: str
    body: Metapath
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ScoreOutOfRange(f"rule score {self.score} outside [0, 1]")
        if self.body.types[0] != self.head_source or self.body.types[-1] != self.head_target:
            raise MalformedRule(
                f"body {self.body} must run from {self.head_source} to {self.head_target}"
            )

    def with_score(self, score: float) -> "Rule":
        return Rule(self.head_source, self.head_relation, self.head_target, self.body, score)


@dataclass(frozen=True)
class RuleSet:
    head: tuple[str, str, str]
    rules: tuple[Rule, ...] = field(default_factory=tuple)

    def __post_init__(self):
        seen = set()
        for rule in self.rules:
            if (rule.head_source, rule.head_relation, rule.head_target) != self.head:
                raise MalformedRule(f"rule head differs from rule set head {self.head}")
            if rule.body in seen:
                raise MalformedRule(f"duplicate rule body {rule.body}")
            seen.add(rule.body)

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    @property
    def max_body_length(self) -> int:
        return max((len(r.body) for r in self.rules), default=0)


def _parse_body(text: str, where: str) -> Metapath:
    parts = _ARROW.split(text.strip())
    types = [p.strip() for p in parts[0::2]]
    rels = [p.strip() for p in parts[1::2]]
    if not rels or any(not t for t in types) or any(not r for r in rels):
        raise MalformedRule(f"{where}: body needs at least one '-[rel]->' hop between non-empty types")
    for t in types:
        if "-[" in t or "]->" in t or "->" in t:
            raise MalformedRule(f"{where}: bad arrow syntax near {t!r}")
    return Metapath(tuple(types), tuple(rels))


def _check_names(rule: Rule, kg: KnowledgeGraph, where: str) -> None:
    for t in rule.body.types:
        if not kg.vocab.has_type(t):
            raise MalformedRule(f"{where}: unknown type {t!r}")
    for r in rule.body.relations + (rule.head_relation,):
        base = r[: -len(INVERSE_SUFFIX)] if r.endswith(INVERSE_SUFFIX) else r
        if not (kg.vocab.has_relation(r) or kg.vocab.has_relation(base)):
            raise MalformedRule(f"{where}: unknown relation {r!r}")


def parse_rules(source, kg: KnowledgeGraph | None = None) -> RuleSet:
    """Read a rule file (path, text, or iterable of lines).

    First non-comment line is ``HEAD <Source> <relation> <Target>`` (or the arrow
    form ``HEAD <Source> -[<relation>]-> <Target>`` when type names contain spaces);
    each further line is ``SCORE=<float> <Type0> -[<rel>]-> ... <TypeL>``.
    When ``kg`` is given, every type and relation name is checked against it.
    """
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source and os.path.exists(source)):
        name = str(source)
        with open(source, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    elif isinstance(source, str):
        name, lines = "<text>", source.splitlines()
    else:
        name, lines = "<lines>", list(source)

    head = None
    rules = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        where = f"{name}:{lineno}"
        if not line or line.startswith("#"):
            continue
        if head is None:
            if not line.startswith("HEAD"):
                raise MalformedRule(f"{where}: first line must be a HEAD declaration")
            rest = line[4:].strip()
            if "-[" in rest:
                body = _parse_body(rest, where)
                if len(body) != 1:
                    raise MalformedRule(f"{where}: head must be a single relation")
                head = (body.types[0], body.relations[0], body.types[1])
            else:
                toks = rest.split()
                if len(toks) != 3:
                    raise MalformedRule(f"{where}: HEAD needs <Source> <relation> <Target>")
                head = tuple(toks)
            continue
        m = re.match(r"SCORE=(\S+)\s+(.*)$", line)
        if not m:
            raise MalformedRule(f"{where}: expected 'SCORE=<float> <body>'")
        try:
            score = float(m.group(1))
        except ValueError:
            raise MalformedRule(f"{where}: bad score {m.group(1)!r}") from None
        if not 0.0 <= score <= 1.0:
            raise ScoreOutOfRange(f"{where}: score {score} outside [0, 1]")
        try:
            rule = Rule(*head, _parse_body(m.group(2), where), score)
        except MalformedRule as exc:
            raise MalformedRule(f"{where}: {exc}") from None
        if kg is not None:
            _check_names(rule, kg, where)
        rules.append(rule)
    if head is None:
        raise MalformedRule(f"{name}: missing HEAD line")
    return RuleSet(head, tuple(rules))


def serialize_rules(ruleset: RuleSet) -> str:
    src, rel, tgt = ruleset.head
    if any(" " in x for x in ruleset.head):
        lines = [f"HEAD {src} -[{rel}]-> {tgt}"]
    else:
        lines = [f"HEAD {src} {rel} {tgt}"]
    for rule in ruleset.rules:
        lines.append(f"SCORE={rule.score!r} {rule.body}")
    return "\n".join(lines) + "\n"


def _as_path(path) -> InstancePath:
    if isinstance(path, InstancePath):
        return path
    if hasattr(path, "entities") and hasattr(path, "relations"):
        return InstancePath(tuple(int(e) for e in path.entities), tuple(int(r) for r in path.relations))
    ents, rels = path
    return InstancePath(tuple(int(e) for e in ents), tuple(int(r) for r in rels))


def metapath_ids(kg: KnowledgeGraph, path) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """(type ids, relation ids) of a path with STAY steps deleted; no edge validation."""
    ents, rels = path
    stay = kg.stay_relation
    types = [int(kg.entity_types[ents[0]])]
    out_rels = []
    for r, e in zip(rels, ents[1:]):
        if r == stay:
            continue
        out_rels.append(int(r))
        types.append(int(kg.entity_types[e]))
    return tuple(types), tuple(out_rels)


def metapath_of(kg: KnowledgeGraph, path) -> Metapath:
    """Type/relation skeleton of an instance path, STAY steps removed."""
    p = _as_path(path)
    if len(p.entities) != len(p.relations) + 1:
        raise InvalidPath("path needs one more entity than relations")
    for e in p.entities:
        if not 0 <= e < kg.num_entities:
            raise InvalidPath(f"unknown entity {e}")
    for h, r, t in zip(p.entities, p.relations, p.entities[1:]):
        if r == kg.stay_relation:
            if h != t:
                raise InvalidPath(f"STAY step moves from {h} to {t}")
        elif not (0 <= r < kg.num_relations and kg.has_edge(h, r, t)):
            raise InvalidPath(f"edge ({h}, {r}, {t}) not in graph")
    types, rels = metapath_ids(kg, p)
    return Metapath(
        tuple(kg.vocab.types[t] for t in types),
        tuple(kg.vocab.relations[r] for r in rels),
    )


def matches(kg: KnowledgeGraph, path, rule: Rule) -> bool:
    return metapath_of(kg, path) == rule.body


class RuleIndex:
    """Rule bodies compiled to id tuples for fast exact-match lookup on one graph."""

    def __init__(self, kg: KnowledgeGraph, rules: RuleSet):
        self.kg = kg
        self.scores: dict[tuple, float] = {}
        for rule in rules:
            key = self._compile(rule.body)
            if key is not None:
                self.scores[key] = self.scores.get(key, 0.0) + rule.score

    def _compile(self, body: Metapath):
        v = self.kg.vocab
        if not all(v.has_type(t) for t in body.types) or not all(v.has_relation(r) for r in body.relations):
            return None
        return tuple(v.type_id(t) for t in body.types), tuple(v.relation_id(r) for r in body.relations)

    def score(self, entities, relations) -> float | None:
        """Summed score of rules whose body equals the path's metapath; None when none match."""
        return self.scores.get(metapath_ids(self.kg, (entities, relations)))

    def match_scores(self, entities: np.ndarray, relations: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised over rows of ``(N, T+1)`` entities / ``(N, T)`` relations."""
        n = len(entities)
        matched = np.zeros(n, dtype=bool)
        scores = np.zeros(n)
        if not self.scores:
            return matched, scores
        types = self.kg.entity_types[entities]
        stay = self.kg.stay_relation
        for i in range(n):
            keep = relations[i] != stay
            key = (
                (int(types[i, 0]),) + tuple(types[i, 1:][keep].tolist()),
                tuple(relations[i][keep].tolist()),
            )
            s = self.scores.get(key)
            if s is not None:
                matched[i] = True
                scores[i] = s
        return matched, scores


def _body_hops(kg: KnowledgeGraph, body: Metapath):
    """Per-hop (heads, tails) edge arrays restricted to the body's relations and types."""
    v = kg.vocab
    if not all(v.has_type(t) for t in body.types) or not all(v.has_relation(r) for r in body.relations):
        raise UnrealizableBody(f"body {body} uses names absent from the graph")
    hops = []
    for k, r in enumerate(body.relations):
        rid = v.relation_id(r)
        sel = (
            (kg.relations == rid)
            & (kg.entity_types[kg.heads] == v.type_id(body.types[k]))
            & (kg.entity_types[kg.tails] == v.type_id(body.types[k + 1]))
        )
        hops.append((kg.heads[sel], kg.tails[sel]))
    return hops


def _completion_counts(kg: KnowledgeGraph, body: Metapath, hops) -> list[np.ndarray]:
    """counts[k][e] = number of body suffixes starting at hop k from entity e."""
    n = kg.num_entities
    counts = [None] * (len(hops) + 1)
    counts[-1] = (kg.entity_types == kg.vocab.type_id(body.types[-1])).astype(float)
    for k in range(len(hops) - 1, -1, -1):
        h, t = hops[k]
        counts[k] = np.bincount(h, weights=counts[k + 1][t], minlength=n)
    return counts


def estimate_confidence(
    kg: KnowledgeGraph,
    rule: Rule,
    n_samples: int,
    seed=None,
    method: str = "uniform",
) -> float:
    """Monte-Carlo rule confidence: share of sampled body instances whose endpoints carry the head edge.

    ``method="uniform"`` samples instance paths uniformly (weights from suffix
    counts), so the estimate is unbiased for rule support / body support.
    ``method="stepwise"`` picks a viable source uniformly, then a uniform
    type/relation-compatible edge per hop, rejecting dead ends.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    if method not in ("uniform", "stepwise"):
        raise ValueError(f"unknown sampling method {method!r}")
    rng = np.random.default_rng(seed)
    hops = _body_hops(kg, rule.body)
    counts = _completion_counts(kg, rule.body, hops)
    if counts[0].sum() == 0:
        raise UnrealizableBody(f"no instance path matches {rule.body}")
    if not kg.vocab.has_relation(rule.head_relation):
        return 0.0

    if method == "uniform":
        src, dst = _sample_uniform(kg, hops, counts, n_samples, rng)
    else:
        src, dst = _sample_stepwise(kg, hops, counts, n_samples, rng)
    head = kg.vocab.relation_id(rule.head_relation)
    return float(kg.has_edges(src, np.full_like(src, head), dst).mean())


def _segments(heads: np.ndarray, n: int):
    cnt = np.bincount(heads, minlength=n)
    ptr = np.concatenate([[0], np.cumsum(cnt)])
    return ptr


def _sample_uniform(kg, hops, counts, n, rng):
    w0 = counts[0]
    cum0 = np.cumsum(w0)
    src = np.searchsorted(cum0, rng.random(n) * cum0[-1], side="right")
    src = np.minimum(src, np.flatnonzero(w0)[-1])
    cur = src
    for k, (h, t) in enumerate(hops):
        w = counts[k + 1][t]
        cw = np.cumsum(w)
        ptr = _segments(h, kg.num_entities)
        last_pos = np.full(kg.num_entities, -1)
        pos = np.flatnonzero(w > 0)
        np.maximum.at(last_pos, h[pos], pos)
        lo = ptr[cur]
        base = np.where(lo > 0, cw[np.maximum(lo - 1, 0)], 0.0)
        v = base + rng.random(n) * counts[k][cur]
        idx = np.searchsorted(cw, v, side="right")
        idx = np.minimum(idx, last_pos[cur])
        cur = t[idx]
    return src, cur


def _sample_stepwise(kg, hops, counts, n, rng):
    viable = np.flatnonzero(counts[0] > 0)
    ptrs = [_segments(h, kg.num_entities) for h, _ in hops]
    src_out, dst_out = [], []
    need = n
    while need > 0:
        src = viable[rng.integers(0, len(viable), size=need)]
        cur = src
        alive = np.ones(need, dtype=bool)
        for (h, t), ptr in zip(hops, ptrs):
            lo, hi = ptr[cur], ptr[cur + 1]
            deg = hi - lo
            alive &= deg > 0
            pick = lo + np.floor(rng.random(need) * np.maximum(deg, 1)).astype(np.int64)
            cur = np.where(alive, t[np.minimum(pick, len(t) - 1)] if len(t) else cur, cur)
        src_out.append(src[alive])
        dst_out.append(cur[alive])
        need -= int(alive.sum())
    src = np.concatenate(src_out)[:n]
    dst = np.concatenate(dst_out)[:n]
    return src, dst


def write_rules(ruleset: RuleSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_rules(ruleset))


def rules_from_bodies(head: tuple[str, str, str], bodies: Iterable[tuple[Metapath, float]]) -> RuleSet:
    return RuleSet(head, tuple(Rule(*head, body, score) for body, score in bodies))
