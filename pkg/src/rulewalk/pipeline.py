"""Glue shared by the CLI and the experiment tests: splits, dataset preparation, train+evaluate."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import DataError
from .evaluation import evaluate
from .graph import KnowledgeGraph, add_inverse_relations
from .inference import BeamConfig, rank_queries
from .policy import PolicyNetwork
from .rules import RuleSet
from .synthetic import split_edges
from .training import TrainerConfig, train

SPLITS = ("train", "valid", "test")


def write_split(path, kg: KnowledgeGraph, splits: dict[str, Sequence[tuple[int, int]]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name in SPLITS:
            for c, d in splits.get(name, []):
                fh.write(f"{name}\t{kg.entity_name(c)}\t{kg.entity_name(d)}\n")


def read_split(path, kg: KnowledgeGraph) -> dict[str, list[tuple[int, int]]]:
    out = {name: [] for name in SPLITS}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[0] not in out:
                raise DataError(f"{path}:{lineno}: expected '<train|valid|test><TAB>source<TAB>target'")
            try:
                out[parts[0]].append((kg.vocab.entity_id(parts[1]), kg.vocab.entity_id(parts[2])))
            except KeyError as exc:
                raise DataError(f"{path}:{lineno}: unknown entity {exc}") from None
    return out


def head_pairs(kg: KnowledgeGraph, head_relation: str) -> list[tuple[int, int]]:
    if not kg.vocab.has_relation(head_relation):
        raise DataError(f"head relation {head_relation!r} not in graph")
    r = kg.vocab.relation_id(head_relation)
    sel = kg.relations == r
    return sorted(zip(kg.heads[sel].tolist(), kg.tails[sel].tolist()))


def make_split(kg: KnowledgeGraph, head_relation: str, seed) -> dict[str, list[tuple[int, int]]]:
    """80/10/10 seeded shuffle of every observed head-relation pair."""
    tr, va, te = split_edges(head_pairs(kg, head_relation), seed)
    return {"train": tr, "valid": va, "test": te}


@dataclass
class Dataset:
    full: KnowledgeGraph  # every loaded triple, no inverses
    walk: KnowledgeGraph  # held-out head edges removed, inverses added
    splits: dict[str, list[tuple[int, int]]]
    known: list[tuple[int, int]]  # all observed head-relation pairs


def prepare_dataset(kg: KnowledgeGraph, splits: dict, head_relation: str) -> Dataset:
    """Remove validation and test head edges from the walkable graph and add inverses."""
    if not kg.vocab.has_relation(head_relation):
        raise DataError(f"head relation {head_relation!r} not in graph")
    r = kg.vocab.relation_id(head_relation)
    held = [(c, r, d) for name in ("valid", "test") for c, d in splits.get(name, [])]
    missing = [e for e in held if not kg.has_edge(*e)]
    if missing:
        raise DataError(f"{len(missing)} held-out pairs are not {head_relation!r} edges of the graph")
    walk = add_inverse_relations(kg.without_edges(held))
    return Dataset(kg, walk, splits, head_pairs(kg, head_relation))


def evaluate_policy(
    ds: Dataset,
    net: PolicyNetwork,
    rules: RuleSet,
    beam: BeamConfig,
    subset: str = "test",
    threads: int = 1,
    metadata: dict | None = None,
):
    queries = ds.splits[subset]
    rankings = rank_queries(ds.walk, net, [c for c, _ in queries], beam, rules, threads)
    meta = {"mode": beam.mode, "subset": subset, "beam_width": beam.beam_width}
    meta.update(metadata or {})
    return rankings, evaluate(rankings, queries, ds.known, meta)


def train_and_evaluate(ds: Dataset, rules: RuleSet, config: TrainerConfig, modes=("full", "pruned")):
    net, history = train(ds.walk, rules, ds.splits["train"], config)
    reports = {}
    for mode in modes:
        beam = BeamConfig(config.beam_width, config.path_length, mode, config.target_type, config.aggregate)
        reports[mode] = evaluate_policy(ds, net, rules, beam, metadata={"seed": config.seed})[1]
    return net, history, reports
