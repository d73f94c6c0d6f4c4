import dataclasses

import numpy as np
import pytest

from rulewalk.errors import DataError, InfeasibleConfig
from rulewalk.graph import add_inverse_relations, graph_stats
from rulewalk.pipeline import make_split, prepare_dataset, read_split, write_split
from rulewalk.synthetic import SyntheticGraphConfig, generate_synthetic, split_edges


def body_pairs(kg, body):
    """Brute-force (source, target) pairs joined by a body instance, by path enumeration."""
    v = kg.vocab
    frontier = [(e,) for e in range(kg.num_entities) if v.types[kg.entity_types[e]] == body.types[0]]
    for rel, typ in zip(body.relations, body.types[1:]):
        rid = v.relation_id(rel)
        nxt = []
        for p in frontier:
            rs, ts = kg.neighbors(p[-1])
            nxt += [p + (int(t),) for r, t in zip(rs, ts) if r == rid and v.types[kg.entity_types[t]] == typ]
        frontier = nxt
    return {(p[0], p[-1]) for p in frontier}


def test_seeded_generation_is_identical():
    a = generate_synthetic(SyntheticGraphConfig(seed=7))
    b = generate_synthetic(SyntheticGraphConfig(seed=7))
    assert a[0].triples() == b[0].triples() and a[1] == b[1]
    c = generate_synthetic(SyntheticGraphConfig(seed=8))
    assert c[0].triples() != a[0].triples()


def test_default_graph_shape(synthetic_default):
    kg, planted, rule = synthetic_default
    s = graph_stats(kg)
    assert s["entities"] == 300
    assert s["relations"] >= 5
    assert len(rule.body) == 3
    assert s["treats_edges"] == len(planted) > 0


def test_probability_one_plants_every_pair(synthetic_default):
    kg, planted, rule = synthetic_default
    aug = add_inverse_relations(kg)
    pairs = body_pairs(aug, rule.body)
    assert {(c, d) for c, _, d in planted} == pairs


def test_held_out_edges_have_body_path(synthetic_default):
    kg, planted, rule = synthetic_default
    splits = make_split(kg, "treats", 7)
    ds = prepare_dataset(kg, splits, "treats")
    # the body never uses treats, so removing held-out edges keeps every body path
    pairs = body_pairs(ds.walk, rule.body)
    for c, d in splits["valid"] + splits["test"]:
        assert (c, d) in pairs


def test_partial_probability():
    kg, planted, rule = generate_synthetic(SyntheticGraphConfig(generation_probability=0.5))
    pairs = body_pairs(add_inverse_relations(kg), rule.body)
    assert 0 < len(planted) < len(pairs)
    assert rule.score == 0.5


@pytest.mark.parametrize("change", [
    {"rule_body": ("Compound", "binds", "Gene", "interacts", "Gene", "interacts", "Gene", "associates^-1", "Disease")},
    {"rule_body": ("Compound", "binds", "Gene", "associates", "Disease")},
    {"entity_counts": {"Compound": 10, "Disease": 0, "Gene": 10}},
    {"generation_probability": 1.5},
    {"rule_body": ("Gene", "interacts", "Gene")},
])
def test_infeasible_configs(change):
    with pytest.raises(InfeasibleConfig):
        generate_synthetic(dataclasses.replace(SyntheticGraphConfig(), **change))


def test_config_round_trip():
    import json

    cfg = SyntheticGraphConfig(seed=3)
    assert SyntheticGraphConfig.from_dict(json.loads(cfg.to_json())) == cfg
    with pytest.raises(InfeasibleConfig):
        SyntheticGraphConfig.from_dict({"colour": 1})


def test_split_fractions_and_disjointness():
    edges = [(i, 0, i + 1) for i in range(153)]
    tr, va, te = split_edges(edges, 7)
    assert (len(tr), len(va), len(te)) == (123, 15, 15)
    assert sorted(tr + va + te) == edges
    assert split_edges(edges, 7) == (tr, va, te)


def test_split_file_round_trip(tmp_path, synthetic_default):
    kg = synthetic_default[0]
    splits = make_split(kg, "treats", 1)
    write_split(tmp_path / "s.tsv", kg, splits)
    assert read_split(tmp_path / "s.tsv", kg) == splits
    (tmp_path / "bad.tsv").write_text("train\tCompound_0000\n")
    with pytest.raises(DataError):
        read_split(tmp_path / "bad.tsv", kg)
    (tmp_path / "ghost.tsv").write_text("test\tCompound_0000\tnobody\n")
    with pytest.raises(DataError):
        read_split(tmp_path / "ghost.tsv", kg)


def test_prepare_dataset_removes_held_out(synthetic_default):
    kg = synthetic_default[0]
    splits = make_split(kg, "treats", 7)
    ds = prepare_dataset(kg, splits, "treats")
    r = kg.vocab.relation_id("treats")
    for c, d in splits["test"]:
        assert not ds.walk.has_edge(c, r, d)
        assert not ds.walk.has_edge(d, ds.walk.inverse(r), c)
    for c, d in splits["train"][:10]:
        assert ds.walk.has_edge(c, r, d)
    assert np.array_equal(ds.walk.entity_types, kg.entity_types)
    with pytest.raises(DataError):
        prepare_dataset(kg, {"train": [], "valid": [], "test": [(0, 1)]}, "treats")
