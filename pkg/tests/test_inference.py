import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rulewalk.errors import ConfigError
from rulewalk.graph import add_inverse_relations, available_actions, load_graph
from rulewalk.inference import BeamConfig, BeamPath, beam_search, format_path, rank_queries, rank_targets
from rulewalk.policy import action_distribution, encode_history, init_policy, initial_state
from rulewalk.rules import InstancePath, Metapath, Rule, RuleSet, metapath_of

from conftest import random_graph


def enumerate_paths(kg, net, src, T, mask=None):
    """Every length-T action sequence from src with its log-probability, via the one-agent API."""
    out = []

    def rec(state, prev, ents, rels, lp):
        if len(rels) == T:
            out.append((tuple(ents), tuple(rels), lp))
            return
        st_ = encode_history(net, state, prev)
        acts = available_actions(kg, ents[-1], mask)
        dist = action_distribution(net, st_.output, acts)
        for a, p in zip(acts, dist.probs):
            rec(st_, (a.relation, a.target), ents + [a.target], rels + [a.relation], lp + math.log(p))

    rec(initial_state(net, src), None, [src], [], 0.0)
    return out


@pytest.mark.parametrize("seed", range(6))
def test_beam_equals_exhaustive(seed):
    kg = add_inverse_relations(random_graph(seed, n_entities=9, n_edges=16))
    net = init_policy(kg, 3, 5, 4, 2, seed=seed)
    src = seed % 9
    T = 3
    paths = enumerate_paths(kg, net, src, T)
    assert len(paths) <= 10_000
    beams = beam_search(kg, net, src, BeamConfig(beam_width=len(paths) + 3, path_length=T))
    got = {(b.path.entities, b.path.relations): b.log_prob for b in beams}
    want = {(e, r): lp for e, r, lp in paths}
    assert set(got) == set(want)
    for k in want:
        assert abs(got[k] - want[k]) <= 1e-10
    assert sum(math.exp(lp) for lp in want.values()) == pytest.approx(1.0, abs=1e-9)


def test_beam_with_mask_equals_exhaustive(bio_aug):
    v = bio_aug.vocab
    s = v.entity_id("Sorafenib")
    mask = (s, v.relation_id("treats"), v.entity_id("Liver Cancer"))
    net = init_policy(bio_aug, 3, 5, 4, 1, seed=1)
    paths = enumerate_paths(bio_aug, net, s, 3, mask)
    beams = beam_search(bio_aug, net, s, BeamConfig(beam_width=1000, path_length=3), mask=mask)
    assert {(b.path.entities, b.path.relations) for b in beams} == {(e, r) for e, r, _ in paths}


def test_beam_width_one_is_greedy():
    kg = add_inverse_relations(random_graph(11, n_entities=10, n_edges=25))
    net = init_policy(kg, 3, 5, 4, 2, seed=2)
    src = 3
    (only,) = beam_search(kg, net, src, BeamConfig(beam_width=1, path_length=3))
    state, prev, ents, rels = initial_state(net, src), None, [src], []
    for _ in range(3):
        state = encode_history(net, state, prev)
        acts = available_actions(kg, ents[-1])
        a = acts[int(np.argmax(action_distribution(net, state.output, acts).probs))]
        ents.append(a.target)
        rels.append(a.relation)
        prev = (a.relation, a.target)
    assert only.path == InstancePath(tuple(ents), tuple(rels))


def test_beam_is_deterministic_and_bounded():
    kg = add_inverse_relations(random_graph(5, n_entities=12, n_edges=40))
    net = init_policy(kg, 3, 5, 4, 2, seed=0)
    a = beam_search(kg, net, 0, BeamConfig(beam_width=7, path_length=3))
    b = beam_search(kg, net, 0, BeamConfig(beam_width=7, path_length=3))
    assert a == b and len(a) == 7
    assert [x.log_prob for x in a] == sorted((x.log_prob for x in a), reverse=True)


def test_beam_config_validation():
    for kw in ({"beam_width": 0}, {"path_length": 0}, {"mode": "half"}, {"aggregate": "mean"}):
        with pytest.raises(ConfigError):
            BeamConfig(**kw)


@pytest.fixture
def toy():
    types = [("C", "Compound"), ("G", "Gene"), ("D", "Disease"), ("E", "Disease")]
    rows = [("C", "binds", "G"), ("D", "associates", "G"), ("E", "associates", "G"), ("C", "palliates", "D")]
    return add_inverse_relations(load_graph(rows, types))


def _bp(kg, names, rels, p):
    v = kg.vocab
    return BeamPath(InstancePath(tuple(v.entity_id(n) for n in names),
                                 tuple(kg.stay_relation if r == "STAY" else v.relation_id(r) for r in rels)),
                    math.log(p))


def test_max_aggregation_example(toy):
    beams = [
        _bp(toy, ["C", "G", "D"], ["binds", "associates^-1"], 0.3),
        _bp(toy, ["C", "D", "D"], ["palliates", "STAY"], 0.2),
        _bp(toy, ["C", "G", "E"], ["binds", "associates^-1"], 0.25),
        _bp(toy, ["C", "G", "G"], ["binds", "STAY"], 0.25),  # non-disease terminal is dropped
    ]
    ranked = rank_targets(toy, beams, None, "full")
    v = toy.vocab
    assert ranked.entities == [v.entity_id("D"), v.entity_id("E")]
    assert [c.score for c in ranked] == pytest.approx([0.3, 0.25], abs=1e-15)
    summed = rank_targets(toy, beams, None, "full", aggregate="sum")
    assert summed[0].score == pytest.approx(0.5)


def test_pruned_modes(toy):
    beams = [_bp(toy, ["C", "D", "D"], ["palliates", "STAY"], 0.4),
             _bp(toy, ["C", "G", "E"], ["binds", "associates^-1"], 0.25)]
    head = ("Compound", "treats", "Disease")
    none_match = RuleSet(head, (Rule(*head, Metapath(("Compound", "Compound", "Disease"), ("x", "y")), 0.5),))
    assert rank_targets(toy, beams, none_match, "pruned") == []
    assert rank_targets(toy, beams, RuleSet(head), "pruned") == []
    rules = RuleSet(head, (Rule(*head, Metapath(("Compound", "Gene", "Disease"), ("binds", "associates^-1")), 0.5),))
    assert rank_targets(toy, beams, rules, "pruned").entities == [toy.vocab.entity_id("E")]
    # full mode ignores rules entirely
    assert rank_targets(toy, beams, rules, "full") == rank_targets(toy, beams, none_match, "full")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 5000))
def test_pruned_is_subset_and_never_higher(seed):
    kg = add_inverse_relations(random_graph(seed % 40, n_entities=10, n_edges=30, n_types=2))
    net = init_policy(kg, 3, 4, 4, 1, seed=seed)
    beams = beam_search(kg, net, seed % 10, BeamConfig(beam_width=50, path_length=3))
    bodies = []
    for b in beams[:4]:
        mp = metapath_of(kg, b.path)
        if len(mp) and mp.types[0] == mp.types[-1] == "T0" and mp not in bodies:
            bodies.append(mp)
    head = ("T0", "h", "T0")
    rules = RuleSet(head, tuple(Rule(*head, b, 0.5) for b in bodies))
    for agg in ("max", "sum"):
        full = {c.entity: c.score for c in rank_targets(kg, beams, rules, "full", "T0", agg)}
        pruned = rank_targets(kg, beams, rules, "pruned", "T0", agg)
        scores = [c.score for c in pruned]
        assert scores == sorted(scores, reverse=True)
        assert len(set(pruned.entities)) == len(pruned)
        for c in pruned:
            assert c.entity in full and c.score <= full[c.entity] + 1e-15


def test_rank_queries_threads_agree(synthetic_default):
    kg, _, rule = synthetic_default
    aug = add_inverse_relations(kg)
    net = init_policy(aug, 4, 6, 6, 1, seed=0)
    comps = aug.entities_of_type("Compound")[:6].tolist()
    cfg = BeamConfig(beam_width=20, path_length=3, mode="pruned")
    rules = RuleSet(("Compound", "treats", "Disease"), (rule,))
    one = rank_queries(aug, net, comps, cfg, rules, threads=1)
    many = rank_queries(aug, net, comps, cfg, rules, threads=4)
    assert one == many and sorted(one) == sorted(comps)


def test_format_path(toy):
    p = _bp(toy, ["C", "G", "G", "E"], ["binds", "STAY", "associates^-1"], 0.1).path
    assert format_path(toy, p) == "C -[binds]-> G -[STAY]-> G -[associates^-1]-> E"
