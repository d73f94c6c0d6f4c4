import numpy as np
import pytest

from rulewalk.graph import add_inverse_relations, load_graph
from rulewalk.synthetic import SyntheticGraphConfig, generate_synthetic

BIO_TYPES = [
    ("Sorafenib", "Compound"),
    ("Imatinib", "Compound"),
    ("AURKC", "Gene"),
    ("KIT", "Gene"),
    ("Liver Cancer", "Disease"),
    ("Kidney Cancer", "Disease"),
    ("Leukemia", "Disease"),
    ("Liver", "Anatomy"),
]

BIO_TRIPLES = [
    ("Sorafenib", "treats", "Liver Cancer"),
    ("Liver Cancer", "resembles", "Kidney Cancer"),
    ("Sorafenib", "binds", "AURKC"),
    ("Kidney Cancer", "associates", "AURKC"),
    ("Imatinib", "binds", "KIT"),
    ("Leukemia", "associates", "KIT"),
    ("Imatinib", "treats", "Leukemia"),
    ("Liver", "expresses", "AURKC"),
    ("Liver Cancer", "localizes", "Liver"),
]


@pytest.fixture
def bio_kg():
    return load_graph(BIO_TRIPLES, BIO_TYPES)


@pytest.fixture
def bio_aug(bio_kg):
    return add_inverse_relations(bio_kg)


def random_graph(seed, n_entities=10, n_edges=25, relations=("a", "b", "c"), n_types=3):
    rng = np.random.default_rng(seed)
    ents = [f"e{i}" for i in range(n_entities)]
    rows = sorted({
        (ents[rng.integers(n_entities)], relations[rng.integers(len(relations))], ents[rng.integers(n_entities)])
        for _ in range(n_edges)
    })
    types = [(e, f"T{i % n_types}") for i, e in enumerate(ents)]
    return load_graph(rows, types)


@pytest.fixture(scope="session")
def synthetic_default():
    return generate_synthetic(SyntheticGraphConfig())
