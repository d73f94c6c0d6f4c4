import gzip
import os
from pathlib import Path

import pytest

from rulewalk.cli import main
from rulewalk.errors import DataError
from rulewalk.graph import add_inverse_relations, graph_stats, load_graph
from rulewalk.hetionet import METAEDGE_KINDS, convert_hetionet
from rulewalk.rules import estimate_confidence, parse_rules

ROOT = Path(__file__).resolve().parents[1]
RAW = Path(os.environ.get("HETIONET_DIR", ROOT / "data" / "hetionet" / "raw"))

NODES = """id\tname\tkind
Compound::DB00398\tSorafenib\tCompound
Compound::DB00619\tImatinib\tCompound
Disease::DOID:686\tliver carcinoma\tDisease
Disease::DOID:263\tkidney cancer\tDisease
Gene::8945\tAURKC\tGene
Pharmacologic Class::N0000175605\tKinase Inhibitor\tPharmacologic Class
"""

EDGES = """source\tmetaedge\ttarget
Compound::DB00398\tCtD\tDisease::DOID:686
Compound::DB00398\tCbG\tGene::8945
Disease::DOID:263\tDaG\tGene::8945
Pharmacologic Class::N0000175605\tPCiC\tCompound::DB00398
Pharmacologic Class::N0000175605\tPCiC\tCompound::DB00619
Compound::DB00619\tCtD\tDisease::DOID:263
Compound::DB00398\tCrC\tCompound::DB00619
Disease::DOID:686\tDrD\tDisease::DOID:263
"""


@pytest.fixture
def dump(tmp_path):
    (tmp_path / "nodes.tsv").write_text(NODES)
    with gzip.open(tmp_path / "edges.sif.gz", "wt") as fh:
        fh.write(EDGES)
    return tmp_path


def test_metaedge_table_covers_all_24():
    assert len(METAEDGE_KINDS) == 24
    assert METAEDGE_KINDS["CtD"] == "treats" and METAEDGE_KINDS["Gr>G"] == "regulates"


def test_convert_and_load(dump):
    counts = convert_hetionet(dump / "nodes.tsv", dump / "edges.sif.gz", dump / "t.tsv", dump / "y.tsv")
    assert counts == {"entities": 6, "edges": 8}
    kg = load_graph(dump / "t.tsv", dump / "y.tsv")
    s = graph_stats(kg)
    assert s["treats_edges"] == 2 and s["type[Compound]"] == 2 and s["metaedges"] == 6
    aug = add_inverse_relations(kg)
    rules = parse_rules(ROOT / "data" / "hetionet" / "rules.txt")
    assert len(rules) == 10 and rules.rules[0].score == 0.446
    # includes^-1, includes, treats: two compounds share one class, giving 4 body paths of which
    # the two that return to the starting compound end on one of its own treats edges
    top = rules.rules[0]
    assert estimate_confidence(aug, top, 4000, seed=0) == pytest.approx(0.5, abs=0.05)


def test_symmetrize(dump):
    counts = convert_hetionet(dump / "nodes.tsv", dump / "edges.sif.gz", dump / "t.tsv", dump / "y.tsv",
                              symmetrize=True)
    assert counts["edges"] == 10


def test_bad_dump(dump):
    (dump / "bad.sif").write_text("source\tmetaedge\ttarget\nCompound::DB00398\tXyZ\tGene::8945\n")
    with pytest.raises(DataError):
        convert_hetionet(dump / "nodes.tsv", dump / "bad.sif", dump / "t.tsv", dump / "y.tsv")
    (dump / "orphan.sif").write_text("source\tmetaedge\ttarget\nCompound::DB00398\tCbG\tGene::1\n")
    with pytest.raises(DataError):
        convert_hetionet(dump / "nodes.tsv", dump / "orphan.sif", dump / "t.tsv", dump / "y.tsv")


def test_cli_conversion(dump, capsys):
    code = main(["convert-hetionet", "--nodes", str(dump / "nodes.tsv"), "--edges", str(dump / "edges.sif.gz"),
                 "--out", str(dump / "runs")])
    assert code == 0
    out = capsys.readouterr().out
    run = Path(out.strip().split(": ", 1)[1])
    assert (run / "triples.tsv").is_file() and (run / "manifest.json").is_file()


def _raw_files():
    nodes = [RAW / n for n in ("hetionet-v1.0-nodes.tsv", "hetionet-v1.0-nodes.tsv.gz") if (RAW / n).exists()]
    edges = [RAW / n for n in ("hetionet-v1.0-edges.sif", "hetionet-v1.0-edges.sif.gz") if (RAW / n).exists()]
    return (nodes[0], edges[0]) if nodes and edges else None


@pytest.mark.skipif(_raw_files() is None, reason="Hetionet dump not present")
def test_real_hetionet_counts(tmp_path):
    nodes, edges = _raw_files()
    convert_hetionet(nodes, edges, tmp_path / "t.tsv", tmp_path / "y.tsv")
    s = graph_stats(load_graph(tmp_path / "t.tsv", tmp_path / "y.tsv"))
    assert (s["entities"], s["edges"], s["types"], s["metaedges"]) == (47031, 2250197, 11, 24)
    assert (s["type[Compound]"], s["type[Disease]"], s["treats_edges"]) == (1552, 137, 775)
