import json
from pathlib import Path

import pytest

from rulewalk.cli import main
from rulewalk.graph import graph_stats, load_graph
from rulewalk.rules import parse_rules

TINY = """num_updates = 20
batch_size = 2
rollouts_per_query = 8
embedding_dim = 4
hidden_size = 6
mlp_size = 6
num_layers = 1
beam_width = 100
"""


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out if capsys else ""
    return code, out


def run_dir(out: str) -> Path:
    line = [l for l in out.splitlines() if l.startswith("run directory: ")][-1]
    return Path(line.split(": ", 1)[1])


@pytest.fixture
def synth(tmp_path, capsys):
    code, out = run(["generate-synthetic", "--out", tmp_path / "runs", "--seed", 7], capsys)
    assert code == 0
    return run_dir(out)


@pytest.fixture
def tiny_conf(tmp_path):
    p = tmp_path / "tiny.conf"
    p.write_text(TINY)
    return p


def _data(g):
    return ["--graph", g / "triples.tsv", "--types", g / "types.tsv"]


def test_generate_emits_loadable_files(synth):
    for name in ("triples.tsv", "types.tsv", "rules.txt", "split.tsv", "manifest.json"):
        assert (synth / name).is_file()
    kg = load_graph(synth / "triples.tsv", synth / "types.tsv")
    manifest = json.loads((synth / "manifest.json").read_text())
    assert graph_stats(kg, "treats", "Compound", "Disease") == manifest["stats"]
    assert manifest["stats"]["treats_edges"] == manifest["planted_edges"]
    assert len(parse_rules(synth / "rules.txt", kg)) == 1
    assert set(manifest["outputs"]) >= {"triples.tsv", "types.tsv", "rules.txt", "split.tsv"}


def test_generate_infeasible_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"generation_probability": 2.0}))
    assert run(["generate-synthetic", "--config", bad, "--out", tmp_path], capsys)[0] == 1
    bad.write_text("{not json")
    assert run(["generate-synthetic", "--config", bad, "--out", tmp_path], capsys)[0] == 1


def test_train_evaluate_rank(tmp_path, synth, tiny_conf, capsys):
    code, out = run(["train", "--config", tiny_conf, *_data(synth), "--rules", synth / "rules.txt",
                     "--split", synth / "split.tsv", "--out", tmp_path / "runs", "--seed", 1], capsys)
    assert code == 0
    t = run_dir(out)
    assert (t / "policy.ckpt").is_file()
    log = [json.loads(l) for l in (t / "train_log.jsonl").read_text().splitlines()]
    assert len(log) == 20 and log[-1]["step"] == 20
    manifest = json.loads((t / "manifest.json").read_text())
    assert manifest["seed"] == 1 and manifest["checkpoint"] == "policy.ckpt"
    assert manifest["inputs"]["rules"]["sha256"]

    code, out = run(["evaluate", "--checkpoint", t / "policy.ckpt", *_data(synth), "--rules", synth / "rules.txt",
                     "--split", synth / "split.tsv", "--mode", "pruned", "--out", tmp_path / "runs"], capsys)
    assert code == 0
    e = run_dir(out)
    report = (e / "report.txt").read_text()
    assert "mode=pruned\n" in report
    assert json.loads((e / "report.json").read_text())["metadata"]["mode"] == "pruned"
    header = (e / "rankings.tsv").read_text().splitlines()[0]
    assert header == "query_compound\trank\tdisease\tscore\tbest_path"

    query = (synth / "split.tsv").read_text().splitlines()[0].split("\t")[1]
    code, out = run(["rank", "--checkpoint", t / "policy.ckpt", *_data(synth), "--query", query,
                     "--out", tmp_path / "runs"], capsys)
    assert code == 0
    rows = (run_dir(out) / "rankings.tsv").read_text().splitlines()[1:]
    assert rows and all(r.startswith(query + "\t") for r in rows)
    # an isolated compound can only stay put, so nothing is ranked
    code, out = run(["rank", "--checkpoint", t / "policy.ckpt", *_data(synth), "--query", "Compound_0001",
                     "--out", tmp_path / "runs"], capsys)
    assert code == 0 and (run_dir(out) / "rankings.tsv").read_text().count("\n") == 1


def test_train_error_codes(tmp_path, synth, tiny_conf, capsys):
    base = ["train", "--config", tiny_conf, *_data(synth), "--split", synth / "split.tsv", "--out", tmp_path]
    missing = tmp_path / "nowhere" / "rules.txt"
    code = run(base + ["--rules", missing])[0]
    err = capsys.readouterr().err
    assert code == 2 and str(missing) in err
    empty = tmp_path / "empty_rules.txt"
    empty.write_text("HEAD Compound treats Disease\n")
    assert run(base + ["--rules", empty], capsys)[0] == 1
    assert run(base, capsys)[0] == 1  # lambda > 0 but no rules at all
    bad = tmp_path / "bad.conf"
    bad.write_text("mystery = 3\n")
    assert run(["train", "--config", bad, *_data(synth), "--rules", synth / "rules.txt", "--out", tmp_path],
               capsys)[0] == 1
    with pytest.raises(SystemExit) as exc:
        main(["train", "--bogus-flag"])
    assert exc.value.code == 1


def test_numerical_failure_exits_3(tmp_path, synth, capsys, monkeypatch):
    import rulewalk.cli as cli
    from rulewalk.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("non-finite gradient")

    monkeypatch.setattr(cli, "train", boom)
    conf = tmp_path / "c.conf"
    conf.write_text(TINY)
    code = run(["train", "--config", conf, *_data(synth), "--rules", synth / "rules.txt", "--out", tmp_path], capsys)[0]
    assert code == 3


def test_evaluate_hash_mismatch(tmp_path, synth, tiny_conf, capsys):
    code, out = run(["train", "--config", tiny_conf, *_data(synth), "--rules", synth / "rules.txt",
                     "--split", synth / "split.tsv", "--out", tmp_path / "runs"], capsys)
    ckpt = run_dir(out) / "policy.ckpt"
    code, out = run(["generate-synthetic", "--out", tmp_path / "other", "--seed", 8,
                     "--config", _write_json(tmp_path / "g.json", {"entity_counts": {
                         "Compound": 50, "Disease": 40, "Gene": 120, "Anatomy": 30, "Side Effect": 50}})], capsys)
    other = run_dir(out)
    code = run(["evaluate", "--checkpoint", ckpt, *_data(other), "--split", other / "split.tsv",
                "--out", tmp_path / "runs"], capsys)[0]
    assert code == 2


def _write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_estimate_confidence_command(tmp_path, synth, capsys):
    original = (synth / "rules.txt").read_text()
    code, out = run(["estimate-confidence", *_data(synth), "--rules", synth / "rules.txt", "--samples", 2000,
                     "--out", tmp_path / "runs", "--seed", 5], capsys)
    assert code == 0
    est = parse_rules(run_dir(out) / "rules.txt")
    assert est.rules[0].score == pytest.approx(1.0)
    assert (synth / "rules.txt").read_text() == original

    bad = tmp_path / "unreal.txt"
    bad.write_text("HEAD Compound treats Disease\nSCORE=0.5 Compound -[causes]-> Side Effect -[binds]-> Disease\n")
    code = run(["estimate-confidence", *_data(synth), "--rules", bad, "--out", tmp_path / "runs"])[0]
    err = capsys.readouterr().err
    assert code == 2 and "Compound -[causes]-> Side Effect -[binds]-> Disease" in err


def test_annotation_keeps_comments(tmp_path, synth, capsys):
    rules = tmp_path / "r.txt"
    rules.write_text("# planted\nHEAD Compound treats Disease\n  # indented note\n"
                     "SCORE=0.1 Compound -[binds]-> Gene -[interacts]-> Gene -[associates^-1]-> Disease\n")
    code, out = run(["estimate-confidence", *_data(synth), "--rules", rules, "--samples", 100,
                     "--out", tmp_path / "runs"], capsys)
    text = (run_dir(out) / "rules.txt").read_text().splitlines()
    assert text[0] == "# planted" and text[2] == "  # indented note"
    assert text[3].startswith("SCORE=1.0 ")


def _files(d: Path):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_commands_are_byte_reproducible(tmp_path, synth, tiny_conf, capsys):
    def twice(argv):
        dirs = []
        for _ in range(2):
            code, out = run(argv, capsys)
            assert code == 0
            dirs.append(run_dir(out))
        assert dirs[0] != dirs[1]
        assert _files(dirs[0]) == _files(dirs[1])
        return dirs[0]

    g = twice(["generate-synthetic", "--out", tmp_path / "g", "--seed", 3])
    t = twice(["train", "--config", tiny_conf, *_data(g), "--rules", g / "rules.txt", "--split", g / "split.tsv",
               "--out", tmp_path / "t", "--seed", 2])
    for mode in ("full", "pruned"):
        twice(["evaluate", "--checkpoint", t / "policy.ckpt", *_data(g), "--rules", g / "rules.txt",
               "--split", g / "split.tsv", "--mode", mode, "--out", tmp_path / "e", "--seed", 2])
    twice(["rank", "--checkpoint", t / "policy.ckpt", *_data(g), "--split", g / "split.tsv",
           "--out", tmp_path / "r", "--threads", 3])
    twice(["estimate-confidence", *_data(g), "--rules", g / "rules.txt", "--samples", 500, "--out", tmp_path / "c"])


def test_stats_command(synth, capsys):
    code, out = run(["stats", *_data(synth)], capsys)
    assert code == 0
    assert "entities=300\n" in out and "treats_edges=" in out
