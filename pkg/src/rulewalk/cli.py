"""``rulewalk`` command line: one binary, one subcommand per stage.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical failure.
Every command writes into a fresh run directory ``<out>/<command>-<timestamp>-<hash>``
holding its outputs and a ``manifest.json`` with input hashes.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import re
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, NumericalError, RulewalkError
from .evaluation import evaluate
from .graph import add_inverse_relations, format_stats, graph_stats, load_graph, write_graph
from .hetionet import convert_hetionet
from .inference import BeamConfig, format_path, rank_queries
from .pipeline import make_split, prepare_dataset, read_split, write_split
from .policy import checkpoint_header, file_digest, load_checkpoint, save_checkpoint
from .rules import RuleSet, estimate_confidence, parse_rules, serialize_rules
from .synthetic import SyntheticGraphConfig, generate_synthetic
from .training import TrainerConfig, format_config, format_log_record, load_config, train

log = logging.getLogger("rulewalk")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are configuration errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def version_tag() -> str:
    """Package version, plus the short commit when running from a git checkout."""
    tag = f"v{__version__}"
    try:
        out = subprocess.run(
            ["git", "-C", str(Path(__file__).resolve().parent), "rev-parse", "--short", "HEAD"],
            capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            tag += f"-g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return tag


# ---------------------------------------------------------------------------
# run directories and manifests
# ---------------------------------------------------------------------------

class Run:
    """A per-invocation output directory plus the manifest that describes it."""

    def __init__(self, args, command: str):
        self.command = command
        self.args = args
        self.seed = args.seed
        self.config: dict = {}
        self.inputs: dict[str, dict] = {}
        self.outputs: list[str] = []
        self.dir: Path | None = None

    def add_input(self, role: str, path) -> Path:
        p = Path(path)
        if not p.is_file():
            raise DataError(f"{role} file not found: {path}")
        self.inputs[role] = {"path": str(path), "sha256": file_digest(p)}
        return p

    def open(self) -> Path:
        key = json.dumps([self.command, self.config, self.inputs, self.seed], sort_keys=True)
        short = hashlib.sha256(key.encode()).hexdigest()[:8]
        base = Path(self.args.out) / f"{self.command}-{time.strftime('%Y%m%d-%H%M%S')}-{short}"
        path, n = base, 1
        while True:
            try:
                path.mkdir(parents=True, exist_ok=False)
                break
            except FileExistsError:
                n += 1
                path = base.with_name(f"{base.name}-{n}")
        self.dir = path
        return path

    def file(self, name: str) -> Path:
        self.outputs.append(name)
        return self.dir / name

    def write_manifest(self, **extra) -> Path:
        manifest = {
            "command": self.command,
            "version": version_tag(),
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": {name: file_digest(self.dir / name) for name in sorted(self.outputs)},
        }
        manifest.update(extra)
        path = self.dir / "manifest.json"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"run directory: {self.dir}")
        return path


# ---------------------------------------------------------------------------
# shared loading
# ---------------------------------------------------------------------------

def _load_kg(run: Run, args):
    graph = run.add_input("graph", args.graph)
    types = run.add_input("types", args.types)
    return load_graph(graph, types)


def _load_rules(run: Run, path, kg, head_relation: str | None = None) -> RuleSet:
    rules = parse_rules(run.add_input("rules", path), kg)
    if head_relation is not None and rules.head[1] != head_relation:
        raise ConfigError(f"{path}: rules predict {rules.head[1]!r}, config predicts {head_relation!r}")
    return rules


def _trainer_config(path, seed) -> TrainerConfig:
    config = load_config(path) if path else TrainerConfig()
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    return config


def _write_rankings(path, kg, rankings: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("query_compound\trank\tdisease\tscore\tbest_path\n")
        for c in sorted(rankings):
            for i, cand in enumerate(rankings[c], 1):
                fh.write(f"{kg.entity_name(c)}\t{i}\t{kg.entity_name(cand.entity)}\t{cand.score!r}\t"
                         f"{format_path(kg, cand.path)}\n")


def _write_text(path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    run = Run(args, "train")
    config = _trainer_config(args.config and run.add_input("config", args.config), args.seed)
    run.seed = config.seed
    kg = _load_kg(run, args)
    if args.rules:
        rules = _load_rules(run, args.rules, kg, config.head_relation)
    elif config.rule_weight > 0:
        raise ConfigError(f"rule_weight = {config.rule_weight} needs a --rules file")
    else:
        rules = RuleSet((config.source_type, config.head_relation, config.target_type))
    if config.rule_weight > 0 and len(rules) == 0:
        raise ConfigError(f"rule_weight = {config.rule_weight} but {args.rules} holds no rules")
    if args.split:
        splits = read_split(run.add_input("split", args.split), kg)
        generated = False
    else:
        splits = make_split(kg, config.head_relation, config.seed)
        generated = True
    ds = prepare_dataset(kg, splits, config.head_relation)
    run.config = dataclasses.asdict(config)
    run.open()

    with open(run.file("train_log.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        def on_step(record, _net):
            fh.write(format_log_record(record) + "\n")

        net, history = train(ds.walk, rules, splits["train"], config, on_step=on_step)
    _write_text(run.file("config.txt"), format_config(config))
    if generated:
        write_split(run.file("split.tsv"), kg, splits)
    save_checkpoint(net, run.file("policy.ckpt"), extra={"trainer": run.config, "manifest": "manifest.json"})
    last = history[-100:]
    summary = {k: float(np.mean([r[k] for r in last])) for k in ("mean_reward", "hit_fraction", "rule_match_fraction")}
    run.write_manifest(checkpoint="policy.ckpt", final=summary)
    print(" ".join(f"{k}={v:.4f}" for k, v in summary.items()))
    return 0


def _beam_from(args, run: Run, header: dict) -> tuple[TrainerConfig, BeamConfig]:
    if args.config:
        config = load_config(run.add_input("config", args.config))
    else:
        config = TrainerConfig(**header.get("extra", {}).get("trainer", {}))
    beam = BeamConfig(config.beam_width, config.path_length, args.mode, config.target_type, config.aggregate)
    return config, beam


def _load_policy(run: Run, args, ds_graph):
    ckpt = run.add_input("checkpoint", args.checkpoint)
    return load_checkpoint(ckpt, ds_graph), checkpoint_header(ckpt)


def cmd_evaluate(args) -> int:
    run = Run(args, "evaluate")
    run.seed = args.seed if args.seed is not None else 0
    kg = _load_kg(run, args)
    header = checkpoint_header(run.add_input("checkpoint", args.checkpoint))
    config, beam = _beam_from(args, run, header)
    if not args.split:
        raise ConfigError("evaluate needs --split")
    splits = read_split(run.add_input("split", args.split), kg)
    if not splits[args.subset]:
        raise DataError(f"{args.split} has no {args.subset} pairs")
    rules = _load_rules(run, args.rules, kg, config.head_relation) if args.rules else None
    if beam.mode == "pruned" and rules is None:
        raise ConfigError("--mode pruned needs --rules")
    ds = prepare_dataset(kg, splits, config.head_relation)
    net, _ = _load_policy(run, args, ds.walk)
    run.config = {"beam": dataclasses.asdict(beam), "subset": args.subset, "head_relation": config.head_relation}
    run.open()

    queries = splits[args.subset]
    rankings = rank_queries(ds.walk, net, [c for c, _ in queries], beam, rules, args.threads)
    meta = {
        "mode": beam.mode,
        "subset": args.subset,
        "beam_width": beam.beam_width,
        "path_length": beam.path_length,
        "seed": run.seed,
        "checkpoint_sha256": run.inputs["checkpoint"]["sha256"],
        "manifest": "manifest.json",
    }
    report = evaluate(rankings, queries, ds.known, meta)
    _write_rankings(run.file("rankings.tsv"), ds.walk, rankings)
    with open(run.file("queries.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("compound\tdisease\tfiltered_rank\n")
        for q in report.ranks:
            fh.write(f"{kg.entity_name(q.compound)}\t{kg.entity_name(q.disease)}\t{q.rank or '-'}\n")
    _write_text(run.file("report.txt"), report.to_kv())
    _write_text(run.file("report.json"), report.to_json())
    _write_text(run.file("metrics.csv"), report.to_csv())
    run.write_manifest(checkpoint=args.checkpoint)
    sys.stdout.write(report.to_kv())
    return 0


def cmd_rank(args) -> int:
    run = Run(args, "rank")
    run.seed = args.seed if args.seed is not None else 0
    kg = _load_kg(run, args)
    header = checkpoint_header(run.add_input("checkpoint", args.checkpoint))
    config, beam = _beam_from(args, run, header)
    rules = _load_rules(run, args.rules, kg, config.head_relation) if args.rules else None
    if beam.mode == "pruned" and rules is None:
        raise ConfigError("--mode pruned needs --rules")
    if args.split:
        splits = read_split(run.add_input("split", args.split), kg)
        walk = prepare_dataset(kg, splits, config.head_relation).walk
    else:
        splits, walk = None, add_inverse_relations(kg)
    if args.query:
        try:
            compounds = [kg.vocab.entity_id(q) for q in args.query]
        except KeyError as exc:
            raise DataError(f"unknown query entity {exc}") from None
    elif splits is not None:
        compounds = [c for c, _ in splits[args.subset]]
    elif kg.vocab.has_type(config.source_type):
        compounds = kg.entities_of_type(config.source_type).tolist()
    else:
        raise DataError(f"no {config.source_type!r} entities to rank from")
    net = load_checkpoint(args.checkpoint, walk)
    run.config = {"beam": dataclasses.asdict(beam), "queries": sorted(set(kg.entity_name(c) for c in compounds))}
    run.open()
    rankings = rank_queries(walk, net, compounds, beam, rules, args.threads)
    _write_rankings(run.file("rankings.tsv"), walk, rankings)
    run.write_manifest(checkpoint=args.checkpoint)
    return 0


def _annotate_rules(text: str, scores: list[float]) -> str:
    """Replace the SCORE field of each rule line, in order, leaving everything else untouched."""
    it = iter(scores)
    out = []
    for line in text.splitlines(keepends=True):
        stripped = line.lstrip()
        if stripped.startswith("SCORE="):
            lead = line[: len(line) - len(stripped)]
            line = lead + re.sub(r"^SCORE=\S+", f"SCORE={next(it)!r}", stripped, count=1)
        out.append(line)
    return "".join(out)


def cmd_estimate_confidence(args) -> int:
    run = Run(args, "estimate-confidence")
    run.seed = args.seed if args.seed is not None else 0
    kg = add_inverse_relations(_load_kg(run, args))
    if not args.rules:
        raise ConfigError("estimate-confidence needs --rules")
    path = run.add_input("rules", args.rules)
    rules = parse_rules(path, kg)
    if args.samples <= 0:
        raise ConfigError("--samples must be positive")
    run.config = {"samples": args.samples, "method": args.method}
    seeds = np.random.SeedSequence(run.seed).spawn(max(len(rules), 1))
    scores = []
    for rule, s in zip(rules, seeds):
        try:
            scores.append(estimate_confidence(kg, rule, args.samples, np.random.default_rng(s), args.method))
        except DataError as exc:
            raise type(exc)(f"rule '{rule.body}': {exc}") from None
    run.open()
    with open(path, encoding="utf-8") as fh:
        original = fh.read()
    annotated = _annotate_rules(original, scores)
    parse_rules(annotated)  # must still be a valid rule file
    _write_text(run.file("rules.txt"), annotated)
    run.write_manifest()
    for rule, score in zip(rules, scores):
        print(f"{score:.4f}\t{rule.body}")
    return 0


def cmd_generate_synthetic(args) -> int:
    run = Run(args, "generate-synthetic")
    if args.config:
        try:
            with open(run.add_input("config", args.config), encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
        gconf = SyntheticGraphConfig.from_dict(raw)
    else:
        gconf = SyntheticGraphConfig()
    if args.seed is not None:
        gconf = dataclasses.replace(gconf, seed=args.seed)
    run.seed = gconf.seed
    kg, planted, rule = generate_synthetic(gconf)
    run.config = json.loads(gconf.to_json())
    run.open()
    write_graph(kg, run.file("triples.tsv"), run.file("types.tsv"))
    _write_text(run.file("rules.txt"), serialize_rules(RuleSet(gconf.head, (rule,))))
    splits = make_split(kg, gconf.head[1], gconf.seed)
    write_split(run.file("split.tsv"), kg, splits)
    _write_text(run.file("synthetic_config.json"), gconf.to_json() + "\n")
    stats = graph_stats(kg, gconf.head[1], gconf.head[0], gconf.head[2])
    run.write_manifest(stats=stats, planted_edges=len(planted))
    sys.stdout.write(format_stats(stats))
    return 0


def cmd_stats(args) -> int:
    kg = load_graph(args.graph, args.types)
    sys.stdout.write(format_stats(graph_stats(kg, args.head_relation, args.source_type, args.target_type)))
    return 0


def cmd_convert_hetionet(args) -> int:
    run = Run(args, "convert-hetionet")
    run.seed = None
    nodes = run.add_input("nodes", args.nodes)
    edges = run.add_input("edges", args.edges)
    run.config = {"symmetrize": args.symmetrize}
    run.open()
    counts = convert_hetionet(nodes, edges, run.file("triples.tsv"), run.file("types.tsv"), args.symmetrize)
    run.write_manifest(counts=counts)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default: config value, else 0)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads for per-query inference")
    common.add_argument("--out", default="runs", help="parent directory for run directories")
    common.add_argument("-v", "--verbose", action="store_true")

    graph = _Parser(add_help=False)
    graph.add_argument("--graph", required=True, help="triples TSV: head, relation, tail")
    graph.add_argument("--types", required=True, help="types TSV: entity, type")

    parser = _Parser(prog="rulewalk", description="Rule-guided policy walks for knowledge-graph link prediction.")
    parser.add_argument("--version", action="version", version=f"rulewalk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", parents=[common, graph], help="train a walk policy")
    p.add_argument("--config", help="key = value trainer config")
    p.add_argument("--rules", help="rule file (required when rule_weight > 0)")
    p.add_argument("--split", help="split TSV; generated from --seed when omitted")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("evaluate", cmd_evaluate, "filtered hits@k / MRR on a split"),
                                 ("rank", cmd_rank, "write ranked candidates with explanations")):
        p = sub.add_parser(name, parents=[common, graph], help=helptext)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--rules")
        p.add_argument("--split")
        p.add_argument("--config", help="override beam settings stored in the checkpoint")
        p.add_argument("--mode", choices=("full", "pruned"), default="full")
        p.add_argument("--subset", choices=("train", "valid", "test"), default="test")
        if name == "rank":
            p.add_argument("--query", action="append", help="source entity name (repeatable)")
        p.set_defaults(func=func)

    p = sub.add_parser("estimate-confidence", parents=[common, graph], help="Monte-Carlo rule confidence")
    p.add_argument("--rules", required=True)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--method", choices=("uniform", "stepwise"), default="uniform")
    p.set_defaults(func=cmd_estimate_confidence)

    p = sub.add_parser("generate-synthetic", parents=[common], help="planted-rule synthetic graph")
    p.add_argument("--config", help="JSON synthetic-graph config")
    p.set_defaults(func=cmd_generate_synthetic)

    p = sub.add_parser("stats", parents=[graph], help="print graph statistics")
    p.add_argument("--head-relation", default="treats")
    p.add_argument("--source-type", default="Compound")
    p.add_argument("--target-type", default="Disease")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("convert-hetionet", parents=[common], help="convert the Hetionet v1.0 dump")
    p.add_argument("--nodes", required=True, help="hetionet-v1.0-nodes.tsv[.gz]")
    p.add_argument("--edges", required=True, help="hetionet-v1.0-edges.sif[.gz]")
    p.add_argument("--symmetrize", action="store_true", help="add reverse triples for undirected metaedges")
    p.set_defaults(func=cmd_convert_hetionet)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("rulewalk: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config error", exc)
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, "numerical failure", exc)
    except (DataError, OSError, RulewalkError) as exc:
        return _fail(EXIT_DATA, "data error", exc)


def _fail(code: int, kind: str, exc: Exception) -> int:
    print(f"rulewalk: {kind}: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
