"""Conversion of the public Hetionet v1.0 dump into the triples/types format.

Inputs are ``hetionet-v1.0-nodes.tsv`` (columns id, name, kind) and
``hetionet-v1.0-edges.sif`` (columns source, metaedge, target), both with a
header row and optionally gzip-compressed. Entity names are the Hetionet node
ids (``Compound::DB00997``), entity types the node kinds, and relations the
edge kinds below.
"""
from __future__ import annotations

import gzip
from typing import Iterator

from .errors import DataError

# metaedge abbreviation -> relation name
METAEDGE_KINDS = {
    "AdG": "downregulates",
    "AeG": "expresses",
    "AuG": "upregulates",
    "CbG": "binds",
    "CcSE": "causes",
    "CdG": "downregulates",
    "CpD": "palliates",
    "CrC": "resembles",
    "CtD": "treats",
    "CuG": "upregulates",
    "DaG": "associates",
    "DdG": "downregulates",
    "DlA": "localizes",
    "DpS": "presents",
    "DrD": "resembles",
    "DuG": "upregulates",
    "GcG": "covaries",
    "GiG": "interacts",
    "GpBP": "participates",
    "GpCC": "participates",
    "GpMF": "participates",
    "GpPW": "participates",
    "Gr>G": "regulates",
    "PCiC": "includes",
}

# undirected metaedges between nodes of one kind; the dump lists each pair once
UNDIRECTED = frozenset({"CrC", "DrD", "GcG", "GiG"})


def _open(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def _rows(path, ncols: int) -> Iterator[tuple[int, list[str]]]:
    with _open(path) as fh:
        next(fh, None)  # header
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < ncols:
                raise DataError(f"{path}:{lineno}: expected {ncols} tab-separated columns")
            yield lineno, parts


def convert_hetionet(nodes_path, edges_path, triples_out, types_out, symmetrize: bool = False) -> dict:
    """Write ``triples_out`` / ``types_out``; returns counts of what was written.

    With ``symmetrize`` the undirected same-kind metaedges also get their
    reverse triple, so rules such as ``Compound -[resembles]-> Compound`` match
    either stored orientation.
    """
    kinds = {}
    with open(types_out, "w", encoding="utf-8", newline="\n") as out:
        for _, (node_id, _name, kind, *_) in _rows(nodes_path, 3):
            if node_id in kinds:
                raise DataError(f"{nodes_path}: duplicate node id {node_id!r}")
            kinds[node_id] = kind
            out.write(f"{node_id}\t{kind}\n")
    n_edges = 0
    with open(triples_out, "w", encoding="utf-8", newline="\n") as out:
        for lineno, (src, metaedge, dst, *_) in _rows(edges_path, 3):
            if metaedge not in METAEDGE_KINDS:
                raise DataError(f"{edges_path}:{lineno}: unknown metaedge {metaedge!r}")
            for node in (src, dst):
                if node not in kinds:
                    raise DataError(f"{edges_path}:{lineno}: node {node!r} missing from {nodes_path}")
            rel = METAEDGE_KINDS[metaedge]
            out.write(f"{src}\t{rel}\t{dst}\n")
            n_edges += 1
            if symmetrize and metaedge in UNDIRECTED and src != dst:
                out.write(f"{dst}\t{rel}\t{src}\n")
                n_edges += 1
    return {"entities": len(kinds), "edges": n_edges}
