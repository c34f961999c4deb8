"""Reading and writing instances and results as JSON documents.

An instance document has four sections: the directed graph (vertices and
capacitated arcs), the terminal list, the tree (vertices and edges with
two lengths each), and the subtree of every terminal.  Rationals are
written as "p/q" strings so round trips stay exact.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import List, Optional, Tuple

from .certify import Certificate
from .errors import InputError
from .graphs import Digraph, Network
from .multiflow import TerminalPath
from .realization import RealizationTree


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(text) -> Fraction:
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, str):
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise InputError(f"bad rational literal {text!r}", code="bad-rational")
    raise InputError(f"bad rational literal {text!r}", code="bad-rational")


def instance_to_document(net: Network, real: RealizationTree) -> dict:
    return {
        "graph": {
            "vertices": sorted(net.vertices),
            "arcs": [
                {"id": a.id, "tail": a.tail, "head": a.head, "cap": net.capacity[a.id]}
                for a in net.graph.arcs
            ],
        },
        "terminals": list(net.terminals),
        "tree": {
            "vertices": sorted(real.vertices),
            "edges": [
                {
                    "u": u,
                    "v": v,
                    "len_uv": format_rational(real.arc_length[(u, v)]),
                    "len_vu": format_rational(real.arc_length[(v, u)]),
                }
                for (u, v) in real.edges()
            ],
        },
        "subtrees": {str(t): sorted(real.subtrees[t]) for t in net.terminals},
    }


def _expect(doc: dict, key: str, kind, where: str):
    if not isinstance(doc, dict) or key not in doc:
        raise InputError(f"missing field {key!r} in {where}", code="malformed-document")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise InputError(f"field {key!r} in {where} has the wrong type", code="malformed-document")
    return value


def document_to_instance(doc: dict) -> Tuple[Network, RealizationTree]:
    graph = _expect(doc, "graph", dict, "document")
    vertices = _expect(graph, "vertices", list, "graph")
    arcs_doc = _expect(graph, "arcs", list, "graph")
    arcs = []
    caps = {}
    for a in arcs_doc:
        aid = _expect(a, "id", None, "arc")
        tail = _expect(a, "tail", None, "arc")
        head = _expect(a, "head", None, "arc")
        cap = _expect(a, "cap", None, "arc")
        if not isinstance(cap, int) or isinstance(cap, bool):
            raise InputError(f"capacity of arc {aid!r} must be an integer", code="non-integer-capacity")
        if cap < 0:
            raise InputError(f"capacity of arc {aid!r} is negative", code="negative-capacity")
        arcs.append((aid, tail, head))
        caps[aid] = cap
    terminals = tuple(_expect(doc, "terminals", list, "document"))
    net = Network(Digraph.build(vertices, arcs), terminals, caps)

    tree = _expect(doc, "tree", dict, "document")
    tvertices = _expect(tree, "vertices", list, "tree")
    edges = []
    for e in _expect(tree, "edges", list, "tree"):
        u = _expect(e, "u", None, "tree edge")
        v = _expect(e, "v", None, "tree edge")
        edges.append((u, v, parse_rational(_expect(e, "len_uv", None, "tree edge")),
                      parse_rational(_expect(e, "len_vu", None, "tree edge"))))
    subs_doc = _expect(doc, "subtrees", dict, "document")
    subtrees = {}
    for t in terminals:
        key = str(t)
        if key not in subs_doc:
            raise InputError(f"terminal {t!r} has no subtree", code="missing-subtree")
        subtrees[t] = list(subs_doc[key])
    real = RealizationTree.build(tvertices, edges, subtrees)
    return net, real


def parse_instance(text: str) -> Tuple[Network, RealizationTree]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"not valid JSON: {exc}", code="malformed-document")
    return document_to_instance(doc)


def serialize_instance(net: Network, real: RealizationTree) -> str:
    return json.dumps(instance_to_document(net, real), indent=2, sort_keys=False) + "\n"


def result_to_document(value: Fraction, paths: Optional[List[TerminalPath]],
                       cert: Certificate, stats: dict) -> dict:
    doc = {
        "value": format_rational(value),
        "certificate": [
            {"tree_arc": [u, v], "cut": sorted(side)}
            for (u, v), side in sorted(cert.cuts.items(), key=lambda kv: (str(kv[0][0]), str(kv[0][1])))
        ],
        "stats": stats,
    }
    if paths is not None:
        doc["paths"] = [
            {"from": p.source, "to": p.target, "arcs": list(p.arcs), "weight": p.weight}
            for p in paths
        ]
    return doc


def document_to_result(doc: dict):
    value = parse_rational(_expect(doc, "value", None, "result"))
    paths = None
    if "paths" in doc:
        paths = []
        for p in doc["paths"]:
            paths.append(TerminalPath(
                _expect(p, "from", None, "path"),
                _expect(p, "to", None, "path"),
                tuple(_expect(p, "arcs", list, "path")),
                _expect(p, "weight", int, "path"),
            ))
    cuts = {}
    for entry in _expect(doc, "certificate", list, "result"):
        arc = _expect(entry, "tree_arc", list, "certificate entry")
        if len(arc) != 2:
            raise InputError("tree_arc must have two vertices", code="malformed-document")
        cuts[(arc[0], arc[1])] = frozenset(_expect(entry, "cut", list, "certificate entry"))
    return value, paths, Certificate(cuts)


def parse_result(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"not valid JSON: {exc}", code="malformed-document")
    return document_to_result(doc)


def serialize_result(value, paths, cert, stats) -> str:
    return json.dumps(result_to_document(value, paths, cert, stats), indent=2) + "\n"
