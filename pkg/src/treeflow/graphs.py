"""Directed multigraphs with integer arc capacities and terminal sets.

Vertices and arcs are identified by opaque hashable ids.  Arc ids stay
stable across contraction so that paths computed in a contracted network
can be mapped back to the original arcs.  Parallel and antiparallel arcs
are first class; self-loops are dropped on construction and whenever a
contraction creates them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, Tuple

from .errors import InputError, ContractViolation

VertexId = Hashable
ArcId = Hashable

MAX_CAPACITY = 2**63 - 1


def sort_key(x):
    """Stable ordering key for mixed-type ids."""
    return (x.__class__.__name__, repr(x))


@dataclass(frozen=True)
class Arc:
    id: ArcId
    tail: VertexId
    head: VertexId


@dataclass(frozen=True)
class Digraph:
    """Immutable directed multigraph. Loops are removed on construction."""

    vertices: frozenset
    arcs: Tuple[Arc, ...]

    @staticmethod
    def build(vertices: Iterable[VertexId], arcs: Iterable[Tuple[ArcId, VertexId, VertexId]]) -> "Digraph":
        vset = frozenset(vertices)
        seen = set()
        kept = []
        for aid, tail, head in arcs:
            if aid in seen:
                raise InputError(f"duplicate arc id {aid!r}", code="duplicate-arc")
            seen.add(aid)
            if tail not in vset or head not in vset:
                raise InputError(f"arc {aid!r} references unknown vertex", code="dangling-reference")
            if tail == head:
                continue  # loops carry no flow and no cut capacity
            kept.append(Arc(aid, tail, head))
        return Digraph(vset, tuple(kept))

    def arcs_by_id(self) -> Dict[ArcId, Arc]:
        return {a.id: a for a in self.arcs}


@dataclass(frozen=True)
class Network:
    """A digraph with an ordered terminal set and integer capacities."""

    graph: Digraph
    terminals: Tuple[VertexId, ...]
    capacity: Dict[ArcId, int]

    def __post_init__(self):
        vset = self.graph.vertices
        if len(self.terminals) < 1:
            raise InputError("a network needs at least one terminal", code="no-terminals")
        if len(set(self.terminals)) != len(self.terminals):
            raise InputError("terminal list contains duplicates", code="duplicate-terminal")
        for t in self.terminals:
            if t not in vset:
                raise InputError(f"terminal {t!r} is not a vertex", code="dangling-reference")
        for a in self.graph.arcs:
            c = self.capacity.get(a.id)
            if c is None:
                raise InputError(f"arc {a.id!r} has no capacity", code="missing-capacity")
            if not isinstance(c, int) or isinstance(c, bool):
                raise InputError(f"capacity of arc {a.id!r} is not an integer", code="non-integer-capacity")
            if c < 0:
                raise InputError(f"capacity of arc {a.id!r} is negative", code="negative-capacity")
            if c > MAX_CAPACITY:
                raise InputError(f"capacity of arc {a.id!r} exceeds 64-bit range", code="capacity-overflow")

    @property
    def vertices(self) -> frozenset:
        return self.graph.vertices

    def out_arcs(self, v: VertexId):
        return [a for a in self.graph.arcs if a.tail == v]

    def in_arcs(self, v: VertexId):
        return [a for a in self.graph.arcs if a.head == v]

    def inner_vertices(self):
        ts = set(self.terminals)
        return [v for v in sorted(self.vertices, key=sort_key) if v not in ts]


@dataclass(frozen=True)
class Cut:
    """A vertex cut given by its source side X; the sink side is implicit."""

    source_side: frozenset

    def validate(self, net: Network) -> None:
        x = self.source_side
        if not x or not (x < net.vertices):
            raise InputError("cut side must be a nonempty proper vertex subset", code="invalid-cut")


def divergence(net: Network, f: Dict[ArcId, int], v: VertexId) -> int:
    """Net outflow of f at v: f over out-arcs minus f over in-arcs."""
    if v not in net.vertices:
        raise InputError(f"unknown vertex {v!r}", code="dangling-reference")
    total = 0
    for a in net.graph.arcs:
        w = f.get(a.id, 0)
        if w:
            if a.tail == v:
                total += w
            if a.head == v:
                total -= w
    return total


def is_eulerian_at(net: Network, v: VertexId) -> bool:
    """True iff capacity into v equals capacity out of v."""
    if v not in net.vertices:
        raise InputError(f"unknown vertex {v!r}", code="dangling-reference")
    return divergence(net, net.capacity, v) == 0


def cut_capacity(net: Network, cut: Cut) -> int:
    """Total capacity of arcs leaving the cut's source side."""
    cut.validate(net)
    x = cut.source_side
    return sum(net.capacity[a.id] for a in net.graph.arcs if a.tail in x and a.head not in x)


def contract(net: Network, which: Iterable[VertexId], z: VertexId) -> Network:
    """Contract a vertex set into a fresh vertex z.

    Arcs inside the contracted set disappear; all other arcs keep their
    ids and capacities.  The terminal set becomes (S minus the set) plus z.
    """
    xs = set(which)
    if not xs:
        raise InputError("cannot contract an empty vertex set", code="invalid-input")
    if z in net.vertices:
        raise InputError(f"contraction vertex {z!r} already exists", code="invalid-input")
    for v in xs:
        if v not in net.vertices:
            raise InputError(f"unknown vertex {v!r}", code="dangling-reference")

    def image(v):
        return z if v in xs else v

    new_vertices = (net.vertices - xs) | {z}
    new_arcs = []
    new_caps = {}
    for a in net.graph.arcs:
        t, h = image(a.tail), image(a.head)
        if t == h:
            continue
        new_arcs.append((a.id, t, h))
        new_caps[a.id] = net.capacity[a.id]
    terminals = tuple(t for t in net.terminals if t not in xs) + (z,)
    return Network(Digraph.build(new_vertices, new_arcs), terminals, new_caps)


def total_capacity(net: Network) -> int:
    total = sum(net.capacity[a.id] for a in net.graph.arcs)
    if total > MAX_CAPACITY:
        raise ContractViolation("capacity sum exceeds 64-bit range")
    return total
