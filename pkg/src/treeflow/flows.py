"""Integer flow primitives: blocking-flow max flow, residual min cuts,
two-phase lexicographic flows, and decomposition of nonnegative integer
arc functions into weighted simple paths.

All routines are deterministic: arcs are scanned in the order they appear
in the network, and path peeling always follows the lowest-index positive
arc.  Internally vertices and arcs are mapped to dense integer indices;
the public surface speaks in the network's own ids.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from .errors import InputError, ContractViolation
from .graphs import ArcId, Network, Cut, VertexId, sort_key, total_capacity


@dataclass(frozen=True)
class PathFlow:
    """A simple directed path (as a tuple of arc ids) carrying integer weight."""

    arcs: Tuple[ArcId, ...]
    weight: int


# sparse nonnegative integer arc function, bounded by capacity when paired
# with a network
FlowFunction = Dict[ArcId, int]

WeightedPathCollection = List[PathFlow]


class _Dinic:
    """Residual graph shared by max_flow and lex_max_flow.

    Residual arcs are stored as twinned halves: index 2k is the forward
    copy of input arc k, index 2k+1 its reverse.  Synthetic super-source
    and super-sink arcs are appended after the real ones and are stripped
    from the reported flow.
    """

    def __init__(self, net: Network):
        self.net = net
        verts = sorted(net.vertices, key=sort_key)
        self.vid = {v: i for i, v in enumerate(verts)}
        self.verts = verts
        n = len(verts) + 2  # two extra slots for super-source/sink
        self.n = n
        self.super_s = len(verts)
        self.super_t = len(verts) + 1
        self.head: List[int] = []
        self.cap: List[int] = []
        self.adj: List[List[int]] = [[] for _ in range(n)]
        self.real_arc_ids: List[ArcId] = []
        for a in net.graph.arcs:
            self._add(self.vid[a.tail], self.vid[a.head], net.capacity[a.id])
            self.real_arc_ids.append(a.id)
        self.n_real = len(self.real_arc_ids)
        self.inf = total_capacity(net) + 1

    def _add(self, u: int, v: int, c: int) -> None:
        self.adj[u].append(len(self.head))
        self.head.append(v)
        self.cap.append(c)
        self.adj[v].append(len(self.head))
        self.head.append(u)
        self.cap.append(0)

    def attach_super(self, sources: Sequence[int], sinks: Sequence[int]) -> None:
        for s in sources:
            self._add(self.super_s, s, self.inf)
        for t in sinks:
            self._add(t, self.super_t, self.inf)

    def add_sinks(self, sinks: Sequence[int]) -> None:
        for t in sinks:
            self._add(t, self.super_t, self.inf)

    def run(self) -> int:
        """Push blocking flows until the super-sink is unreachable."""
        head, cap, adj = self.head, self.cap, self.adj
        s, t = self.super_s, self.super_t
        total = 0
        while True:
            level = [-1] * self.n
            level[s] = 0
            q = deque([s])
            while q:
                u = q.popleft()
                for e in adj[u]:
                    v = head[e]
                    if cap[e] > 0 and level[v] < 0:
                        level[v] = level[u] + 1
                        q.append(v)
            if level[t] < 0:
                return total
            it = [0] * self.n
            # iterative DFS for one blocking flow
            while True:
                path = []
                u = s
                while u != t:
                    advanced = False
                    while it[u] < len(adj[u]):
                        e = adj[u][it[u]]
                        v = head[e]
                        if cap[e] > 0 and level[v] == level[u] + 1:
                            path.append(e)
                            u = v
                            advanced = True
                            break
                        it[u] += 1
                    if not advanced:
                        if not path:
                            u = None
                            break
                        level[u] = -1  # dead end, retreat
                        e = path.pop()
                        u = s if not path else head[path[-1]]
                        # restart scan at the retreated arc
                        continue
                if u is None:
                    break
                bottleneck = min(cap[e] for e in path)
                for e in path:
                    cap[e] -= bottleneck
                    cap[e ^ 1] += bottleneck
                total += bottleneck

    def flow_by_arc(self) -> Dict[ArcId, int]:
        out = {}
        for k, aid in enumerate(self.real_arc_ids):
            used = self.cap[2 * k + 1]  # reverse capacity equals pushed flow
            if used:
                out[aid] = used
        return out

    def residual_reachable(self, sources: Sequence[int]) -> set:
        seen = set(sources)
        q = deque(sources)
        head, cap, adj = self.head, self.cap, self.adj
        while q:
            u = q.popleft()
            for e in adj[u]:
                v = head[e]
                if cap[e] > 0 and v not in seen:
                    seen.add(v)
                    q.append(v)
        return seen


def _check_endpoint_sets(net: Network, sources, sinks):
    src = sorted(set(sources), key=sort_key)
    snk = sorted(set(sinks), key=sort_key)
    for v in src + snk:
        if v not in net.vertices:
            raise InputError(f"unknown vertex {v!r}", code="dangling-reference")
    if set(src) & set(snk):
        raise InputError("sources and sinks must be disjoint", code="invalid-input")
    return src, snk


def max_flow(net: Network, sources: Iterable[VertexId], sinks: Iterable[VertexId]) -> Tuple[Dict[ArcId, int], int]:
    """Integer maximum flow from a source set to a sink set.

    Returns the flow as a sparse arc-id map together with its value.  The
    flow has zero divergence outside sources and sinks, nonnegative
    divergence at each source and nonpositive at each sink.
    """
    src, snk = _check_endpoint_sets(net, sources, sinks)
    if not src or not snk:
        return {}, 0
    d = _Dinic(net)
    d.attach_super([d.vid[v] for v in src], [d.vid[v] for v in snk])
    value = d.run()
    return d.flow_by_arc(), value


def min_cut_source_side(net: Network, f: Dict[ArcId, int], sources: Iterable[VertexId],
                        sinks: Iterable[VertexId] = ()) -> Cut:
    """Source side of the inclusion-minimal minimum cut for a maximum flow f.

    The side is the set of vertices reachable from the sources in the
    residual graph of f.  If any of the optional sinks is reachable, f was
    not maximum and a ContractViolation is raised.
    """
    src = sorted(set(sources), key=sort_key)
    for v in src:
        if v not in net.vertices:
            raise InputError(f"unknown vertex {v!r}", code="dangling-reference")
    seen = set(src)
    q = deque(src)
    out_adj: Dict[VertexId, list] = {}
    in_adj: Dict[VertexId, list] = {}
    for a in net.graph.arcs:
        out_adj.setdefault(a.tail, []).append(a)
        in_adj.setdefault(a.head, []).append(a)
    while q:
        u = q.popleft()
        for a in out_adj.get(u, ()):  # forward residual
            if net.capacity[a.id] - f.get(a.id, 0) > 0 and a.head not in seen:
                seen.add(a.head)
                q.append(a.head)
        for a in in_adj.get(u, ()):  # backward residual
            if f.get(a.id, 0) > 0 and a.tail not in seen:
                seen.add(a.tail)
                q.append(a.tail)
    for t in sinks:
        if t in seen:
            raise ContractViolation("flow is not maximum: a sink is residual-reachable")
    return Cut(frozenset(seen))


def lex_max_flow(net: Network, source: VertexId, primary_sink: VertexId,
                 secondary_sinks: Iterable[VertexId]) -> Dict[ArcId, int]:
    """Maximum flow from source to all sinks that, among such maxima,
    maximizes the net inflow at the primary sink.

    Phase one saturates source -> primary alone; phase two keeps the same
    residual state and augments toward the full sink set.  Phase two never
    disturbs the primary inflow because the phase-one minimum cut stays
    saturated.
    """
    sec = sorted(set(secondary_sinks), key=sort_key)
    src, snk = _check_endpoint_sets(net, [source], [primary_sink] + sec)
    d = _Dinic(net)
    d.attach_super([d.vid[source]], [d.vid[primary_sink]])
    d.run()
    if sec:
        d.add_sinks([d.vid[v] for v in sec])
        d.run()
    return d.flow_by_arc()


def decompose(net: Network, f: Dict[ArcId, int], allowed_sources: Iterable[VertexId],
              allowed_sinks: Iterable[VertexId]) -> WeightedPathCollection:
    """Peel a nonnegative integer arc function into weighted simple paths.

    Walks start at vertices with positive remaining divergence, follow the
    lowest-index positive arc, and stop at the first allowed sink with
    unmet demand.  Cycles encountered on the way are cancelled and
    discarded, so the induced arc function of the result is bounded by f
    and differs from it by a nonnegative circulation.

    A vertex listed both as source and sink takes the role its divergence
    sign dictates.  Any other vertex must have zero divergence.
    """
    srcs = set(allowed_sources)
    snks = set(allowed_sinks)
    for v in srcs | snks:
        if v not in net.vertices:
            raise InputError(f"unknown vertex {v!r}", code="dangling-reference")

    arcs = net.graph.arcs
    remaining = {}
    div: Dict[VertexId, int] = {}
    for a in arcs:
        w = f.get(a.id, 0)
        if w < 0:
            raise InputError(f"negative flow on arc {a.id!r}", code="invalid-input")
        if w:
            remaining[a.id] = w
            div[a.tail] = div.get(a.tail, 0) + w
            div[a.head] = div.get(a.head, 0) - w

    surplus = {}
    demand = {}
    for v, d in div.items():
        if d > 0:
            if v not in srcs:
                raise ContractViolation(f"positive divergence at non-source {v!r}")
            surplus[v] = d
        elif d < 0:
            if v not in snks:
                raise ContractViolation(f"negative divergence at non-sink {v!r}")
            demand[v] = -d

    out_pos: Dict[VertexId, List] = {}
    for a in arcs:
        if remaining.get(a.id, 0) > 0:
            out_pos.setdefault(a.tail, []).append(a)
    for lst in out_pos.values():
        lst.sort(key=lambda a: sort_key(a.id))
    out_ptr: Dict[VertexId, int] = {}

    def next_arc(v):
        lst = out_pos.get(v)
        if not lst:
            return None
        i = out_ptr.get(v, 0)
        while i < len(lst) and remaining.get(lst[i].id, 0) <= 0:
            i += 1
        out_ptr[v] = i
        return lst[i] if i < len(lst) else None

    collected: Dict[Tuple[ArcId, ...], int] = {}
    order: List[Tuple[ArcId, ...]] = []

    for s in sorted(surplus, key=sort_key):
        while surplus.get(s, 0) > 0:
            path_arcs: List = []
            on_path = {s: 0}
            v = s
            while True:
                if v != s and v in snks and demand.get(v, 0) > 0:
                    break
                a = next_arc(v)
                if a is None:
                    raise ContractViolation(f"path peeling stuck at {v!r}")
                nxt = a.head
                if nxt in on_path:
                    # cancel the cycle immediately and keep walking
                    k = on_path[nxt]
                    cycle = path_arcs[k:] + [a]
                    theta = min(remaining[c.id] for c in cycle)
                    for c in cycle:
                        remaining[c.id] -= theta
                    for c in path_arcs[k:]:
                        del on_path[c.head]
                    del path_arcs[k:]
                    v = nxt
                    if v != s:
                        on_path[v] = len(path_arcs)
                    continue
                path_arcs.append(a)
                on_path[nxt] = len(path_arcs)
                v = nxt
            t = v
            theta = min(
                min(remaining[a.id] for a in path_arcs),
                surplus[s],
                demand[t],
            )
            for a in path_arcs:
                remaining[a.id] -= theta
            surplus[s] -= theta
            demand[t] -= theta
            key = tuple(a.id for a in path_arcs)
            if key not in collected:
                collected[key] = 0
                order.append(key)
            collected[key] += theta

    if any(surplus.values()) or any(demand.values()):
        raise ContractViolation("decomposition left unmet surplus or demand")
    return [PathFlow(k, collected[k]) for k in order]


def paths_to_arc_function(paths: WeightedPathCollection) -> Dict[ArcId, int]:
    out: Dict[ArcId, int] = {}
    for p in paths:
        for aid in p.arcs:
            out[aid] = out.get(aid, 0) + p.weight
    return out
