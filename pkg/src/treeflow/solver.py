"""Exact solver for maximum tree-distance-weighted integer multiflows.

The algorithm normalizes the realization, then recurses: while the tree
has an edge with two non-leaf endpoints it splits the instance at a
minimum cut between the two terminal groups, solves both contractions,
and glues the results.  Otherwise the tree is a single edge or a small
star, handled by direct flow constructions.  Every level returns, next
to the flow components, one saturated separating cut per tree arc; the
lifted family certifies optimality of the final answer.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Hashable, List, Optional, Sequence, Set, Tuple

from .certify import Certificate, mu_value
from .errors import InputError, ContractViolation
from .flows import decompose, max_flow, min_cut_source_side, lex_max_flow, PathFlow
from .graphs import ArcId, Cut, Digraph, Network, VertexId, contract, sort_key
from .multiflow import Multiflow, TerminalPath
from .realization import (
    NormalizeRecord,
    RealizationTree,
    choose_balanced_edge,
    classify_terminal,
    normalize,
    pi_set,
    validate_instance,
)

Components = Dict[Tuple[Hashable, Hashable], Dict[ArcId, int]]
CutMap = Dict[Tuple[Hashable, Hashable], frozenset]


@dataclass
class SolveStats:
    maxflow_calls: int = 0
    recursion_depth: int = 0
    wall_ms: float = 0.0


@dataclass
class SolveOutput:
    multiflow: Multiflow
    certificate: Certificate
    value: Fraction
    stats: SolveStats


# -- small helpers ---------------------------------------------------------


def _fresh_vertex(taken: Set, label: str) -> Hashable:
    k = 0
    while ("@", label, k) in taken:
        k += 1
    return ("@", label, k)


def _add_arcfunc(target: Dict[ArcId, int], src: Dict[ArcId, int], sign: int = 1) -> None:
    for aid, w in src.items():
        if w:
            target[aid] = target.get(aid, 0) + sign * w


def _merge_components(target: Components, pair, f: Dict[ArcId, int]) -> None:
    if not any(f.values()):
        return
    _add_arcfunc(target.setdefault(pair, {}), f)


def _paths_to_components(net: Network, paths: List[PathFlow]) -> Components:
    by_id = net.graph.arcs_by_id()
    comps: Components = {}
    for p in paths:
        s = by_id[p.arcs[0]].tail
        t = by_id[p.arcs[-1]].head
        f = comps.setdefault((s, t), {})
        for aid in p.arcs:
            f[aid] = f.get(aid, 0) + p.weight
    return comps


def _join_on_arc(left: List[TerminalPath], right: List[TerminalPath]) -> List[TerminalPath]:
    """Concatenate weighted paths: each left path ends with the arc the
    matching right path starts with; weights are split greedily."""
    queues: Dict[ArcId, deque] = {}
    for p in right:
        queues.setdefault(p.arcs[0], deque()).append([p, p.weight])
    out: List[TerminalPath] = []
    for lp in left:
        need = lp.weight
        q = queues.get(lp.arcs[-1])
        while need > 0:
            if not q:
                raise ContractViolation("boundary stitching ran out of partner paths")
            rp, avail = q[0]
            take = min(need, avail)
            out.append(TerminalPath(lp.source, rp.target, lp.arcs + rp.arcs[1:], take))
            need -= take
            q[0][1] -= take
            if q[0][1] == 0:
                q.popleft()
    for q in queues.values():
        if any(item[1] for item in q):
            raise ContractViolation("boundary stitching left unmatched partner paths")
    return out


def _boundary_arcs(net: Network, side: frozenset) -> Tuple[Set[ArcId], Set[ArcId]]:
    out_ids, in_ids = set(), set()
    for a in net.graph.arcs:
        if a.tail in side and a.head not in side:
            out_ids.add(a.id)
        elif a.head in side and a.tail not in side:
            in_ids.add(a.id)
    return out_ids, in_ids


# -- free multiflow (unit weights) -----------------------------------------


class _AugmentationStall(ContractViolation):
    """The walk search found no augmentation; the slow exact path takes over."""


class _FreeCore:
    """Maximum free multiflow on a network whose per-terminal trivial cuts
    are minimum in both directions, so every terminal-incident capacity
    unit must be carried by some path between distinct terminals.

    Flow is grown per source terminal and repaired by augmenting walks
    that may re-source existing units: traversing an arc backwards hands
    the cancelled unit's remainder to the walk and re-routes the donor.
    Rare configurations that need a simultaneous rotation of several
    units stall the search; callers fall back to capacity splitting.
    """

    def __init__(self, net: Network, terminals: Sequence[VertexId], stats: SolveStats):
        self.net = net
        self.terms = list(terminals)
        self.tset = set(terminals)
        self.stats = stats
        self.arcs = net.graph.arcs
        self.cap = net.capacity
        self.flow: Dict[Tuple[int, int], Dict[ArcId, int]] = {}
        self.used: Dict[ArcId, int] = {}
        self.out_arcs: Dict[VertexId, list] = {}
        self.in_arcs: Dict[VertexId, list] = {}
        for a in self.arcs:
            self.out_arcs.setdefault(a.tail, []).append(a)
            self.in_arcs.setdefault(a.head, []).append(a)
        self.sigma = [sum(self.cap[a.id] for a in self.out_arcs.get(t, ())) for t in self.terms]
        self.out_total = [0] * len(self.terms)

    def run(self) -> Dict[Tuple[int, int], Dict[ArcId, int]]:
        self._bulk()
        guard = sum(self.sigma) + 1
        while True:
            lacking = next((i for i in range(len(self.terms)) if self.out_total[i] < self.sigma[i]), None)
            if lacking is None:
                break
            guard -= 1
            if guard < 0:
                raise _AugmentationStall("free multiflow augmentation did not converge")
            if not self._augment(lacking):
                raise _AugmentationStall("free multiflow augmentation stalled")
        return self.flow

    def _augment(self, i: int) -> bool:
        """Raise the outflow of terminal i, re-planning after any splice
        whose donor moved under the walk's feet.

        Plans without repeated arcs or donors are applied at full bundle
        width in one pass; repetitive plans run unit by unit and may go
        stale, leaving a width-one dangle to continue from.
        """
        import copy
        snapshot = (copy.deepcopy(self.flow), dict(self.used), list(self.out_total))
        kappa, vertex = i, None
        prefix: Dict[ArcId, int] = {}
        for _segment in range(8 * (len(self.net.vertices) * len(self.terms) + 8)):
            walk = self._find_walk(kappa, vertex)
            if walk is None:
                self.flow, self.used, self.out_total = snapshot
                return False
            width = self._walk_width(walk) if not prefix else 1
            status, kappa, vertex, prefix = self._apply_walk(kappa, vertex, prefix, walk, width)
            if status == "done":
                return True
        self.flow, self.used, self.out_total = snapshot
        return False

    # bulk phase: one truncated max flow per terminal on leftover capacity
    def _bulk(self) -> None:
        for i, t in enumerate(self.terms):
            others = [u for u in self.terms if u != t]
            arcs = []
            caps = {}
            for a in self.arcs:
                if a.head == t or (a.tail in self.tset and a.tail != t):
                    continue  # no arrivals at the source, no departures from sinks
                left = self.cap[a.id] - self.used.get(a.id, 0)
                if left > 0:
                    arcs.append((a.id, a.tail, a.head))
                    caps[a.id] = left
            sub = Network(Digraph.build(self.net.vertices, arcs), tuple(self.terms), caps)
            self.stats.maxflow_calls += 1
            f, _v = max_flow(sub, [t], others)
            if not f:
                continue
            by_id = sub.graph.arcs_by_id()
            for p in decompose(sub, f, [t], others):
                j = self.terms.index(by_id[p.arcs[-1]].head)
                comp = self.flow.setdefault((i, j), {})
                for aid in p.arcs:
                    comp[aid] = comp.get(aid, 0) + p.weight
                    self.used[aid] = self.used.get(aid, 0) + p.weight
                self.out_total[i] += p.weight

    # augmenting walk search over states (vertex, carried commodity)
    def _find_walk(self, kappa: int, vertex):
        """Plan a walk completing one unit for commodity kappa.

        vertex None means the walk starts fresh at the commodity's
        terminal; otherwise a half-built unit dangles at that vertex.
        Moves: forward along spare capacity; reverse along a carried unit
        (re-sourcing it); displacing a full arrival arc into a terminal.
        The walk ends at the first spare-capacity arrival at a terminal
        other than the one currently carried.
        """
        parents = {}
        q = deque()
        if vertex is None:
            start = self.terms[kappa]
            for a in self.out_arcs.get(start, ()):
                if self.used.get(a.id, 0) < self.cap[a.id]:
                    st = (a.head, kappa)
                    if st not in parents:
                        parents[st] = (None, ("fwd", a.id, None))
                        if a.head in self.tset and a.head != start:
                            return self._rebuild(parents, st)
                        if a.head not in self.tset:
                            q.append(st)
        else:
            seed = (vertex, kappa)
            parents[seed] = (None, None)
            q.append(seed)
        while q:
            state = q.popleft()
            v, kap = state
            for a in self.out_arcs.get(v, ()):
                if self.used.get(a.id, 0) < self.cap[a.id]:  # forward
                    if a.head in self.tset:
                        if a.head != self.terms[kap]:
                            end = (a.head, kap)
                            if end not in parents:
                                parents[end] = (state, ("fwd", a.id, None))
                                return self._rebuild(parents, end)
                        continue
                    nxt = (a.head, kap)
                    if nxt not in parents:
                        parents[nxt] = (state, ("fwd", a.id, None))
                        q.append(nxt)
                elif a.head in self.tset and a.head != self.terms[kap]:
                    # displace a unit arriving on this full arc
                    j = self.terms.index(a.head)
                    for donor in self._donors_for(a.id):
                        nxt = (v, donor[0])
                        if nxt not in parents:
                            parents[nxt] = (state, ("disp", a.id, donor))
                            q.append(nxt)
            if v in self.tset:
                continue  # departures of other terminals stay untouched
            for a in self.in_arcs.get(v, ()):  # reverse, re-sourcing a unit
                if self.used.get(a.id, 0) <= 0:
                    continue
                for donor in self._donors_for(a.id):
                    k, l = donor
                    if l == kap:
                        continue  # splicing would close a path onto its source
                    if a.tail == self.terms[k]:
                        resumed = (a.tail, k)
                        if resumed not in parents:
                            parents[resumed] = (state, ("rev", a.id, donor))
                            q.append(resumed)
                            # the same arc may be re-added at once (net zero)
                            readd = (a.head, k)
                            if readd not in parents:
                                parents[readd] = (resumed, ("fwd", a.id, None))
                                q.append(readd)
                    else:
                        nxt = (a.tail, k)
                        if nxt not in parents:
                            parents[nxt] = (state, ("rev", a.id, donor))
                            q.append(nxt)
        return None

    def _rebuild(self, parents, end):
        moves = []
        st = end
        while st is not None:
            prev, mv = parents[st]
            if mv is not None:
                moves.append(mv)
            st = prev
        moves.reverse()
        return moves

    def _donors_for(self, aid: ArcId):
        out = [kl for kl, comp in self.flow.items() if comp.get(aid, 0) > 0]
        out.sort()
        return out

    def _walk_width(self, moves) -> int:
        """Largest unit count the whole plan supports in one pass.

        Bundling is only sound when no arc and no donor appears twice,
        since earlier splices may shuffle exactly the flow a later move
        counts on; repetitive plans run at width one.  The one benign
        repetition is a reversal immediately re-added on the same arc,
        which is net zero and bounded by the donor flow alone.
        """
        arcs_seen = set()
        donors_seen = set()
        width = None
        idx = 0
        while idx < len(moves):
            kind, aid, donor_key = moves[idx]
            composite = (kind == "rev" and idx + 1 < len(moves)
                         and moves[idx + 1] == ("fwd", aid, None))
            if aid in arcs_seen or (donor_key is not None and donor_key in donors_seen):
                return 1
            arcs_seen.add(aid)
            if kind == "fwd":
                room = self.cap[aid] - self.used.get(aid, 0)
            else:
                donors_seen.add(donor_key)
                room = self.flow.get(donor_key, {}).get(aid, 0)
            width = room if width is None else min(width, room)
            idx += 2 if composite else 1
        return max(1, width if width is not None else 1)

    def _apply_walk(self, kappa: int, position, prefix: Dict[ArcId, int], moves, width: int):
        """Execute planned moves until done or until the plan goes stale.

        Returns ("done", ...) after a completing arrival, or
        ("dangling", kappa, vertex, prefix) when a move's precondition no
        longer holds and the caller should re-plan from the dangle.
        Bundled plans are pre-validated by _walk_width and cannot go
        stale; a stale move there means a broken invariant.
        """
        by_id = {a.id: a for a in self.arcs}
        for kind, aid, donor_key in moves:
            a = by_id[aid]
            if kind == "fwd":
                if self.used.get(aid, 0) + width > self.cap[aid]:
                    if width > 1:
                        raise ContractViolation("bundled walk went stale")
                    return "dangling", kappa, position, prefix
                prefix[aid] = prefix.get(aid, 0) + width
                self.used[aid] = self.used.get(aid, 0) + width
                position = a.head
                if a.head in self.tset:  # completing arrival
                    j = self.terms.index(a.head)
                    if j == kappa:
                        raise ContractViolation("augmenting walk arrived at its own source")
                    _add_arcfunc(self.flow.setdefault((kappa, j), {}), prefix)
                    self.out_total[kappa] += width
                    return "done", kappa, None, {}
            elif kind == "rev":
                k, l = donor_key
                donor = self.flow.get((k, l), {})
                if l == kappa or donor.get(aid, 0) < width:
                    if width > 1:
                        raise ContractViolation("bundled walk went stale")
                    return "dangling", kappa, position, prefix
                donor[aid] -= width
                self.used[aid] -= width
                # the carried half joins the donor's abandoned tail
                tail_piece = _extract(donor, a.head, self.terms[l], width, self.out_arcs)
                target = self.flow.setdefault((kappa, l), {})
                _add_arcfunc(target, prefix)
                _add_arcfunc(target, tail_piece)
                self.out_total[kappa] += width
                # pick up the donor's head half and keep walking for it
                prefix = _extract(donor, self.terms[k], a.tail, width, self.out_arcs)
                self.out_total[k] -= width
                kappa = k
                position = a.tail
            else:  # displace a full arrival arc
                k, j = donor_key
                donor = self.flow.get((k, j), {})
                if j == kappa or donor.get(aid, 0) < width:
                    if width > 1:
                        raise ContractViolation("bundled walk went stale")
                    return "dangling", kappa, position, prefix
                donor[aid] -= width
                prefix[aid] = prefix.get(aid, 0) + width
                _add_arcfunc(self.flow.setdefault((kappa, j), {}), prefix)
                self.out_total[kappa] += width
                prefix = _extract(donor, self.terms[k], a.tail, width, self.out_arcs)
                self.out_total[k] -= width
                kappa = k
                position = a.tail
        if prefix:
            raise ContractViolation("augmenting walk ended with a dangling unit")
        return "done", kappa, None, {}


def _core_by_splitting(net: Network, terms: Sequence[VertexId], stats: SolveStats):
    """Exact but slow core solver: split capacity through inner vertices.

    Repeatedly replaces an in/out capacity pair at an inner vertex by a
    direct bypass arc, committing the largest amount that keeps every
    per-terminal minimum cut at its target in both directions.  Once no
    inner vertex carries capacity, every arc runs between two terminals
    and expands back into a walk of original arcs.
    """
    tset = set(terms)
    tails: Dict[ArcId, VertexId] = {}
    heads: Dict[ArcId, VertexId] = {}
    cap: Dict[ArcId, int] = {}
    prov: Dict[ArcId, Tuple[ArcId, ArcId]] = {}
    for a in net.graph.arcs:
        tails[a.id], heads[a.id], cap[a.id] = a.tail, a.head, net.capacity[a.id]
    out_target = {t: sum(cap[i] for i in cap if tails[i] == t) for t in terms}
    in_target = {t: sum(cap[i] for i in cap if heads[i] == t) for t in terms}
    counter = [0]

    def snapshot_net(extra=None):
        arcs = [(i, tails[i], heads[i]) for i in sorted(cap, key=sort_key) if cap[i] > 0]
        caps = {i: cap[i] for i in cap if cap[i] > 0}
        if extra is not None:
            aid, u, w, g = extra
            if u != w and g > 0:
                arcs.append((aid, u, w))
                caps[aid] = g
        return Network(Digraph.build(net.vertices, arcs), tuple(terms), caps)

    def feasible(a_id, b_id, gamma) -> bool:
        if gamma == 0:
            return True
        u, w = tails[a_id], heads[b_id]
        cap[a_id] -= gamma
        cap[b_id] -= gamma
        trial = snapshot_net(("?split", u, w, gamma))
        cap[a_id] += gamma
        cap[b_id] += gamma
        for t in terms:
            others = [x for x in terms if x != t]
            stats.maxflow_calls += 2
            if max_flow(trial, [t], others)[1] != out_target[t]:
                return False
            if max_flow(trial, others, [t])[1] != in_target[t]:
                return False
        return True

    progress = True
    while progress:
        progress = False
        for v in sorted(net.vertices, key=sort_key):
            if v in tset:
                continue
            while True:
                ins = [i for i in sorted(cap, key=sort_key) if heads[i] == v and cap[i] > 0]
                outs = [i for i in sorted(cap, key=sort_key) if tails[i] == v and cap[i] > 0]
                if not ins and not outs:
                    break
                if not ins or not outs:
                    raise ContractViolation("unbalanced inner vertex during splitting")
                committed = False
                for a_id in ins:
                    for b_id in outs:
                        hi = min(cap[a_id], cap[b_id])
                        if feasible(a_id, b_id, hi):
                            best = hi
                        else:
                            lo, best = 0, 0
                            while lo + 1 < hi:
                                mid = (lo + hi) // 2
                                if feasible(a_id, b_id, mid):
                                    lo, best = mid, mid
                                else:
                                    hi = mid
                        if best > 0:
                            u, w = tails[a_id], heads[b_id]
                            cap[a_id] -= best
                            cap[b_id] -= best
                            if u != w:
                                counter[0] += 1
                                nid = ("~", counter[0])
                                tails[nid], heads[nid], cap[nid] = u, w, best
                                prov[nid] = (a_id, b_id)
                            committed = True
                            progress = True
                            break
                    if committed:
                        break
                if not committed:
                    raise ContractViolation("no admissible capacity split at an inner vertex")

    index = {t: i for i, t in enumerate(terms)}
    flow: Dict[Tuple[int, int], Dict[ArcId, int]] = {}
    memo: Dict[ArcId, Dict[ArcId, int]] = {}
    for aid in sorted(cap, key=sort_key):
        if cap[aid] <= 0:
            continue
        u, w = tails[aid], heads[aid]
        if u not in tset or w not in tset or u == w:
            raise ContractViolation("splitting left capacity off the terminals")
        comp = flow.setdefault((index[u], index[w]), {})
        for orig, mult in _expand_arc(aid, prov, memo).items():
            comp[orig] = comp.get(orig, 0) + mult * cap[aid]
    return flow


def _expand_arc(aid, prov, memo) -> Dict[ArcId, int]:
    """Arc multiset of original arcs behind a (possibly split) arc id."""
    stack = [aid]
    while stack:
        cur = stack[-1]
        if cur in memo:
            stack.pop()
            continue
        if cur not in prov:
            memo[cur] = {cur: 1}
            stack.pop()
            continue
        left, right = prov[cur]
        missing = [x for x in (left, right) if x not in memo]
        if missing:
            stack.extend(missing)
        else:
            merged = dict(memo[left])
            for k, x in memo[right].items():
                merged[k] = merged.get(k, 0) + x
            memo[cur] = merged
            stack.pop()
    return memo[aid]


def _extract(f: Dict[ArcId, int], src: VertexId, dst: VertexId, amount: int,
             out_arcs: Dict[VertexId, list]) -> Dict[ArcId, int]:
    """Remove `amount` units of src->dst path mass from f and return it."""
    taken: Dict[ArcId, int] = {}
    if src == dst or amount <= 0:
        return taken
    left = amount
    while left > 0:
        prev = {src: None}
        q = deque([src])
        found = src == dst
        while q and not found:
            u = q.popleft()
            for a in out_arcs.get(u, ()):
                if f.get(a.id, 0) > 0 and a.head not in prev:
                    prev[a.head] = a
                    if a.head == dst:
                        found = True
                        break
                    q.append(a.head)
        if dst not in prev:
            raise ContractViolation("component surgery found no connecting path")
        path = []
        v = dst
        while prev[v] is not None:
            path.append(prev[v])
            v = prev[v].tail
        theta = min(min(f[a.id] for a in path), left)
        for a in path:
            f[a.id] -= theta
            taken[a.id] = taken.get(a.id, 0) + theta
        left -= theta
    return taken


def _minimal_terminal_cuts(net: Network, stats: SolveStats) -> Dict[VertexId, frozenset]:
    """Inclusion-minimal minimum (t, S-t)-cuts; disjoint for inner-Eulerian nets."""
    cuts = {}
    terms = sorted(net.terminals, key=sort_key)
    for t in terms:
        others = [u for u in terms if u != t]
        stats.maxflow_calls += 1
        f, _v = max_flow(net, [t], others)
        cuts[t] = min_cut_source_side(net, f, [t], sinks=others).source_side
    for a in terms:
        for b in terms:
            if sort_key(a) < sort_key(b) and cuts[a] & cuts[b]:
                raise ContractViolation("minimal terminal cuts overlap")
    return cuts


def free_imf(net: Network, stats: Optional[SolveStats] = None):
    """Integer maximum free multiflow with saturated per-terminal min cuts.

    Returns (multiflow, cuts) where cuts maps each terminal to the source
    side of its inclusion-minimal minimum cut; the multiflow saturates
    every such cut in both directions and its total value equals the sum
    of the cut capacities.
    """
    if stats is None:
        stats = SolveStats()
    if len(net.terminals) < 2:
        raise InputError("free multiflow needs at least two terminals", code="invalid-input")
    for v in net.inner_vertices():
        out_c = sum(net.capacity[a.id] for a in net.graph.arcs if a.tail == v)
        in_c = sum(net.capacity[a.id] for a in net.graph.arcs if a.head == v)
        if out_c != in_c:
            raise InputError(f"inner vertex {v!r} is not Eulerian", code="not-eulerian")
    paths, cuts = _free_imf_paths(net, stats)
    return Multiflow.from_paths(paths), {t: Cut(side) for t, side in cuts.items()}


def _free_imf_paths(net: Network, stats: SolveStats):
    """Path-form free multiflow plus minimal cut sides, via cut contraction."""
    terms = sorted(net.terminals, key=sort_key)
    cuts = _minimal_terminal_cuts(net, stats)

    # contract every cut side; the remaining network needs all terminal
    # capacity saturated, which the augmentation core guarantees
    taken = set(net.vertices)
    core_net = net
    core_term: Dict[VertexId, VertexId] = {}
    for t in terms:
        w = _fresh_vertex(taken, "w")
        taken.add(w)
        core_net = contract(core_net, cuts[t], w)
        core_term[t] = w
    core_net = Network(core_net.graph, tuple(core_term[t] for t in terms), core_net.capacity)

    core = _FreeCore(core_net, [core_term[t] for t in terms], stats)
    try:
        core_flow = core.run()
    except _AugmentationStall:
        core_flow = _core_by_splitting(core_net, core.terms, stats)
    core_paths: List[TerminalPath] = []
    for (i, j) in sorted(core_flow):
        comp = core_flow[(i, j)]
        if not any(comp.values()):
            continue
        for p in decompose(core_net, comp, [core.terms[i]], [core.terms[j]]):
            core_paths.append(TerminalPath(terms[i], terms[j], p.arcs, p.weight))

    # expand every contracted side with a two-terminal solve
    lead_in: List[TerminalPath] = []   # terminal -> cut boundary
    lead_out: List[TerminalPath] = []  # cut boundary -> terminal
    for t in terms:
        side = cuts[t]
        z = _fresh_vertex(set(net.vertices), "z")
        region = contract(net, net.vertices - side, z)
        stats.maxflow_calls += 1
        f, fval = max_flow(region, [t], [z])
        out_ids, in_ids = _boundary_arcs(net, side)
        if fval != sum(net.capacity[i] for i in out_ids):
            raise ContractViolation("terminal cut region does not saturate its boundary")
        for p in decompose(region, f, [t], [z]):
            lead_in.append(TerminalPath(t, z, p.arcs, p.weight))
        g = {a.id: net.capacity[a.id] - f.get(a.id, 0) for a in region.graph.arcs}
        for p in decompose(region, g, [z], [t]):
            lead_out.append(TerminalPath(z, t, p.arcs, p.weight))

    stage = _join_on_arc(lead_in, core_paths)
    full = _join_on_arc(stage, lead_out)
    full = [TerminalPath(p.source, p.target, p.arcs, p.weight) for p in full]
    for p in full:
        if p.source == p.target:
            raise ContractViolation("free multiflow produced a closed path")
    expect = sum(sum(net.capacity[i] for i in _boundary_arcs(net, cuts[t])[0]) for t in terms)
    if sum(p.weight for p in full) != expect:
        raise ContractViolation("free multiflow value does not meet the cut bound")
    return full, cuts


# -- base cases -------------------------------------------------------------


def base_two_vertices(net: Network, real: RealizationTree, stats: SolveStats):
    """Single tree edge: one max flow forward, its capacity complement back.

    Terminals realized by the whole edge have distance zero to everything
    and act as balanced through-vertices; they never carry components.
    """
    v1, v2 = sorted(real.vertices, key=sort_key)
    src = [t for t in net.terminals if real.subtrees[t] == {v1}]
    dst = [t for t in net.terminals if real.subtrees[t] == {v2}]
    if not src or not dst:
        raise ContractViolation("two-vertex base without terminals at both ends")
    stats.maxflow_calls += 1
    f, _val = max_flow(net, src, dst)
    x = min_cut_source_side(net, f, src, sinks=dst).source_side
    comps: Components = {}
    for p in decompose(net, f, src, dst):
        _merge_pathflow(comps, net, p)
    g = {a.id: net.capacity[a.id] - f.get(a.id, 0) for a in net.graph.arcs}
    ends = sorted(set(src) | set(dst), key=sort_key)
    for p in decompose(net, g, ends, ends):
        _merge_pathflow(comps, net, p)
    cuts: CutMap = {(v1, v2): x, (v2, v1): net.vertices - x}
    return comps, cuts


def _merge_pathflow(comps: Components, net: Network, p: PathFlow) -> None:
    by_id = net.graph.arcs_by_id()
    s = by_id[p.arcs[0]].tail
    t = by_id[p.arcs[-1]].head
    f = comps.setdefault((s, t), {})
    for aid in p.arcs:
        f[aid] = f.get(aid, 0) + p.weight


def repair_three_leaves(net: Network, s_i: VertexId, side: frozenset,
                        q_terms: Sequence[VertexId], stats: SolveStats):
    """Re-route the flow inside one leaf cut so misplaced terminals leave it.

    Contracts everything outside the cut into a sink z, takes the
    two-phase flow that maximizes the z inflow first, and complements it.
    Returns the shrunken cut plus the replacement path collections.
    """
    z = _fresh_vertex(set(net.vertices), "rz")
    region = contract(Network(net.graph, tuple([s_i] + list(q_terms)), net.capacity),
                      net.vertices - side, z)
    # forbid through-traffic at z: its out-arcs belong to the reverse flow
    keep = [(a.id, a.tail, a.head) for a in region.graph.arcs if a.tail != z]
    doctored = Network(
        Digraph.build(region.vertices, keep),
        region.terminals,
        {aid: region.capacity[aid] for aid, _t, _h in keep},
    )
    stats.maxflow_calls += 2
    g = lex_max_flow(doctored, s_i, z, list(q_terms))
    new_side = min_cut_source_side(doctored, g, [s_i], sinks=[z] + list(q_terms)).source_side
    for a in region.graph.arcs:
        if a.head == z and g.get(a.id, 0) != region.capacity[a.id]:
            raise ContractViolation("leaf repair does not saturate the inward boundary")
    forward = decompose(doctored, g, [s_i], [z] + list(q_terms))
    h = {a.id: region.capacity[a.id] - g.get(a.id, 0) for a in region.graph.arcs}
    backward = decompose(region, h, [z] + list(q_terms), [s_i])
    return new_side, z, region, forward, backward


def base_three_leaves(net: Network, real: RealizationTree, stats: SolveStats):
    """Star tree (two or three leaves): free multiflow plus leaf repairs."""
    adj = real.adjacency()
    leaves = [v for v in sorted(real.vertices, key=sort_key) if len(adj[v]) == 1]
    centers = [v for v in sorted(real.vertices, key=sort_key) if len(adj[v]) > 1]
    if len(centers) != 1 or len(leaves) + 1 != len(real.vertices):
        raise ContractViolation("star base called on a non-star tree")
    center = centers[0]
    nleaf = len(leaves)

    simples: Dict[int, List] = {i: [] for i in range(nleaf)}
    complexes: List = []
    for t in net.terminals:
        sub = real.subtrees[t]
        hit = [i for i, v in enumerate(leaves) if v in sub]
        if len(sub) == 1:
            if sub == {center}:
                raise ContractViolation("simple terminal at the star center")
            simples[hit[0]].append(t)
        elif len(hit) < nleaf:
            complexes.append(t)
        # subtrees touching every leaf have distance zero to everything

    # merge similar simple terminals into one representative per leaf
    merged = net
    groups: Dict[VertexId, List[VertexId]] = {}
    reps: List[VertexId] = []
    for i in range(nleaf):
        if not simples[i]:
            raise ContractViolation("star leaf without a simple terminal")
        bunch = sorted(simples[i], key=sort_key)
        if len(bunch) == 1:
            reps.append(bunch[0])
            continue
        m = _fresh_vertex(set(merged.vertices), "m")
        merged = contract(merged, bunch, m)
        groups[m] = bunch
        reps.append(m)

    free_net = Network(merged.graph, tuple(reps), merged.capacity)
    paths, cuts = _free_imf_paths(free_net, stats)

    new_sides: Dict[int, frozenset] = {}
    repairs: Dict[int, tuple] = {}
    for i in range(nleaf):
        side = cuts[reps[i]]
        q = [t for t in complexes if t in side and leaves[i] not in real.subtrees[t]]
        if not q:
            new_sides[i] = side
            continue
        new_side, z, region, fwd, back = repair_three_leaves(merged, reps[i], side,
                                                             sorted(q, key=sort_key), stats)
        new_sides[i] = new_side
        repairs[i] = (z, region, fwd, back)

    # swap the repaired interiors into the path packing
    for i, (z, region, fwd, back) in sorted(repairs.items()):
        side = cuts[reps[i]]
        out_ids, in_ids = _boundary_arcs(merged, side)
        by_id = region.graph.arcs_by_id()
        keep: List[TerminalPath] = []
        outgoing: List[TerminalPath] = []   # tails of old paths leaving the side
        incoming: List[TerminalPath] = []   # heads of old paths entering the side
        for p in paths:
            if p.source == reps[i]:
                k = next(n for n, aid in enumerate(p.arcs) if aid in out_ids)
                outgoing.append(TerminalPath(p.source, p.target, p.arcs[k:], p.weight))
            elif p.target == reps[i]:
                k = max(n for n, aid in enumerate(p.arcs) if aid in in_ids)
                incoming.append(TerminalPath(p.source, p.target, p.arcs[: k + 1], p.weight))
            else:
                keep.append(p)
        fwd_z = [TerminalPath(reps[i], z, p.arcs, p.weight)
                 for p in fwd if by_id[p.arcs[-1]].head == z]
        fwd_q = [p for p in fwd if by_id[p.arcs[-1]].head != z]
        back_z = [TerminalPath(z, reps[i], p.arcs, p.weight)
                  for p in back if by_id[p.arcs[0]].tail == z]
        back_q = [p for p in back if by_id[p.arcs[0]].tail != z]
        keep.extend(_join_on_arc(fwd_z, outgoing))
        keep.extend(_join_on_arc(incoming, back_z))
        for p in fwd_q:
            keep.append(TerminalPath(reps[i], by_id[p.arcs[-1]].head, p.arcs, p.weight))
        for p in back_q:
            keep.append(TerminalPath(by_id[p.arcs[0]].tail, reps[i], p.arcs, p.weight))
        paths = keep

    # undo the merge: endpoints are read off the original arc endpoints
    arcs_orig = net.graph.arcs_by_id()
    final_paths: List[TerminalPath] = []
    for p in paths:
        s, t = p.source, p.target
        if s in groups:
            s = arcs_orig[p.arcs[0]].tail
        if t in groups:
            t = arcs_orig[p.arcs[-1]].head
        final_paths.append(TerminalPath(s, t, p.arcs, p.weight))

    def widen(side: frozenset) -> frozenset:
        out = set()
        for v in side:
            out.update(groups.get(v, [v]))
        return frozenset(out)

    comps = _paths_to_components(net, [PathFlow(p.arcs, p.weight) for p in final_paths])
    cuts_out: CutMap = {}
    for i in range(nleaf):
        side = widen(new_sides[i])
        cuts_out[(leaves[i], center)] = side
        cuts_out[(center, leaves[i])] = net.vertices - side
    return comps, cuts_out


# -- partition step ----------------------------------------------------------


def aggregate(net: Network, comps1: Components, comps2: Components,
              x1: frozenset, x2: frozenset, z2: VertexId, z1: VertexId) -> Components:
    """Glue two child solutions across a saturated partition cut.

    Components internal to one side carry over; the source->z and
    z->target components of the two children are summed along the shared
    boundary (counted once, at full capacity) and re-decomposed into
    proper source-target components.
    """
    out_ids, in_ids = _boundary_arcs(net, x1)
    comps: Components = {}
    fwd_sources, fwd_sinks = set(), set()
    bwd_sources, bwd_sinks = set(), set()
    h_fwd: Dict[ArcId, int] = {aid: net.capacity[aid] for aid in out_ids}
    h_bwd: Dict[ArcId, int] = {aid: net.capacity[aid] for aid in in_ids}

    boundary = out_ids | in_ids
    check_fwd: Dict[ArcId, int] = {}
    check_bwd: Dict[ArcId, int] = {}
    for (s, t), f in comps1.items():
        if t == z2:
            fwd_sources.add(s)
            for aid, w in f.items():
                if aid in out_ids:
                    check_fwd[aid] = check_fwd.get(aid, 0) + w
                else:
                    h_fwd[aid] = h_fwd.get(aid, 0) + w
        elif s == z2:
            bwd_sinks.add(t)
            for aid, w in f.items():
                if aid in in_ids:
                    check_bwd[aid] = check_bwd.get(aid, 0) + w
                else:
                    h_bwd[aid] = h_bwd.get(aid, 0) + w
        else:
            if any(f.get(aid, 0) for aid in boundary):
                raise ContractViolation("side-internal component touches the partition boundary")
            _merge_components(comps, (s, t), f)
    for (s, t), f in comps2.items():
        if s == z1:
            fwd_sinks.add(t)
            for aid, w in f.items():
                if aid not in out_ids:
                    h_fwd[aid] = h_fwd.get(aid, 0) + w
        elif t == z1:
            bwd_sources.add(s)
            for aid, w in f.items():
                if aid not in in_ids:
                    h_bwd[aid] = h_bwd.get(aid, 0) + w
        else:
            if any(f.get(aid, 0) for aid in boundary):
                raise ContractViolation("side-internal component touches the partition boundary")
            _merge_components(comps, (s, t), f)

    for aid in out_ids:
        if check_fwd.get(aid, 0) != net.capacity[aid]:
            raise ContractViolation("partition boundary not saturated forward")
    for aid in in_ids:
        if check_bwd.get(aid, 0) != net.capacity[aid]:
            raise ContractViolation("partition boundary not saturated backward")

    for p in decompose(net, h_fwd, sorted(fwd_sources, key=sort_key), sorted(fwd_sinks, key=sort_key)):
        _merge_pathflow(comps, net, p)
    for p in decompose(net, h_bwd, sorted(bwd_sources, key=sort_key), sorted(bwd_sinks, key=sort_key)):
        _merge_pathflow(comps, net, p)
    return comps


def partition_step(net: Network, real: RealizationTree, edge, stats: SolveStats, depth: int):
    """Split at a balanced tree edge along a minimum terminal-group cut."""
    v1, v2 = edge
    side1 = real.component_without_edge(v1, v2)
    side2 = real.vertices - side1
    s1_group = [t for t in net.terminals if real.subtrees[t] <= side1]
    s2_group = [t for t in net.terminals if real.subtrees[t] <= side2]
    if not s1_group or not s2_group:
        raise ContractViolation("partition with an empty terminal group")

    stats.maxflow_calls += 1
    f, _val = max_flow(net, s1_group, s2_group)
    x1 = min_cut_source_side(net, f, s1_group, sinks=s2_group).source_side
    x2 = net.vertices - x1

    taken = set(net.vertices)
    z2 = _fresh_vertex(taken, "cut")
    z1 = _fresh_vertex(taken | {z2}, "cut")

    net1 = contract(net, x2, z2)
    net2 = contract(net, x1, z1)
    real1 = _contract_real(real, side1, v2, [t for t in net.terminals if t in x1], z2)
    real2 = _contract_real(real, side2, v1, [t for t in net.terminals if t in x2], z1)
    # terminals keep their complex standing even if the restricted subtree
    # narrows to a zero-length path
    ov1 = {t for t in net1.terminals[:-1] if classify_terminal(real, t) == "complex"}
    ov2 = {t for t in net2.terminals[:-1] if classify_terminal(real, t) == "complex"}
    real1.complexity_override = frozenset(real1.complexity_override | ov1)
    real2.complexity_override = frozenset(real2.complexity_override | ov2)

    comps1, cuts1 = _solve_rec(net1, real1, stats, depth + 1)
    comps2, cuts2 = _solve_rec(net2, real2, stats, depth + 1)

    comps = aggregate(net, comps1, comps2, x1, x2, z2, z1)

    cuts: CutMap = {(v1, v2): x1, (v2, v1): x2}
    for arc, side in cuts1.items():
        if arc in ((v1, v2), (v2, v1)):
            continue
        cuts[arc] = frozenset((side - {z2}) | (x2 if z2 in side else frozenset()))
    for arc, side in cuts2.items():
        if arc in ((v1, v2), (v2, v1)):
            continue
        cuts[arc] = frozenset((side - {z1}) | (x1 if z1 in side else frozenset()))
    return comps, cuts


def _contract_real(real: RealizationTree, keep_side: frozenset, anchor,
                   kept_terminals, z) -> RealizationTree:
    verts = set(keep_side) | {anchor}
    lengths = {}
    for (u, v), ell in real.arc_length.items():
        if u in verts and v in verts:
            lengths[(u, v)] = ell
    subs = {}
    for t in kept_terminals:
        sub = real.subtrees[t]
        rest = set(sub & keep_side)
        if sub - keep_side:
            rest.add(anchor)
        subs[t] = frozenset(rest)
    subs[z] = frozenset({anchor})
    return RealizationTree(frozenset(verts), lengths, subs, frozenset())


# -- recursion and public entry ---------------------------------------------


def _solve_rec(net: Network, real: RealizationTree, stats: SolveStats, depth: int):
    stats.recursion_depth = max(stats.recursion_depth, depth)
    if len(real.vertices) == 1:
        return {}, {}
    edge = choose_balanced_edge(real)
    if edge is not None:
        return partition_step(net, real, edge, stats, depth)
    if len(real.vertices) == 2:
        return base_two_vertices(net, real, stats)
    return base_three_leaves(net, real, stats)


def solve(net: Network, real: RealizationTree) -> SolveOutput:
    """Solve the weighted multiflow problem with an optimality certificate.

    The returned multiflow is integer and feasible; its value equals the
    distance-weighted optimum, witnessed by one saturated separating cut
    per tree arc with a nonempty pair set.
    """
    t0 = time.perf_counter()
    issue = validate_instance(net, real)
    if issue is not None:
        raise InputError(f"instance invalid at {issue.vertex!r}: {issue.reason}", code="not-eulerian")
    stats = SolveStats()

    norm_net, norm_real, record = normalize(net, real)
    comps, cuts = _solve_rec(norm_net, norm_real, stats, 0)
    comps, cert = _undo_normalization(net, real, norm_real, record, comps, cuts)

    flow = Multiflow(comps)
    value = mu_value(real, flow, net)
    stats.wall_ms = (time.perf_counter() - t0) * 1000.0
    return SolveOutput(flow, Certificate(cert), value, stats)


def _undo_normalization(net0: Network, real0: RealizationTree, norm_real: RealizationTree,
                        record: NormalizeRecord, comps: Components, cuts: CutMap):
    """Map components and cuts of the normalized instance back to the input."""
    src_of = {rec.source_half: rec.terminal for rec in record.splits}
    dst_of = {rec.target_half: rec.terminal for rec in record.splits}
    synth = set()
    for rec in record.splits:
        synth.add(rec.in_arc)
        synth.add(rec.out_arc)

    out_comps: Components = {}
    for (s, t), f in comps.items():
        s2 = src_of.get(s, s)
        t2 = dst_of.get(t, t)
        clean = {aid: w for aid, w in f.items() if aid not in synth and w}
        if s2 == t2:
            if clean:
                raise ContractViolation("split round trip left a same-endpoint component")
            continue
        if clean:
            _merge_components(out_comps, (s2, t2), clean)

    # side membership of the split halves, read in the normalized tree
    half_spot = {}
    for rec in record.splits:
        (t1,) = norm_real.subtrees[rec.target_half]
        (t2,) = norm_real.subtrees[rec.source_half]
        half_spot[rec.terminal] = (t1, t2)

    cert: Dict = {}
    for arc in real0.quasi_arcs():
        pi = pi_set(real0, net0.terminals, arc)
        if pi.empty:
            continue
        mapped = record.arc_map.get(arc)
        if mapped is None:
            raise ContractViolation(f"no surviving tree arc for {arc!r}")
        side = cuts.get(mapped)
        if side is None:
            raise ContractViolation(f"missing certificate cut for {mapped!r}")
        side = set(side)
        tail_side = norm_real.component_without_edge(*mapped)
        for rec in reversed(record.splits):
            t1, t2 = half_spot[rec.terminal]
            side.discard(rec.target_half)
            side.discard(rec.source_half)
            if t1 in tail_side and t2 in tail_side:
                side.add(rec.terminal)
            elif t1 not in tail_side and t2 not in tail_side:
                side.discard(rec.terminal)
        cert[arc] = frozenset(side)
    return out_comps, cert
