"""Exponent-weighted directed multigraphs: maxflow, mincut, flow
decomposition into simple paths, back-edge-free mincut search, and the
parallel-edge splitting transformation used to make paths edge-disjoint.
"""
from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from .channel import Dmc
from .errors import BTooSmall, GraphTooLarge, ParameterOutOfRange
from .exponents import exponent_two, tilde_exponent, zero_rate_exponent

FLOW_TOL = 1e-12


@dataclass(frozen=True)
class GraphEdge:
    tail: int
    head: int
    channel: Dmc
    id: int


@dataclass(frozen=True)
class ChannelGraph:
    """Directed multigraph of channels with one source and one destination."""

    node_count: int
    source: int
    destination: int
    edges: tuple
    node_names: tuple | None = None

    def __post_init__(self):
        if self.source == self.destination:
            raise ParameterOutOfRange("source and destination must differ")
        for e in self.edges:
            if not (0 <= e.tail < self.node_count and 0 <= e.head < self.node_count):
                raise ParameterOutOfRange(f"edge {e.id} has endpoints outside the node range")
        if not _reachable(self.node_count, [(e.tail, e.head) for e in self.edges], self.source, self.destination):
            raise ParameterOutOfRange("no directed path from source to destination")


def make_channel_graph(node_count, source, destination, edges, node_names=None) -> ChannelGraph:
    """Build a ChannelGraph from (tail, head, channel) triples; ids are positional."""
    built = tuple(GraphEdge(t, h, ch, i) for i, (t, h, ch) in enumerate(edges))
    return ChannelGraph(node_count, source, destination, built,
                        node_names=tuple(node_names) if node_names else None)


@dataclass(frozen=True)
class NetEdge:
    tail: int
    head: int
    capacity: float
    id: int


@dataclass(frozen=True)
class Network:
    """Capacitated digraph; capacities are nonnegative reals or +inf."""

    node_count: int
    source: int
    destination: int
    edges: tuple

    def finite_cap_sum(self) -> float:
        return sum(e.capacity for e in self.edges if math.isfinite(e.capacity))

    def sentinel(self) -> float:
        """Stand-in for +inf: strictly larger than any finite maxflow."""
        return 1.0 + self.finite_cap_sum()


@dataclass(frozen=True)
class Flow:
    """Per-edge flow values (indexed like net.edges) and the total s->t value."""

    edge_flows: np.ndarray
    total: float


@dataclass(frozen=True)
class Cut:
    side_a: frozenset
    side_b: frozenset
    size: float


@dataclass(frozen=True)
class PathFlow:
    nodes: tuple
    value: float
    edge_ids: tuple


@dataclass(frozen=True)
class PathDecomposition:
    paths: tuple

    @property
    def total(self) -> float:
        return sum(p.value for p in self.paths)


def _reachable(node_count, arcs, src, dst) -> bool:
    adj = [[] for _ in range(node_count)]
    for t, h in arcs:
        adj[t].append(h)
    seen = [False] * node_count
    seen[src] = True
    q = deque([src])
    while q:
        u = q.popleft()
        if u == dst:
            return True
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                q.append(v)
    return False


def weighted_network(G: ChannelGraph, mode: str, M: int | None = None) -> Network:
    """Assign each edge the selected 1-hop exponent of its channel as capacity.

    mode: "two" (optimized Chernoff pair), "tilde" (Bhattacharyya-averaged,
    needs M), or "zero" (zero-rate).  Noiseless edges get +inf.
    """
    if mode == "tilde" and (M is None or M < 2):
        raise ParameterOutOfRange("mode 'tilde' requires M >= 2")
    cache: dict[int, float] = {}
    edges = []
    for e in G.edges:
        key = id(e.channel)
        if key not in cache:
            if mode == "two":
                cache[key] = exponent_two(e.channel).value
            elif mode == "tilde":
                cache[key] = tilde_exponent(e.channel, M).value
            elif mode == "zero":
                cache[key] = zero_rate_exponent(e.channel).value
            else:
                raise ParameterOutOfRange(f"unknown weight mode {mode!r}")
        edges.append(NetEdge(e.tail, e.head, cache[key], e.id))
    return Network(G.node_count, G.source, G.destination, tuple(edges))


def maxflow(net: Network) -> Flow:
    """Maximum flow by augmenting shortest residual paths (Edmonds-Karp).

    Infinite capacities are replaced internally by a sentinel exceeding the
    sum of all finite capacities, which keeps the arithmetic finite and makes
    "the maxflow is infinite" detectable as total >= sentinel.
    """
    n = net.node_count
    m = len(net.edges)
    sentinel = net.sentinel()
    res = np.zeros(2 * m)
    to = np.zeros(2 * m, dtype=int)
    adj = [[] for _ in range(n)]
    for i, e in enumerate(net.edges):
        cap = e.capacity if math.isfinite(e.capacity) else sentinel
        res[2 * i] = cap
        to[2 * i] = e.head
        to[2 * i + 1] = e.tail
        adj[e.tail].append(2 * i)
        adj[e.head].append(2 * i + 1)

    total = 0.0
    while True:
        prev = [-1] * n
        prev[net.source] = -2
        q = deque([net.source])
        while q and prev[net.destination] == -1:
            u = q.popleft()
            for ridx in adj[u]:
                v = to[ridx]
                if prev[v] == -1 and res[ridx] > FLOW_TOL:
                    prev[v] = ridx
                    q.append(v)
        if prev[net.destination] == -1:
            break
        bottleneck = math.inf
        v = net.destination
        while v != net.source:
            ridx = prev[v]
            bottleneck = min(bottleneck, res[ridx])
            v = to[ridx ^ 1]
        v = net.destination
        while v != net.source:
            ridx = prev[v]
            res[ridx] -= bottleneck
            res[ridx ^ 1] += bottleneck
            v = to[ridx ^ 1]
        total += bottleneck

    flows = np.maximum(res[1::2], 0.0)
    flows[flows < FLOW_TOL] = 0.0
    return Flow(edge_flows=flows, total=total)


def mincut(net: Network, flow: Flow | None = None) -> Cut:
    """Residual-reachability cut for a maximum flow; size matches the flow total."""
    if flow is None:
        flow = maxflow(net)
    n = net.node_count
    adj = [[] for _ in range(n)]
    for i, e in enumerate(net.edges):
        cap = e.capacity if math.isfinite(e.capacity) else net.sentinel()
        if cap - flow.edge_flows[i] > 1e-9:
            adj[e.tail].append(e.head)
        if flow.edge_flows[i] > 1e-9:
            adj[e.head].append(e.tail)
    seen = [False] * n
    seen[net.source] = True
    q = deque([net.source])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                q.append(v)
    side_a = frozenset(i for i in range(n) if seen[i])
    side_b = frozenset(i for i in range(n) if not seen[i])
    return Cut(side_a=side_a, side_b=side_b, size=_cut_size(net, side_a))


def _cut_size(net: Network, side_a) -> float:
    return sum(e.capacity for e in net.edges if e.tail in side_a and e.head not in side_a)


def _all_partitions(net: Network):
    rest = [v for v in range(net.node_count) if v not in (net.source, net.destination)]
    for mask in range(1 << len(rest)):
        side_a = {net.source}
        for bit, v in enumerate(rest):
            if mask >> bit & 1:
                side_a.add(v)
        yield frozenset(side_a)


def brute_force_mincut(net: Network) -> Cut:
    """Exhaustive minimum cut; oracle for duality tests (node_count <= 20)."""
    if net.node_count > 20:
        raise GraphTooLarge(f"brute force supports at most 20 nodes, got {net.node_count}")
    best = None
    for side_a in _all_partitions(net):
        size = _cut_size(net, side_a)
        if best is None or size < best[0]:
            best = (size, side_a)
    size, side_a = best
    side_b = frozenset(range(net.node_count)) - side_a
    return Cut(side_a=side_a, side_b=side_b, size=size)


def mincut_without_backedges(net: Network) -> Cut | None:
    """Among minimum cuts, return one with no positive-capacity back-edges.

    Ties are resolved toward fewer back-edges, then lexicographic node-set
    order.  Returns None when every minimum cut has a back-edge.
    """
    if net.node_count > 20:
        raise GraphTooLarge(f"exhaustive cut search supports at most 20 nodes, got {net.node_count}")
    min_size = brute_force_mincut(net).size
    best = None
    for side_a in _all_partitions(net):
        size = _cut_size(net, side_a)
        if size > min_size + 1e-9:
            continue
        backs = sum(1 for e in net.edges if e.head in side_a and e.tail not in side_a and e.capacity > 0)
        key = (backs, tuple(sorted(side_a)))
        if best is None or key < best[0]:
            best = (key, side_a, size)
    (backs, _), side_a, size = best
    if backs > 0:
        return None
    side_b = frozenset(range(net.node_count)) - side_a
    return Cut(side_a=side_a, side_b=side_b, size=size)


def _sink_reachable(adj, remaining, start, sink, blocked) -> bool:
    seen = set(blocked)
    seen.discard(start)
    seen.add(start)
    q = deque([start])
    while q:
        u = q.popleft()
        if u == sink:
            return True
        for eid, head in adj[u]:
            if remaining[eid] > FLOW_TOL and head not in seen:
                seen.add(head)
                q.append(head)
    return False


def decompose(net: Network, flow: Flow) -> PathDecomposition:
    """Decompose a flow into simple source->sink paths.

    Repeatedly extracts the path whose edge-id sequence is lexicographically
    smallest among positive-flow paths, pushes the bottleneck value along it,
    and subtracts.  Each round zeroes at least one edge, so at most |E| paths
    result.  Flow left on cycles disjoint from every source-sink path is
    discarded with a warning.
    """
    n = net.node_count
    adj = [[] for _ in range(n)]
    for e in sorted(net.edges, key=lambda e: e.id):
        adj[e.tail].append((e.id, e.head))
    remaining = flow.edge_flows.copy().astype(float)
    paths = []
    while True:
        nodes = [net.source]
        eids = []
        blocked = {net.source}
        node = net.source
        dead = False
        while node != net.destination:
            step = None
            for eid, head in adj[node]:
                if remaining[eid] > FLOW_TOL and head not in blocked and _sink_reachable(
                    adj, remaining, head, net.destination, blocked
                ):
                    step = (eid, head)
                    break
            if step is None:
                dead = True
                break
            eids.append(step[0])
            nodes.append(step[1])
            blocked.add(step[1])
            node = step[1]
        if dead:
            # only possible at the source: once a step is taken, the
            # reachability probe guarantees the path can be completed
            break
        value = min(remaining[eid] for eid in eids)
        for eid in eids:
            remaining[eid] -= value
            if remaining[eid] < FLOW_TOL:
                remaining[eid] = 0.0
        paths.append(PathFlow(nodes=tuple(nodes), value=float(value), edge_ids=tuple(eids)))
    leftover = float(remaining.sum())
    if leftover > 1e-9:
        warnings.warn(f"discarding {leftover:.3g} units of circulation flow not on any source-sink path")
    return PathDecomposition(paths=tuple(paths))


def path_edge_budgets(dec: PathDecomposition, B: int):
    """Per-(path, edge) sub-block sizes: B_i = ceil(f_i / sum_{j in S_e} f_j * B).

    Returns (budgets, share_count) where budgets[(path_index, edge_id)] is the
    number of channel uses granted to that path on that edge per block window,
    and share_count[edge_id] lists the paths using the edge.
    """
    users: dict[int, list[int]] = {}
    for i, p in enumerate(dec.paths):
        for eid in p.edge_ids:
            users.setdefault(eid, []).append(i)
    budgets = {}
    for eid, idxs in users.items():
        fsum = sum(dec.paths[i].value for i in idxs)
        for i in idxs:
            ratio = dec.paths[i].value / fsum
            budgets[(i, eid)] = math.ceil(ratio * B - 1e-9)
    return budgets, users


@dataclass(frozen=True)
class SplitRecord:
    new_edge_id: int
    orig_edge_id: int
    path_index: int
    sub_block: int


@dataclass(frozen=True)
class SplitResult:
    network: Network
    records: tuple


def split_edges(net: Network, dec: PathDecomposition, B: int) -> SplitResult:
    """Replace each shared edge by one parallel edge per path using it.

    The new edge for path i carries B_i = ceil(f_i / f_e * B) sub-uses and
    capacity B_i * c_e / (B + k); the total sub-uses per original edge stay
    within B + k.  Edges carrying no decomposed flow are dropped.
    """
    k = len(dec.paths)
    if B < k:
        raise BTooSmall(f"need B >= number of paths ({k}), got {B}")
    budgets, users = path_edge_budgets(dec, B)
    cap_by_id = {e.id: e.capacity for e in net.edges}
    meta_by_id = {e.id: e for e in net.edges}
    new_edges = []
    records = []
    for eid in sorted(users):
        total_sub = sum(budgets[(i, eid)] for i in users[eid])
        if total_sub > B + k:
            raise BTooSmall(f"sub-block total {total_sub} exceeds B + k = {B + k} on edge {eid}")
        for i in users[eid]:
            sub = budgets[(i, eid)]
            new_id = len(new_edges)
            e = meta_by_id[eid]
            cap = sub * cap_by_id[eid] / (B + k)
            new_edges.append(NetEdge(e.tail, e.head, cap, new_id))
            records.append(SplitRecord(new_edge_id=new_id, orig_edge_id=eid, path_index=i, sub_block=sub))
    network = Network(net.node_count, net.source, net.destination, tuple(new_edges))
    return SplitResult(network=network, records=tuple(records))
