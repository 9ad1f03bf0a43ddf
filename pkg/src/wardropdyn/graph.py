"""Acyclic single origin/destination networks.

Node ids are relabeled ``0..n`` along a topological order, so that every
link ``(u, v)`` has ``u < v``; the origin is ``0`` and the destination ``n``.
Links keep the order in which they were given and are addressed by their
index ``e``.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .errors import (
    CycleDetected,
    Infeasible,
    MultipleDestinations,
    MultipleOrigins,
    NetworkError,
    PathExplosion,
    UnreachableNode,
)

DEFAULT_PATH_CAP = 10**6


@dataclass(frozen=True)
class Network:
    node_count: int
    links: tuple[tuple[int, int], ...]
    origin: int
    destination: int
    topological_order: tuple[Hashable, ...]
    link_names: tuple[str, ...]

    # derived, filled in __post_init__
    tail: np.ndarray = field(init=False, repr=False, compare=False)
    head: np.ndarray = field(init=False, repr=False, compare=False)
    out_links: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    in_links: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tail = np.array([u for u, _ in self.links], dtype=np.intp)
        head = np.array([v for _, v in self.links], dtype=np.intp)
        tail.flags.writeable = False
        head.flags.writeable = False
        out = [[] for _ in range(self.node_count)]
        inc = [[] for _ in range(self.node_count)]
        for e, (u, v) in enumerate(self.links):
            out[u].append(e)
            inc[v].append(e)
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "out_links", tuple(tuple(x) for x in out))
        object.__setattr__(self, "in_links", tuple(tuple(x) for x in inc))

    @property
    def link_count(self) -> int:
        return len(self.links)

    def label(self, node: int) -> Hashable:
        """Original (pre-relabeling) name of ``node``."""
        return self.topological_order[node]


@dataclass(frozen=True)
class PathSet:
    paths: tuple[tuple[int, ...], ...]
    incidence: np.ndarray = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def names(self) -> list[str]:
        return [f"p{i + 1}" for i in range(len(self.paths))]


def validate_network(
    links: Sequence[tuple[Hashable, Hashable]],
    nodes: Sequence[Hashable] | int | None = None,
    link_names: Sequence[str] | None = None,
) -> Network:
    """Check the single origin/destination acyclic assumptions and relabel.

    ``nodes`` may be a node count (labels ``0..count-1``), an explicit label
    list, or ``None`` (labels taken from the links in first-seen order).
    Ties in the topological order are broken by the position of the label in
    ``nodes``, so an already topologically labeled graph keeps its ids.
    """
    links = [tuple(l) for l in links]
    if nodes is None:
        labels = list(dict.fromkeys(x for l in links for x in l))
    elif isinstance(nodes, int):
        labels = list(range(nodes))
    else:
        labels = list(nodes)
    if len(set(labels)) != len(labels):
        raise NetworkError("duplicate node labels")
    if len(labels) < 2:
        raise NetworkError("a network needs at least two nodes")
    if not links:
        raise NetworkError("a network needs at least one link")
    if link_names is None:
        link_names = [f"e{i + 1}" for i in range(len(links))]
    elif len(link_names) != len(links) or len(set(link_names)) != len(link_names):
        raise NetworkError("link names must be unique, one per link")

    pos = {x: i for i, x in enumerate(labels)}
    for u, v in links:
        for x in (u, v):
            if x not in pos:
                raise NetworkError(f"link ({u!r}, {v!r}) references unknown node {x!r}")

    m = len(labels)
    succ = [[] for _ in range(m)]
    indeg = [0] * m
    for u, v in links:
        succ[pos[u]].append(pos[v])
        indeg[pos[v]] += 1

    # Kahn, smallest original position first
    remaining = list(indeg)
    heap = [i for i in range(m) if remaining[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        i = heapq.heappop(heap)
        order.append(i)
        for j in succ[i]:
            remaining[j] -= 1
            if remaining[j] == 0:
                heapq.heappush(heap, j)
    if len(order) < m:
        raise CycleDetected([labels[i] for i in _find_cycle(succ, remaining)])

    sources = [labels[i] for i in range(m) if indeg[i] == 0]
    sinks = [labels[i] for i in range(m) if not succ[i]]
    if len(sources) != 1:
        raise MultipleOrigins(sources)
    if len(sinks) != 1:
        raise MultipleDestinations(sinks)

    # With one source and one sink in a DAG both always hold; kept as a guard.
    reach = _reachable(succ, pos[sources[0]])
    missing = [labels[i] for i in range(m) if i not in reach]
    if missing:
        raise UnreachableNode(missing, "are not reachable from the origin")
    pred = [[] for _ in range(m)]
    for i in range(m):
        for j in succ[i]:
            pred[j].append(i)
    coreach = _reachable(pred, pos[sinks[0]])
    missing = [labels[i] for i in range(m) if i not in coreach]
    if missing:
        raise UnreachableNode(missing, "cannot reach the destination")

    new_id = {labels[i]: k for k, i in enumerate(order)}
    return Network(
        node_count=m,
        links=tuple((new_id[u], new_id[v]) for u, v in links),
        origin=0,
        destination=m - 1,
        topological_order=tuple(labels[i] for i in order),
        link_names=tuple(link_names),
    )


def _reachable(adj, start):
    seen = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        for j in adj[i]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return seen


def _find_cycle(succ, remaining):
    # every node left by Kahn has a predecessor that is also left, so walking
    # backwards inside the leftover set must revisit a node
    left = {i for i, r in enumerate(remaining) if r > 0}
    pred = {i: [j for j in left if i in succ[j]] for i in left}
    seen = {}
    path = []
    i = min(left)
    while i not in seen:
        seen[i] = len(path)
        path.append(i)
        i = min(pred[i])
    return path[seen[i]:][::-1]


def enumerate_paths(net: Network, cap: int = DEFAULT_PATH_CAP) -> PathSet:
    """All origin-destination paths, in lexicographic order of link ids."""
    paths = []
    stack = [(net.origin, ())]
    while stack:
        node, prefix = stack.pop()
        if node == net.destination:
            paths.append(prefix)
            if len(paths) > cap:
                raise PathExplosion(cap)
            continue
        # reversed so the smallest link id is popped first
        for e in sorted(net.out_links[node], reverse=True):
            stack.append((net.links[e][1], prefix + (e,)))
    A = np.zeros((net.link_count, len(paths)))
    for p, path in enumerate(paths):
        A[list(path), p] = 1.0
    A.flags.writeable = False
    return PathSet(paths=tuple(paths), incidence=A)


def max_flow(net: Network, capacities) -> tuple[float, np.ndarray]:
    """Origin-destination max flow by shortest augmenting paths.

    Returns the flow value and a per-link flow. An augmenting path made only
    of infinite-capacity links gives ``(inf, flow along that path = 1)``.
    """
    cap = np.asarray(capacities, dtype=float)
    if cap.shape != (net.link_count,):
        raise NetworkError(f"expected {net.link_count} capacities, got shape {cap.shape}")
    if np.any(np.isnan(cap)) or np.any(cap < 0):
        raise NetworkError("capacities must be nonnegative")

    # arc 2e is link e, arc 2e+1 its reverse residual
    residual = np.zeros(2 * net.link_count)
    residual[0::2] = cap
    adj = [[] for _ in range(net.node_count)]
    for e, (u, v) in enumerate(net.links):
        adj[u].append(2 * e)
        adj[v].append(2 * e + 1)

    def arc_head(a):
        u, v = net.links[a // 2]
        return v if a % 2 == 0 else u

    value = 0.0
    while True:
        parent = [-1] * net.node_count
        parent[net.origin] = -2
        queue = deque([net.origin])
        while queue and parent[net.destination] == -1:
            u = queue.popleft()
            for a in adj[u]:
                w = arc_head(a)
                if residual[a] > 0 and parent[w] == -1:
                    parent[w] = a
                    queue.append(w)
        if parent[net.destination] == -1:
            break
        arcs = []
        w = net.destination
        while w != net.origin:
            a = parent[w]
            arcs.append(a)
            w = net.links[a // 2][0] if a % 2 == 0 else net.links[a // 2][1]
        delta = min(residual[a] for a in arcs)
        if math.isinf(delta):
            flow = np.zeros(net.link_count)
            for a in arcs:
                flow[a // 2] += 1.0 if a % 2 == 0 else -1.0
            return math.inf, flow
        for a in arcs:
            residual[a] -= delta
            residual[a ^ 1] += delta
        value += delta

    flow = residual[1::2].copy()
    return value, flow


def min_cut_capacity(net: Network, capacities) -> float:
    """Smallest total capacity over cuts separating origin from destination."""
    return max_flow(net, capacities)[0]


def feasible_preference(net: Network, paths: PathSet, capacities) -> np.ndarray:
    """A path preference whose induced unit flow is strictly below capacity.

    Decomposes the max flow scaled down to unit value; raises ``Infeasible``
    when the min cut is at most 1.
    """
    value, flow = max_flow(net, capacities)
    if value <= 1.0:
        raise Infeasible(value)
    if math.isfinite(value):
        flow = flow / value
    index = {p: i for i, p in enumerate(paths.paths)}
    pi = np.zeros(len(paths))
    remaining = flow.copy()
    total = 0.0
    while total < 1.0 - 1e-12:
        node, seq = net.origin, []
        while node != net.destination:
            e = max(net.out_links[node], key=lambda k: remaining[k])
            if remaining[e] <= 0:
                break
            seq.append(e)
            node = net.links[e][1]
        if node != net.destination:
            break
        amount = min(remaining[e] for e in seq)
        remaining[seq] -= amount
        pi[index[tuple(seq)]] += amount
        total += amount
    return pi / pi.sum()
