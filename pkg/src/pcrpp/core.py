"""Instance model, walks, multigraphs and elementary graph routines.

Vertex ids are 1-based in files and 0-based in memory.  After parsing, the
instance is restricted to the component of the root; the in-memory id of a
surviving vertex is its rank among the surviving 1-based ids.
"""
from __future__ import annotations

import heapq
import math
from collections import Counter, deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple

ABS_TOL = 1e-9

INF = math.inf


class ParseError(ValueError):
    """An instance file violates the format or the model invariants."""


def ekey(u: int, v: int) -> tuple[int, int]:
    """Canonical unordered-pair key."""
    return (u, v) if u < v else (v, u)


class Edge(NamedTuple):
    u: int
    v: int
    length: float
    profit: float


@dataclass(frozen=True)
class Instance:
    """Rooted undirected graph with a nonnegative length and profit per edge."""

    vertex_count: int
    root: int
    edges: tuple[Edge, ...]
    dropped_profit: float = 0.0
    opt_max: float | None = None
    name: str = ""

    @property
    def total_profit(self) -> float:
        return sum(e.profit for e in self.edges)

    @property
    def total_length(self) -> float:
        return sum(e.length for e in self.edges)

    def positive_edges(self) -> tuple[int, ...]:
        return tuple(i for i, e in enumerate(self.edges) if e.profit > 0.0)

    def edge_lookup(self) -> dict[tuple[int, int], int]:
        return {ekey(e.u, e.v): i for i, e in enumerate(self.edges)}

    def adjacency(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {v: [] for v in range(self.vertex_count)}
        for e in self.edges:
            adj[e.u].append((e.v, e.length))
            adj[e.v].append((e.u, e.length))
        for lst in adj.values():
            lst.sort()
        return adj


@dataclass(frozen=True)
class Walk:
    """Closed walk given as the visited vertex sequence, root first and last."""

    vertices: tuple[int, ...]

    @classmethod
    def trivial(cls, root: int) -> "Walk":
        return cls((root,))

    @property
    def edge_count(self) -> int:
        return len(self.vertices) - 1

    def edge_multiset(self) -> Counter:
        return Counter(ekey(a, b) for a, b in zip(self.vertices, self.vertices[1:]))


def check_walk(inst: Instance, walk: Walk) -> None:
    """Raise ValueError unless the walk is rooted, closed and edge-valid."""
    seq = walk.vertices
    if not seq:
        raise ValueError("empty vertex sequence")
    if seq[0] != inst.root or seq[-1] != inst.root:
        raise ValueError("walk must start and end at the root")
    known = inst.edge_lookup()
    for a, b in zip(seq, seq[1:]):
        if ekey(a, b) not in known:
            raise ValueError(f"walk uses a nonexistent edge {a}-{b}")


def objective(inst: Instance, walk: Walk) -> float:
    """Walk length plus the profits of all edges the walk never traverses."""
    check_walk(inst, walk)
    known = inst.edge_lookup()
    traversed = walk.edge_multiset()
    total = 0.0
    for key, mult in traversed.items():
        total += mult * inst.edges[known[key]].length
    for key, idx in known.items():
        if key not in traversed:
            total += inst.edges[idx].profit
    return total


class Multigraph:
    """Undirected edge multiset; the vertex set is the support of the edges."""

    def __init__(self, edges: Iterable[tuple[int, int]] | Counter | None = None):
        counts: Counter = Counter()
        if isinstance(edges, Counter):
            for key, mult in edges.items():
                counts[ekey(*key)] += mult
        elif edges is not None:
            for u, v in edges:
                counts[ekey(u, v)] += 1
        self.edge_counts: dict[tuple[int, int], int] = {
            k: m for k, m in sorted(counts.items()) if m > 0
        }

    @property
    def vertices(self) -> frozenset:
        verts = set()
        for u, v in self.edge_counts:
            verts.add(u)
            verts.add(v)
        return frozenset(verts)

    @property
    def edge_total(self) -> int:
        return sum(self.edge_counts.values())

    def degrees(self) -> dict[int, int]:
        deg: Counter = Counter()
        for (u, v), m in self.edge_counts.items():
            deg[u] += m
            deg[v] += m
        return dict(deg)

    def combine(self, other: "Multigraph") -> "Multigraph":
        merged = Counter(self.edge_counts)
        merged.update(other.edge_counts)
        return Multigraph(merged)

    def total_length(self, lengths: dict[tuple[int, int], float]) -> float:
        return sum(m * lengths[k] for k, m in self.edge_counts.items())

    def __eq__(self, other) -> bool:
        return isinstance(other, Multigraph) and self.edge_counts == other.edge_counts

    def __repr__(self) -> str:
        return f"Multigraph({self.edge_counts!r})"


def odd_vertices(m: Multigraph) -> frozenset:
    return frozenset(v for v, d in m.degrees().items() if d % 2 == 1)


def euler_tour(m: Multigraph, root: int) -> Walk:
    """Closed walk from the root traversing every edge exactly its multiplicity.

    Hierholzer edge splicing; the smallest available neighbour is taken first
    so the tour is deterministic.
    """
    if not m.edge_counts:
        return Walk((root,))
    if odd_vertices(m):
        raise ValueError("multigraph has an odd-degree vertex")
    support = m.vertices
    if root not in support:
        raise ValueError("root is not in the nonempty multigraph")
    adj: dict[int, Counter] = {v: Counter() for v in support}
    for (u, v), mult in m.edge_counts.items():
        adj[u][v] += mult
        adj[v][u] += mult
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    if seen != set(support):
        raise ValueError("multigraph support is not connected")

    stack = [root]
    tour: list[int] = []
    while stack:
        v = stack[-1]
        nxt = None
        for u in sorted(adj[v]):
            if adj[v][u] > 0:
                nxt = u
                break
        if nxt is None:
            tour.append(stack.pop())
        else:
            adj[v][nxt] -= 1
            adj[nxt][v] -= 1
            stack.append(nxt)
    tour.reverse()
    return Walk(tuple(tour))


def shortest_paths(
    adj: dict[int, list[tuple[int, float]]], source: int
) -> tuple[dict[int, float], dict[int, int | None]]:
    """Single-source Dijkstra; unreachable vertices keep distance infinity.

    Neighbours are relaxed in ascending id order and the heap breaks distance
    ties on the vertex id, which fixes one canonical predecessor per target.
    """
    dist = {v: INF for v in adj}
    pred: dict[int, int | None] = {v: None for v in adj}
    dist[source] = 0.0
    heap: list[tuple[float, int]] = [(0.0, source)]
    done: set[int] = set()
    while heap:
        d, v = heapq.heappop(heap)
        if v in done or d > dist[v]:
            continue
        done.add(v)
        for u, w in adj[v]:
            nd = d + w
            if nd < dist[u]:
                dist[u] = nd
                pred[u] = v
                heapq.heappush(heap, (nd, u))
    return dist, pred


def reconstruct_path(pred: dict[int, int | None], source: int, target: int) -> list[int]:
    path = [target]
    while path[-1] != source:
        prev = pred[path[-1]]
        if prev is None:
            raise ValueError(f"no path from {source} to {target}")
        path.append(prev)
    path.reverse()
    return path


def _tokens(line: str) -> list[str]:
    return line.split()


def parse_instance(text, name: str = "") -> Instance:
    """Parse the whitespace-separated instance format.

    Line 1 holds ``n m r``; the next ``m`` lines hold ``u v w p`` with
    1-based endpoints.  ``#`` lines are comments and an optional
    ``OPTMAX value`` line carries a published maximization optimum.
    """
    if hasattr(text, "read"):
        text = text.read()
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln and not ln.startswith("#")]
    if not lines:
        raise ParseError("empty instance file")
    header = _tokens(lines[0])
    if len(header) != 3:
        raise ParseError(f"malformed header: {lines[0]!r}")
    try:
        n, m, root1 = (int(tok) for tok in header)
    except ValueError as exc:
        raise ParseError(f"malformed header: {lines[0]!r}") from exc
    if n <= 0 or m < 0:
        raise ParseError("malformed header: nonpositive sizes")
    if not 1 <= root1 <= n:
        raise ParseError(f"root out of range: {root1}")

    opt_max: float | None = None
    edges: list[Edge] = []
    seen_pairs: set[tuple[int, int]] = set()
    for ln in lines[1:]:
        toks = _tokens(ln)
        if toks[0].upper() == "OPTMAX":
            if len(toks) != 2:
                raise ParseError(f"malformed OPTMAX line: {ln!r}")
            opt_max = float(toks[1])
            continue
        if len(toks) != 4:
            raise ParseError(f"malformed edge line: {ln!r}")
        try:
            u1, v1 = int(toks[0]), int(toks[1])
            w, p = float(toks[2]), float(toks[3])
        except ValueError as exc:
            raise ParseError(f"malformed edge line: {ln!r}") from exc
        if not (1 <= u1 <= n and 1 <= v1 <= n):
            raise ParseError(f"edge endpoint out of range: {ln!r}")
        if u1 == v1:
            raise ParseError(f"loop edge: {ln!r}")
        if w < 0:
            raise ParseError(f"negative length: {ln!r}")
        if p < 0:
            raise ParseError(f"negative profit: {ln!r}")
        key = ekey(u1 - 1, v1 - 1)
        if key in seen_pairs:
            raise ParseError(f"duplicate edge: {ln!r}")
        seen_pairs.add(key)
        edges.append(Edge(key[0], key[1], w, p))
    if len(edges) != m:
        raise ParseError(f"expected {m} edge lines, found {len(edges)}")

    # Restrict to the root component; profits of removed edges are reported
    # separately so objective constants stay explicit.
    adj: dict[int, list[int]] = {v: [] for v in range(n)}
    for e in edges:
        adj[e.u].append(e.v)
        adj[e.v].append(e.u)
    root = root1 - 1
    reach = {root}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for u in adj[v]:
            if u not in reach:
                reach.add(u)
                queue.append(u)
    keep = sorted(reach)
    remap = {old: new for new, old in enumerate(keep)}
    kept: list[Edge] = []
    dropped = 0.0
    for e in edges:
        if e.u in reach:
            kept.append(Edge(remap[e.u], remap[e.v], e.length, e.profit))
        else:
            dropped += e.profit
    return Instance(
        vertex_count=len(keep),
        root=remap[root],
        edges=tuple(kept),
        dropped_profit=dropped,
        opt_max=opt_max,
        name=name,
    )


def serialize_instance(inst: Instance) -> str:
    lines = [f"{inst.vertex_count} {len(inst.edges)} {inst.root + 1}"]
    for e in inst.edges:
        lines.append(f"{e.u + 1} {e.v + 1} {e.length!r} {e.profit!r}")
    if inst.opt_max is not None:
        lines.append(f"OPTMAX {inst.opt_max!r}")
    return "\n".join(lines) + "\n"
