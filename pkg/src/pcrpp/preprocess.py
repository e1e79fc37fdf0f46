"""Vertex copying and shortest-path completion of the input graph.

The completion turns the instance into a complete graph in which positive
edges are pairwise vertex-disjoint, the root touches none of them, and every
zero-profit edge carries the exact shortest-path distance together with one
stored path realizing it.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .core import (
    ABS_TOL,
    Edge,
    Instance,
    Multigraph,
    ekey,
    reconstruct_path,
    shortest_paths,
)


@dataclass(frozen=True, eq=False)
class CopiedGraph:
    """Instance graph after the copying step, before completion.

    ``origin[i]`` is the index of the instance edge that edge ``i`` came
    from, or None for the zero-length tether edges added for the copies.
    """

    vertex_count: int
    root: int
    edges: tuple[Edge, ...]
    copy_map: dict[int, int]
    origin: tuple[int | None, ...]

    def adjacency(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {v: [] for v in range(self.vertex_count)}
        for e in self.edges:
            adj[e.u].append((e.v, e.length))
            adj[e.v].append((e.u, e.length))
        for lst in adj.values():
            lst.sort()
        return adj


@dataclass(frozen=True, eq=False)
class PreprocessedGraph:
    """Complete graph with one edge per vertex pair and back-maps to the input."""

    copied: CopiedGraph
    lengths: dict[tuple[int, int], float]
    profits: dict[tuple[int, int], float]
    pos_edges: frozenset
    path_map: dict[tuple[int, int], tuple[int, ...]]
    origin_edge: dict[tuple[int, int], int]

    @property
    def vertex_count(self) -> int:
        return self.copied.vertex_count

    @property
    def root(self) -> int:
        return self.copied.root

    def pairs(self):
        n = self.vertex_count
        for u in range(n):
            for v in range(u + 1, n):
                yield (u, v)


def copy_vertices(inst: Instance) -> CopiedGraph:
    """Detach the root from positive edges and separate bundled positive edges.

    Every positive edge at the root moves to a fresh copy tied back with a
    zero-length, zero-profit tether; a non-root vertex is copied once per
    positive edge only when it has more than one.
    """
    ends: list[list[int]] = [[e.u, e.v] for e in inst.edges]
    origin: list[int | None] = list(range(len(inst.edges)))
    tethers: list[tuple[int, int]] = []
    next_id = inst.vertex_count
    copy_map = {v: v for v in range(inst.vertex_count)}

    def positive_at(v: int) -> list[int]:
        out = []
        for i, e in enumerate(inst.edges):
            if e.profit > 0.0 and v in ends[i]:
                out.append(i)
        return out

    for i in positive_at(inst.root):
        ends[i][ends[i].index(inst.root)] = next_id
        copy_map[next_id] = inst.root
        tethers.append((inst.root, next_id))
        next_id += 1

    for v in range(inst.vertex_count):
        if v == inst.root:
            continue
        incident = positive_at(v)
        if len(incident) <= 1:
            continue
        for i in incident:
            ends[i][ends[i].index(v)] = next_id
            copy_map[next_id] = v
            tethers.append((v, next_id))
            next_id += 1

    edges = [
        Edge(*ekey(a, b), inst.edges[i].length, inst.edges[i].profit)
        for i, (a, b) in enumerate(ends)
    ]
    for a, b in tethers:
        edges.append(Edge(*ekey(a, b), 0.0, 0.0))
        origin.append(None)
    return CopiedGraph(
        vertex_count=next_id,
        root=inst.root,
        edges=tuple(edges),
        copy_map=copy_map,
        origin=tuple(origin),
    )


def complete(copied: CopiedGraph) -> PreprocessedGraph:
    """Complete the copied graph with zero-profit shortest-path edges."""
    n = copied.vertex_count
    adj = copied.adjacency()
    lengths: dict[tuple[int, int], float] = {}
    profits: dict[tuple[int, int], float] = {}
    pos: set[tuple[int, int]] = set()
    origin_edge: dict[tuple[int, int], int] = {}
    for i, e in enumerate(copied.edges):
        if e.profit > 0.0:
            key = ekey(e.u, e.v)
            lengths[key] = e.length
            profits[key] = e.profit
            pos.add(key)
            origin_edge[key] = copied.origin[i]  # type: ignore[assignment]

    path_map: dict[tuple[int, int], tuple[int, ...]] = {}
    for u in range(n):
        dist, pred = shortest_paths(adj, u)
        for v in range(u + 1, n):
            key = (u, v)
            if key in pos:
                continue
            d = dist[v]
            if d == float("inf"):
                raise ValueError("copied graph is not connected")
            lengths[key] = d
            profits[key] = 0.0
            path_map[key] = tuple(reconstruct_path(pred, u, v))

    pg = PreprocessedGraph(
        copied=copied,
        lengths=lengths,
        profits=profits,
        pos_edges=frozenset(pos),
        path_map=path_map,
        origin_edge=origin_edge,
    )
    _check_properties(pg)
    return pg


def preprocess(inst: Instance) -> PreprocessedGraph:
    return complete(copy_vertices(inst))


def _check_properties(pg: PreprocessedGraph) -> None:
    root = pg.root
    incident: Counter = Counter()
    for u, v in pg.pos_edges:
        if root in (u, v):
            raise AssertionError("root incident to a positive edge")
        incident[u] += 1
        incident[v] += 1
    if incident and max(incident.values()) > 1:
        raise AssertionError("vertex incident to two positive edges")


def restore(pg: PreprocessedGraph, selected) -> Multigraph:
    """Map a complete-graph edge multiset back to an instance multigraph.

    Positive edges return to their originating edges, zero-profit edges
    expand along their stored paths, and copies merge back via ``copy_map``;
    tether steps collapse to nothing.  The total length is preserved exactly,
    which is asserted.
    """
    if not isinstance(selected, Counter):
        selected = Counter(ekey(*k) for k in selected)
    copy_map = pg.copied.copy_map
    counts: Counter = Counter()
    expect = 0.0
    for key, mult in selected.items():
        if mult <= 0:
            continue
        if key not in pg.lengths:
            raise ValueError(f"edge {key} is not in the preprocessed graph")
        expect += mult * pg.lengths[key]
        if key in pg.pos_edges:
            a, b = copy_map[key[0]], copy_map[key[1]]
            counts[ekey(a, b)] += mult
            continue
        path = pg.path_map[key]
        for a, b in zip(path, path[1:]):
            oa, ob = copy_map[a], copy_map[b]
            if oa == ob:
                continue
            counts[ekey(oa, ob)] += mult
    result = Multigraph(counts)

    inst_lengths: dict[tuple[int, int], float] = {}
    for e in pg.copied.edges:
        oa, ob = copy_map[e.u], copy_map[e.v]
        if oa != ob:
            inst_lengths[ekey(oa, ob)] = e.length
    got = result.total_length(inst_lengths)
    if abs(got - expect) > ABS_TOL * max(1.0, abs(expect)):
        raise AssertionError(f"restoration length {got} != selected length {expect}")
    return result
