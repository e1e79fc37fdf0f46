"""Core extraction, parity correction and assembly of one candidate walk."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import networkx as nx

from .core import (
    ABS_TOL,
    Instance,
    Multigraph,
    Walk,
    ekey,
    euler_tour,
    objective,
    odd_vertices,
    reconstruct_path,
    shortest_paths,
)
from .preprocess import PreprocessedGraph, restore
from .treedecomp import RootedTree


@dataclass(frozen=True)
class CoreTree:
    """Minimal root-containing subtree spanning the qualifying positive edges."""

    edges: frozenset


@dataclass(frozen=True)
class Candidate:
    walk: Walk
    value: float
    provenance: tuple


def edge_profit_core(
    tree: RootedTree, x: dict[tuple[int, int], float], gamma: float, pg: PreprocessedGraph
) -> CoreTree:
    """Union of the root paths to every positive tree edge with value >= gamma."""
    root = pg.root
    targets = set()
    for key in tree.edges:
        if key in pg.pos_edges and x.get(key, 0.0) >= gamma:
            targets.update(key)
    if not targets:
        return CoreTree(frozenset())
    parent: dict[int, tuple[int, tuple[int, int]] | None] = {root: None}
    stack = [root]
    adj: dict[int, list[tuple[int, tuple[int, int]]]] = {}
    for key in tree.edges:
        u, v = key
        adj.setdefault(u, []).append((v, key))
        adj.setdefault(v, []).append((u, key))
    while stack:
        w = stack.pop()
        for nxt, key in adj.get(w, ()):
            if nxt not in parent:
                parent[nxt] = (w, key)
                stack.append(nxt)
    edges: set = set()
    for t in targets:
        if t not in parent:
            raise ValueError(f"qualifying endpoint {t} is not connected to the root")
        w = t
        while parent[w] is not None:
            prev, key = parent[w]  # type: ignore[misc]
            if key in edges:
                break
            edges.add(key)
            w = prev
    return CoreTree(frozenset(edges))


def min_perfect_matching(points, dist) -> list[tuple[int, int]]:
    """Exact minimum-length perfect pairing of an even point set."""
    points = sorted(points)
    if len(points) % 2 != 0:
        raise ValueError("odd number of points cannot be perfectly matched")
    if not points:
        return []
    if len(points) == 2:
        return [(points[0], points[1])]
    graph = nx.Graph()
    graph.add_nodes_from(points)
    for i, a in enumerate(points):
        for b in points[i + 1:]:
            graph.add_edge(a, b, weight=dist[(a, b)] if (a, b) in dist else dist[(b, a)])
    matching = nx.min_weight_matching(graph)
    return sorted(ekey(a, b) for a, b in matching)


def matching_by_dp(points, dist) -> tuple[float, list[tuple[int, int]]]:
    """Exhaustive pairing oracle for small point sets (bitmask over pairs)."""
    points = sorted(points)
    k = len(points)
    if k % 2 != 0:
        raise ValueError("odd number of points cannot be perfectly matched")
    if k > 16:
        raise ValueError("oracle limited to 16 points")
    full = (1 << k) - 1
    best: dict[int, tuple[float, list]] = {0: (0.0, [])}

    def lookup(a, b):
        return dist[(a, b)] if (a, b) in dist else dist[(b, a)]

    for mask in range(1, full + 1):
        if bin(mask).count("1") % 2 != 0:
            continue
        i = (mask & -mask).bit_length() - 1
        entries = []
        for j in range(i + 1, k):
            if mask & (1 << j):
                rest = mask & ~(1 << i) & ~(1 << j)
                if rest in best:
                    cost, pairs = best[rest]
                    entries.append((cost + lookup(points[i], points[j]), pairs + [ekey(points[i], points[j])]))
        if entries:
            best[mask] = min(entries, key=lambda t: (t[0], t[1]))
    return best[full]


def min_tjoin(inst: Instance, targets, sp_cache=None) -> Multigraph:
    """Minimum-length edge multiset whose odd-degree set equals the targets.

    Pairs the targets by an exact matching under the shortest-path metric and
    expands each pair to its path; edge copies cancel in pairs, which keeps
    parity and never increases the length.
    """
    targets = sorted(set(targets))
    if len(targets) % 2 != 0:
        raise ValueError("odd target set admits no parity correction")
    if not targets:
        return Multigraph()
    adj = inst.adjacency()
    cache = sp_cache if sp_cache is not None else {}
    for t in targets:
        if t not in cache:
            cache[t] = shortest_paths(adj, t)
    dist = {}
    for i, a in enumerate(targets):
        for b in targets[i + 1:]:
            d = cache[a][0][b]
            if d == float("inf"):
                raise ValueError(f"targets {a} and {b} lie in different components")
            dist[(a, b)] = d
    pairs = min_perfect_matching(targets, dist)
    counts: Counter = Counter()
    for a, b in pairs:
        path = reconstruct_path(cache[a][1], a, b)
        for u, v in zip(path, path[1:]):
            counts[ekey(u, v)] += 1
    reduced = Counter({k: m % 2 for k, m in counts.items()})
    return Multigraph(reduced)


def min_tjoin_full(inst: Instance, targets, sp_cache=None) -> Multigraph:
    """Same pairing as min_tjoin but with the raw path multiset, no cancelling."""
    targets = sorted(set(targets))
    if not targets:
        return Multigraph()
    adj = inst.adjacency()
    cache = sp_cache if sp_cache is not None else {}
    for t in targets:
        if t not in cache:
            cache[t] = shortest_paths(adj, t)
    dist = {}
    for i, a in enumerate(targets):
        for b in targets[i + 1:]:
            dist[(a, b)] = cache[a][0][b]
    pairs = min_perfect_matching(targets, dist)
    counts: Counter = Counter()
    for a, b in pairs:
        path = reconstruct_path(cache[a][1], a, b)
        for u, v in zip(path, path[1:]):
            counts[ekey(u, v)] += 1
    return Multigraph(counts)


def _connected_with_root(m: Multigraph, root: int) -> bool:
    support = m.vertices
    if not support:
        return True
    if root not in support:
        return False
    adj: dict[int, list[int]] = {}
    for u, v in m.edge_counts:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    seen = {root}
    stack = [root]
    while stack:
        w = stack.pop()
        for nxt in adj.get(w, ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen >= support


def build_candidate(
    inst: Instance,
    pg: PreprocessedGraph,
    core: CoreTree,
    provenance: tuple,
    sp_cache=None,
) -> Candidate:
    """Restore a core, correct parities, and read off the Eulerian walk."""
    if not core.edges:
        walk = Walk.trivial(inst.root)
        return Candidate(walk, objective(inst, walk), provenance)
    restored = restore(pg, Counter(dict.fromkeys(core.edges, 1)))
    core_length = sum(pg.lengths[k] for k in core.edges)
    got = restored.total_length(
        {ekey(e.u, e.v): e.length for e in inst.edges}
    )
    if got > core_length + ABS_TOL * max(1.0, core_length):
        raise AssertionError("restored core is longer than the core itself")
    if not _connected_with_root(restored, inst.root):
        raise AssertionError("restored core is disconnected from the root")
    join = min_tjoin(inst, odd_vertices(restored), sp_cache=sp_cache)
    combined = restored.combine(join)
    if odd_vertices(combined):
        raise AssertionError("parity correction left an odd vertex")
    if not _connected_with_root(combined, inst.root):
        join = min_tjoin_full(inst, odd_vertices(restored), sp_cache=sp_cache)
        combined = restored.combine(join)
    walk = euler_tour(combined, inst.root)
    return Candidate(walk, objective(inst, walk), provenance)
