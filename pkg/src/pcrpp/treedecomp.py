"""Tree distributions that preserve the profit-edge coupling.

A feasible relaxation vector is lifted to an auxiliary graph that carries a
copy of the root joined by a zero-length chord.  Splitting every other vertex
off and then undoing the recorded operations in reverse yields a weighted
tree list whose edge and vertex marginals track the current vector minus one
unit on the chord.  Undoing one operation moves chord mass of the operation
back through the restored vertex: trees holding the chord and missing the
vertex take it as a two-edge detour; trees already holding the vertex swap
the chord for the side edge that keeps them acyclic, and the other side edge
is booked as a pendant on a tree that misses the vertex.  Merging the root
copy back projects the list onto the preprocessed graph.
"""
from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .core import ekey
from .lp import max_flow_min_cut
from .preprocess import PreprocessedGraph
from .splitoff import SplitOp, SplitRecorder, complete_split

MARGIN_TOL = 1e-6
WEIGHT_FLOOR = 1e-12


class DecompositionError(RuntimeError):
    """Internal failure: the constructed list misses its marginals."""


@dataclass(frozen=True, eq=False)
class AuxGraph:
    """Preprocessed graph plus a root copy adjacent to everything."""

    pg: PreprocessedGraph
    copy_id: int

    @property
    def root(self) -> int:
        return self.pg.root

    @property
    def e0(self) -> tuple[int, int]:
        return ekey(self.pg.root, self.copy_id)

    def length(self, key: tuple[int, int]) -> float:
        u, v = key
        if self.copy_id in key:
            other = u if v == self.copy_id else v
            if other == self.pg.root:
                return 0.0
            return self.pg.lengths[ekey(self.pg.root, other)]
        return self.pg.lengths[key]


@dataclass(frozen=True)
class RootedTree:
    edges: frozenset

    def vertices(self, root: int) -> frozenset:
        verts = {root}
        for u, v in self.edges:
            verts.add(u)
            verts.add(v)
        return frozenset(verts)


@dataclass(frozen=True, eq=False)
class TreeDistribution:
    trees: tuple[RootedTree, ...]
    weights: tuple[float, ...]

    def edge_marginals(self) -> dict[tuple[int, int], float]:
        marg: dict[tuple[int, int], float] = {}
        for tree, w in zip(self.trees, self.weights):
            for key in tree.edges:
                marg[key] = marg.get(key, 0.0) + w
        return marg

    def vertex_marginals(self, root: int) -> dict[int, float]:
        marg: dict[int, float] = {}
        for tree, w in zip(self.trees, self.weights):
            for v in tree.vertices(root):
                marg[v] = marg.get(v, 0.0) + w
        return marg

    def expected_length(self, length_of) -> float:
        total = 0.0
        for tree, w in zip(self.trees, self.weights):
            total += w * sum(length_of(key) for key in tree.edges)
        return total

    @property
    def total_weight(self) -> float:
        return sum(self.weights)


def lift_to_aux(x, y, pg: PreprocessedGraph):
    """Lift a feasible pair onto the auxiliary graph, halving the root edges."""
    aux = AuxGraph(pg, pg.vertex_count)
    root = pg.root
    xbar: dict[tuple[int, int], float] = {}
    deg_r = 0.0
    for k, val in x.items():
        if val == 0.0:
            continue
        if root in k:
            other = k[0] if k[1] == root else k[1]
            half = val / 2.0
            xbar[ekey(root, other)] = half
            xbar[ekey(aux.copy_id, other)] = half
            deg_r += val
        else:
            xbar[k] = val
    xbar[aux.e0] = 2.0 - 0.5 * deg_r
    ybar = dict(y)
    ybar[aux.copy_id] = 1.0
    check_pctsp_feasible(xbar, ybar, aux)
    return xbar, ybar, aux


def check_pctsp_feasible(xbar, ybar, aux: AuxGraph, tol: float = MARGIN_TOL) -> None:
    root = aux.root
    if abs(ybar.get(aux.copy_id, 0.0) - 1.0) > tol:
        raise ValueError("root copy must have vertex value one")
    if xbar.get(aux.e0, 0.0) < 1.0 - tol:
        raise ValueError("chord value below one")
    degrees: dict[int, float] = {}
    for (u, v), val in xbar.items():
        if val < -tol:
            raise ValueError(f"negative edge value on {(u, v)}")
        degrees[u] = degrees.get(u, 0.0) + val
        degrees[v] = degrees.get(v, 0.0) + val
    if degrees.get(root, 0.0) > 2.0 + tol:
        raise ValueError("root degree exceeds two")
    for v, val in ybar.items():
        if v == root:
            continue
        if abs(degrees.get(v, 0.0) - 2.0 * val) > tol:
            raise ValueError(f"degree mismatch at {v}")
    support = {k: val for k, val in xbar.items() if val > 1e-12}
    for v, val in sorted(ybar.items()):
        if v == root or val <= tol:
            continue
        cut, _ = max_flow_min_cut(support, v, root)
        if cut < 2.0 * val - tol:
            raise ValueError(f"connectivity cut violated for {v}")


def _contains(edges: frozenset, z: int, root: int) -> bool:
    if z == root:
        return True
    return any(z in key for key in edges)


def _in_component(edges, start: int, target: int) -> bool:
    seen = {start}
    queue = deque([start])
    adj: dict[int, list[int]] = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    while queue:
        w = queue.popleft()
        if w == target:
            return True
        for nxt in adj.get(w, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return target in seen


def _undo_step(trees: list, op: SplitOp, root: int) -> None:
    v, eps = op.vertex, op.amount
    chord = ekey(op.left, op.right)
    side_left = ekey(v, op.left)
    side_right = ekey(v, op.right)

    free_idx = []
    busy_idx = []
    for i, (w, edges) in enumerate(trees):
        if w > 0.0 and chord in edges:
            (busy_idx if _contains(edges, v, root) else free_idx).append(i)
    busy_set = set(busy_idx)

    need = eps
    pendants: list[tuple[tuple[int, int], int, float]] = []
    appended: list = []
    for i in free_idx + busy_idx:
        if need <= WEIGHT_FLOOR:
            break
        w, edges = trees[i]
        take = min(need, w)
        if i in busy_set:
            remainder = edges - {chord}
            if _in_component(remainder, op.left, v):
                newedges = remainder | {side_right}
                pendants.append((side_left, op.left, take))
            else:
                newedges = remainder | {side_left}
                pendants.append((side_right, op.right, take))
        else:
            newedges = (edges - {chord}) | {side_left, side_right}
        trees[i][0] = w - take
        appended.append([take, newedges])
        need -= take
    if need > 1e-9:
        raise DecompositionError(
            f"chord {chord} carries too little tree mass while undoing {op}"
        )
    trees.extend(appended)

    for pendant_edge, anchor, amount in pendants:
        rem = amount
        adds = []
        for i, (w, edges) in enumerate(trees):
            if rem <= WEIGHT_FLOOR:
                break
            if w <= 0.0 or _contains(edges, v, root):
                continue
            if not _contains(edges, anchor, root):
                continue
            take = min(rem, w)
            trees[i][0] = w - take
            adds.append([take, edges | {pendant_edge}])
            rem -= take
        if rem > 1e-9:
            raise DecompositionError(
                f"no host tree for pendant {pendant_edge} while undoing {op}"
            )
        trees.extend(adds)

    if len(trees) > 4096:
        _compact(trees)


def _compact(trees: list) -> None:
    merged: dict[frozenset, float] = {}
    for w, edges in trees:
        if w > WEIGHT_FLOOR:
            merged[edges] = merged.get(edges, 0.0) + w
    trees[:] = [[w, edges] for edges, w in merged.items()]


def _undo_distribution(ops, boundary_count: int, aux: AuxGraph, chord_mass: float = 2.0) -> list:
    """Undo the recorded operations back to the given prefix length.

    The base carries the residual chord mass: weight chord_mass - 1 on the
    two-vertex chord tree and the rest on the bare root tree.
    """
    lam = min(max(chord_mass - 1.0, 0.0), 1.0)
    trees: list = [[lam, frozenset({aux.e0})]]
    if lam < 1.0 - 1e-15:
        trees.append([1.0 - lam, frozenset()])
    for op in reversed(ops[boundary_count:]):
        _undo_step(trees, op, aux.root)
    _compact(trees)
    total = sum(w for w, _ in trees)
    if abs(total - 1.0) > 1e-9:
        raise DecompositionError(f"tree weights sum to {total}")
    for entry in trees:
        entry[0] /= total
    return trees


def _to_distribution(trees: list) -> TreeDistribution:
    return TreeDistribution(
        trees=tuple(RootedTree(edges) for _, edges in trees),
        weights=tuple(w for w, _ in trees),
    )


def _verify_aux_marginals(dist: TreeDistribution, xbar, ybar, aux: AuxGraph, tol: float):
    edge_marg = dist.edge_marginals()
    keys = set(edge_marg) | {k for k, val in xbar.items() if abs(val) > tol}
    for key in keys:
        want = xbar.get(key, 0.0) - (1.0 if key == aux.e0 else 0.0)
        got = edge_marg.get(key, 0.0)
        if abs(got - want) > tol:
            raise DecompositionError(f"edge marginal {key}: {got} != {want}")
    vert_marg = dist.vertex_marginals(aux.root)
    for v, want in ybar.items():
        if v in (aux.root, aux.copy_id):
            continue
        got = vert_marg.get(v, 0.0)
        if abs(got - want) > tol:
            raise DecompositionError(f"vertex marginal {v}: {got} != {want}")


def _is_balanced(xbar, aux: AuxGraph) -> bool:
    root, copy = aux.root, aux.copy_id
    others = set()
    for k in xbar:
        if root in k or copy in k:
            other = k[0] if k[1] in (root, copy) else k[1]
            if other not in (root, copy):
                others.add(other)
    for v in others:
        if xbar.get(ekey(root, v), 0.0) != xbar.get(ekey(copy, v), 0.0):
            return False
    return True


def decompose(xbar, ybar, aux: AuxGraph, verify: bool = True) -> TreeDistribution:
    """Tree distribution on the auxiliary graph matching the given marginals.

    Splits every vertex other than the root and its copy in nondecreasing
    order of the vertex values, then undoes the recorded operations.  A
    balanced input (equal mass on each root edge and its mirror) runs in the
    merged view so the recorded operations agree bit for bit with the
    threshold-split recorder.
    """
    root, copy = aux.root, aux.copy_id
    order = sorted(
        (v for v in ybar if v not in (root, copy)), key=lambda v: (ybar[v], v)
    )
    ops: list[SplitOp] = []
    if _is_balanced(xbar, aux):
        x = {}
        e0 = xbar.get(aux.e0, 0.0)
        for k, val in xbar.items():
            if val == 0.0 or k == aux.e0:
                continue
            if copy in k:
                continue
            if root in k:
                other = k[0] if k[1] == root else k[1]
                x[k] = val + xbar.get(ekey(copy, other), 0.0)
            else:
                x[k] = val
        pending = list(order)
        while pending:
            v = pending.pop(0)
            demands = {t: 2.0 * ybar[t] for t in pending if ybar[t] > 1e-12}
            x, vops, e0 = complete_split(x, root, v, demands, aux_copy=copy, e0=e0)
            ops.extend(vops)
        residue = sum(abs(val) for val in x.values())
        chord_mass = e0
    else:
        x = {k: val for k, val in xbar.items() if val != 0.0}
        pending = list(order)
        while pending:
            v = pending.pop(0)
            demands = {t: 2.0 * ybar[t] for t in pending if ybar[t] > 1e-12}
            demands[copy] = 2.0
            x, vops, _ = complete_split(x, root, v, demands)
            ops.extend(vops)
        residue = sum(abs(val) for k, val in x.items() if k != aux.e0)
        chord_mass = x.get(aux.e0, 0.0)
    if residue > 1e-6:
        raise DecompositionError(f"splitting left residual mass {residue}")

    trees = _undo_distribution(ops, 0, aux, chord_mass=chord_mass)
    dist = _to_distribution(trees)
    if len(dist.trees) > 2 * len(ops) + aux.copy_id + 2:
        raise DecompositionError("tree support exceeds its size bound")
    if verify:
        _verify_aux_marginals(dist, xbar, ybar, aux, MARGIN_TOL)
    return dist


def stage_distribution(recorder: SplitRecorder, boundary: int, aux: AuxGraph) -> TreeDistribution:
    """Replay the recorded splitting back to a vertex boundary."""
    chord_mass = recorder.states[-1][1]
    trees = _undo_distribution(
        list(recorder.ops), recorder.prefix[boundary], aux, chord_mass=chord_mass
    )
    return _to_distribution(trees)


def _find_cycle(edges: set) -> set:
    degree: Counter = Counter()
    for u, v in edges:
        degree[u] += 1
        degree[v] += 1
    alive = set(edges)
    changed = True
    while changed:
        changed = False
        for key in list(alive):
            u, v = key
            if degree[u] == 1 or degree[v] == 1:
                alive.discard(key)
                degree[u] -= 1
                degree[v] -= 1
                changed = True
    return alive


def _project_tree(edges: frozenset, pg: PreprocessedGraph, copy_id: int) -> frozenset:
    root = pg.root
    out: set = set()
    for u, v in edges:
        if copy_id in (u, v):
            other = u if v == copy_id else v
            if other == root:
                continue
            out.add(ekey(root, other))
        else:
            out.add((u, v))
    verts = {root}
    for u, v in out:
        verts.add(u)
        verts.add(v)
    if len(out) == len(verts) - 1:
        return frozenset(out)
    if len(out) != len(verts):
        raise DecompositionError("merged tree is not unicyclic")
    cycle = _find_cycle(out)
    candidates = [k for k in cycle if root in k]
    if not candidates:
        raise DecompositionError("cycle avoids the root after merging")
    drop = max(candidates, key=lambda k: (pg.lengths[k], -(k[0] + k[1] - root)))
    out.discard(drop)
    return frozenset(out)


def project_to_hat(dist: TreeDistribution, pg: PreprocessedGraph) -> TreeDistribution:
    """Merge the root copy back and break the one cycle this may close.

    The deleted cycle edge is root-incident and zero-profit, so the positive
    edges and the vertex sets are untouched; among the candidates the longest
    edge is dropped.  Every projected tree must couple each positive edge
    with its two endpoints, which is checked exactly.
    """
    copy_id = pg.vertex_count
    merged: dict[frozenset, float] = {}
    for tree, w in zip(dist.trees, dist.weights):
        if w <= WEIGHT_FLOOR:
            continue
        projected = _project_tree(tree.edges, pg, copy_id)
        merged[projected] = merged.get(projected, 0.0) + w
    out = TreeDistribution(
        trees=tuple(RootedTree(edges) for edges in merged),
        weights=tuple(merged.values()),
    )
    for tree in out.trees:
        verts = tree.vertices(pg.root)
        for key in pg.pos_edges:
            u, v = key
            present = key in tree.edges
            if present != (u in verts) or present != (v in verts):
                raise DecompositionError(f"coupling violated on {key}")
    return out


def _enumerate_rooted_trees(support: list, root: int, cap: int) -> list:
    """All subtrees of the support that contain the root, empty tree included."""
    found = {frozenset()}
    frontier = [frozenset()]
    while frontier:
        base = frontier.pop()
        verts = {root}
        for u, v in base:
            verts.add(u)
            verts.add(v)
        for key in support:
            u, v = key
            if key in base:
                continue
            if (u in verts) == (v in verts):
                continue
            grown = base | {key}
            if grown not in found:
                found.add(grown)
                if len(found) > cap:
                    raise ValueError("support too rich for tree enumeration")
                frontier.append(grown)
    return sorted(found, key=lambda s: (len(s), sorted(s)))


def decompose_by_lp(xbar, ybar, aux: AuxGraph, cap: int = 200_000) -> TreeDistribution:
    """Desk-scale oracle: solve for tree weights directly from the marginals."""
    root, copy = aux.root, aux.copy_id
    support = sorted(
        k for k, val in xbar.items() if val > 1e-12 and (k != aux.e0 or val > 1.0 + 1e-12)
    )
    targets_edge = {k: xbar[k] - (1.0 if k == aux.e0 else 0.0) for k in support}
    trees = _enumerate_rooted_trees(support, root, cap)

    vert_rows = []
    for v, val in sorted(ybar.items()):
        if v in (root, copy):
            continue
        if val > 1e-12 or any(v in k for k in support):
            vert_rows.append((v, val))

    n = len(trees)
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    for key in support:
        row = np.zeros(n)
        for j, tr in enumerate(trees):
            if key in tr:
                row[j] = 1.0
        rows.append(row)
        rhs.append(targets_edge[key])
    for v, val in vert_rows:
        row = np.zeros(n)
        for j, tr in enumerate(trees):
            if v == root or any(v in k for k in tr):
                row[j] = 1.0
        rows.append(row)
        rhs.append(val)
    rows.append(np.ones(n))
    rhs.append(1.0)

    m = len(rows)
    a_eq = np.zeros((m, n + 2 * m))
    a_eq[:, :n] = np.array(rows)
    for i in range(m):
        a_eq[i, n + 2 * i] = 1.0
        a_eq[i, n + 2 * i + 1] = -1.0
    c = np.zeros(n + 2 * m)
    c[n:] = 1.0
    res = linprog(c, A_eq=a_eq, b_eq=np.array(rhs), bounds=[(0.0, None)] * (n + 2 * m), method="highs")
    if not res.success or res.fun > 1e-7:
        raise DecompositionError("no tree distribution matches the marginals")
    weights = res.x[:n]
    keep = [(trees[j], weights[j]) for j in range(n) if weights[j] > 1e-9]
    return TreeDistribution(
        trees=tuple(RootedTree(edges) for edges, _ in keep),
        weights=tuple(w for _, w in keep),
    )
