"""Complete splitting-off with cut preservation and the threshold split.

A split at a vertex repeatedly moves mass from two incident edges onto the
chord between the chosen neighbours until the vertex is isolated, keeping
every required root-to-vertex min cut intact.  Candidate neighbour pairs are
scanned by descending value and the first pair admitting positive mass is
taken with the largest admissible amount, found by bisection over min-cut
probes.

The production path works in a merged view of the root-copy construction
used by the tree decomposition: the working vector lives on the preprocessed
graph while the mass retired onto the distinguished root-copy chord is
tracked in a scalar.  Each merged operation expands into one or two recorded
operations on the auxiliary graph (a root-incident pair expands into the two
balanced halves, a root drop becomes the pair of the root with its copy),
which is exactly the shape the decomposition later undoes.
"""
from __future__ import annotations

from dataclasses import dataclass

from .core import ekey
from .lp import LpSolution, cut_at_least
from .preprocess import PreprocessedGraph

PRECISION = 1e-9
DEMAND_SLACK = 1e-9


class SplitError(RuntimeError):
    """No feasible splitting operation although the vertex still has degree."""


@dataclass(frozen=True)
class SplitOp:
    vertex: int
    left: int
    right: int
    amount: float


@dataclass(frozen=True)
class SplitTrace:
    ops: tuple[SplitOp, ...]
    order: tuple[int, ...]


def _adjacency(x: dict[tuple[int, int], float]) -> dict[int, dict[int, float]]:
    adj: dict[int, dict[int, float]] = {}
    for (u, v), val in x.items():
        if val > 1e-12:
            adj.setdefault(u, {})[v] = val
            adj.setdefault(v, {})[u] = val
    return adj


def _set_value(x, adj, key, val):
    x[key] = val
    u, v = key
    if val > 1e-12:
        adj.setdefault(u, {})[v] = val
        adj.setdefault(v, {})[u] = val
    else:
        if u in adj:
            adj[u].pop(v, None)
        if v in adj:
            adj[v].pop(u, None)


def _feasible(x, adj, deltas, demands, root):
    saved = [(key, x.get(key, 0.0)) for key, _ in deltas]
    for key, d in deltas:
        _set_value(x, adj, key, x.get(key, 0.0) + d)
    ok = True
    for t in sorted(demands):
        if not cut_at_least(adj, t, root, demands[t] - DEMAND_SLACK):
            ok = False
            break
    for key, old in saved:
        _set_value(x, adj, key, old)
    return ok


def _max_feasible(x, adj, delta_fn, demands, root, hi, precision):
    if _feasible(x, adj, delta_fn(hi), demands, root):
        return hi
    lo, top = 0.0, hi
    while top - lo > precision:
        mid = 0.5 * (lo + top)
        if _feasible(x, adj, delta_fn(mid), demands, root):
            lo = mid
        else:
            top = mid
    return lo


def _candidates(adj, root, v, merged):
    """Ordered candidate operations at v.

    Entries are sorted by descending edge value with vertex-id tie-break; in
    the merged view the root mass counts as the two balanced halves so a root
    entry and its mirror sit at half the merged value.
    """
    nbrs = adj.get(v, {})
    entries = []
    root_val = nbrs.get(root, 0.0)
    for u in sorted(nbrs):
        val = nbrs[u]
        if val <= 1e-12:
            continue
        if merged and u == root:
            entries.append((val / 2.0, root, "root"))
            entries.append((val / 2.0, -1, "rootcopy"))
        else:
            entries.append((val, u, "plain"))
    entries.sort(key=lambda t: (-t[0], t[1]))
    cands = []
    for i in range(len(entries)):
        for j in range(i + 1, len(entries)):
            ki, kj = entries[i][2], entries[j][2]
            if {ki, kj} == {"root", "rootcopy"}:
                cands.append(("rootdrop", None, None, root_val / 2.0))
            elif "rootcopy" in (ki, kj):
                continue
            elif "root" in (ki, kj):
                u = entries[j][1] if ki == "root" else entries[i][1]
                cands.append(("rootpair", root, u, min(root_val, nbrs[u])))
            else:
                a, b = entries[i][1], entries[j][1]
                cands.append(("pair", a, b, min(nbrs[a], nbrs[b])))
    return cands


def complete_split(
    x: dict[tuple[int, int], float],
    root: int,
    v: int,
    demands: dict[int, float],
    aux_copy: int | None = None,
    e0: float | None = None,
    precision: float = PRECISION,
) -> tuple[dict[tuple[int, int], float], list[SplitOp], float | None]:
    """Zero out the degree of v while preserving all demanded root cuts.

    With ``aux_copy``/``e0`` given, the merged view is active: a root drop is
    allowed and recorded as the pair of the root with its copy.  Raises
    SplitError when the remaining degree cannot be split, which for feasible
    relaxation solutions indicates a bug or inconsistent demands.
    """
    if v == root or v in demands or root in demands:
        raise ValueError("demands must exclude the root and the split vertex")
    merged = aux_copy is not None
    if merged and e0 is None:
        raise ValueError("merged mode requires the root-copy mass")
    x = dict(x)
    adj = _adjacency(x)
    ops: list[SplitOp] = []
    guard = 0
    while True:
        degree = sum(adj.get(v, {}).values())
        if degree <= precision:
            break
        guard += 1
        if guard > 64 * (len(adj) + 2):
            raise SplitError(f"splitting at vertex {v} did not converge")
        chosen = None
        for kind, a, b, cap in _candidates(adj, root, v, merged):
            if cap <= precision:
                continue
            if kind == "pair" or kind == "rootpair":
                def deltas(eps, a=a, b=b):
                    return [
                        (ekey(v, a), -eps),
                        (ekey(v, b), -eps),
                        (ekey(a, b), eps),
                    ]
            else:  # rootdrop: merged x loses 2*eps on the root edge
                def deltas(eps):
                    return [(ekey(v, root), -2.0 * eps)]
            eps = _max_feasible(x, adj, deltas, demands, root, cap, precision)
            if eps > precision:
                chosen = (kind, a, b, eps, deltas)
                break
        if chosen is None:
            raise SplitError(
                f"no feasible splitting pair at vertex {v} with remaining degree {degree}"
            )
        kind, a, b, eps, deltas = chosen
        for key, d in deltas(eps):
            _set_value(x, adj, key, x.get(key, 0.0) + d)
        if kind == "pair":
            ops.append(SplitOp(v, *ekey(a, b), eps))
        elif kind == "rootpair":
            half = eps / 2.0
            ops.append(SplitOp(v, *ekey(root, b), half))
            ops.append(SplitOp(v, *ekey(aux_copy, b), half))
        else:
            e0 = e0 + eps  # type: ignore[operator]
            ops.append(SplitOp(v, *ekey(root, aux_copy), eps))
    return x, ops, e0


class SplitRecorder:
    """One full splitting pass over all non-root vertices, replayable per threshold.

    Vertices are split in nondecreasing order of their relaxation values with
    vertex-id tie-break; the state at every vertex boundary is kept so any
    threshold maps to a stored prefix of the recorded operations.
    """

    def __init__(self, pg: PreprocessedGraph, sol: LpSolution, precision: float = PRECISION):
        self.pg = pg
        self.root = pg.root
        self.aux_copy = pg.vertex_count
        self.y = dict(sol.y)
        self.order = tuple(
            sorted((v for v in range(pg.vertex_count) if v != pg.root), key=lambda v: (self.y[v], v))
        )
        x = {k: val for k, val in sol.x.items() if val != 0.0}
        deg_r = sum(val for k, val in x.items() if pg.root in k)
        e0 = 2.0 - 0.5 * deg_r
        self.states: list[tuple[dict, float]] = [(dict(x), e0)]
        groups: list[tuple[int, int]] = []
        ops: list[SplitOp] = []
        pending = list(self.order)
        while pending:
            v = pending.pop(0)
            demands = {t: 2.0 * self.y[t] for t in pending if self.y[t] > 1e-12}
            x, vops, e0 = complete_split(
                x, pg.root, v, demands, aux_copy=self.aux_copy, e0=e0, precision=precision
            )
            ops.extend(vops)
            groups.append((v, len(vops)))
            self.states.append((dict(x), e0))
        residue = sum(abs(val) for val in x.values())
        if residue > 1e-6:
            raise SplitError(f"residual mass {residue} left after splitting every vertex")
        self.ops = tuple(ops)
        self.groups = tuple(groups)
        self.prefix = [0]
        for _, cnt in groups:
            self.prefix.append(self.prefix[-1] + cnt)

    def boundary(self, delta: float) -> int:
        """Number of leading groups whose vertex value falls below the threshold."""
        count = 0
        for v, _ in self.groups:
            if self.y[v] < delta:
                count += 1
            else:
                break
        return count

    def ops_prefix(self, boundary: int) -> tuple[SplitOp, ...]:
        return self.ops[: self.prefix[boundary]]

    def state(self, boundary: int) -> tuple[dict, float]:
        x, e0 = self.states[boundary]
        return dict(x), e0


def apply_threshold_split(
    sol: LpSolution,
    delta: float,
    pg: PreprocessedGraph,
    recorder: SplitRecorder | None = None,
) -> tuple[dict[tuple[int, int], float], dict[int, float], SplitTrace]:
    """Split off every vertex whose relaxation value lies below the threshold.

    Returns the post-split edge vector on the preprocessed graph, the vertex
    vector after the below-threshold values drop to zero, and the recorded
    trace of auxiliary-graph operations.
    """
    recorder = recorder or SplitRecorder(pg, sol)
    b = recorder.boundary(delta)
    x, _ = recorder.state(b)
    y = {
        v: (val if v == pg.root or val >= delta else 0.0) for v, val in sol.y.items()
    }
    trace = SplitTrace(recorder.ops_prefix(b), tuple(v for v, _ in recorder.groups[:b]))
    return x, y, trace


def check_threshold_split(pg, sol, delta, xt, yt, tol=1e-6):
    """Assert the five post-split guarantees; raises AssertionError otherwise."""
    from .lp import check_lp_solution

    root = pg.root
    full = {k: xt.get(k, 0.0) for k in pg.lengths}
    check_lp_solution(pg, LpSolution(full, dict(yt), 0.0), tol=tol)
    for v, val in sol.y.items():
        if v == root:
            continue
        want = 0.0 if val < delta else val
        if abs(yt[v] - want) > tol:
            raise AssertionError(f"vertex dichotomy violated at {v}")
        if val < delta:
            deg = sum(x for k, x in xt.items() if v in k)
            if deg > tol:
                raise AssertionError(f"split vertex {v} keeps degree {deg}")
    for key in pg.pos_edges:
        star = sol.x[key]
        want = 0.0 if star < delta else star
        if abs(xt.get(key, 0.0) - want) > tol:
            raise AssertionError(f"positive-edge dichotomy violated on {key}")
    before = sum(pg.lengths[k] * val for k, val in sol.x.items())
    after = sum(pg.lengths[k] * val for k, val in xt.items())
    if after > before + tol:
        raise AssertionError(f"split increased total length {before} -> {after}")
