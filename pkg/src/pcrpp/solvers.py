"""Top-level algorithms: best-of-many, the reduction baseline, the oracle."""
from __future__ import annotations

import itertools
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .candidates import Candidate, build_candidate, edge_profit_core
from .core import (
    Instance,
    Multigraph,
    Walk,
    ekey,
    euler_tour,
    objective,
    reconstruct_path,
    shortest_paths,
)
from .lp import solve_pcrpp_lp
from .preprocess import preprocess
from .splitoff import SplitRecorder
from .treedecomp import AuxGraph, project_to_hat, stage_distribution

RATIO_BOUND = 1.6
VALUE_TIE = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    lp_max_rounds: int = 10_000
    lp_feas_tol: float = 1e-7
    lp_price_tol: float = 1e-7
    oracle_cap: int = 12
    pctsp_cap: int = 12
    verify: bool = True


@dataclass(frozen=True)
class Solution:
    walk: Walk
    value: float
    lower_bound: float | None = None
    stats: dict = field(default_factory=dict)


def _better(cand: Candidate, best: Candidate) -> bool:
    if cand.value < best.value - VALUE_TIE:
        return True
    if abs(cand.value - best.value) <= VALUE_TIE:
        return cand.walk.edge_count < best.walk.edge_count
    return False


def best_of_many(inst: Instance, cfg: SolverConfig | None = None) -> Solution:
    """Enumerate candidates over outer thresholds, trees and inner thresholds.

    The splitting work is recorded once; each outer threshold replays the
    recorded operations back to its boundary.  The returned walk is the
    cheapest candidate, never worse than the trivial walk, and its value is
    checked against 1.6 times the relaxation bound.
    """
    cfg = cfg or SolverConfig()
    t_start = time.perf_counter()
    pg = preprocess(inst)
    t0 = time.perf_counter()
    sol, cert = solve_pcrpp_lp(
        pg,
        max_rounds=cfg.lp_max_rounds,
        feas_tol=cfg.lp_feas_tol,
        price_tol=cfg.lp_price_tol,
    )
    t_lp = time.perf_counter() - t0

    trivial = Candidate(Walk.trivial(inst.root), objective(inst, Walk.trivial(inst.root)), ("trivial",))
    best = trivial
    generated = 1

    t0 = time.perf_counter()
    recorder = SplitRecorder(pg, sol)
    t_split = time.perf_counter() - t0

    aux = AuxGraph(pg, pg.vertex_count)
    thresholds = sorted({val for v, val in sol.y.items() if v != pg.root and val > 0.0})
    seen: set[int] = set()
    sp_cache: dict = {}
    core_cache: dict[frozenset, Candidate] = {}
    for delta in thresholds:
        boundary = recorder.boundary(delta)
        if boundary in seen:
            continue
        seen.add(boundary)
        dist_aux = stage_distribution(recorder, boundary, aux)
        xt, _ = recorder.state(boundary)
        yt = {
            v: (val if v == pg.root or val >= delta else 0.0)
            for v, val in sol.y.items()
        }
        ghat = project_to_hat(dist_aux, pg)
        if cfg.verify:
            _check_stage(ghat, xt, yt, pg)
        for ti, tree in enumerate(ghat.trees):
            gammas = sorted(
                {xt.get(k, 0.0) for k in tree.edges if k in pg.pos_edges and xt.get(k, 0.0) > 0.0}
            )
            for gamma in gammas:
                core = edge_profit_core(tree, xt, gamma, pg)
                generated += 1
                cached = core_cache.get(core.edges)
                if cached is None:
                    cached = build_candidate(
                        inst, pg, core, (delta, ti, gamma), sp_cache=sp_cache
                    )
                    core_cache[core.edges] = cached
                cand = Candidate(cached.walk, cached.value, (delta, ti, gamma))
                if _better(cand, best):
                    best = cand

    bound = RATIO_BOUND * sol.objective + 1e-6
    if best.value > bound:
        raise AssertionError(
            f"candidate value {best.value} exceeds the ratio bound {bound}"
        )
    t_total = time.perf_counter() - t_start
    stats = {
        "candidates": generated,
        "best": best.provenance,
        "lp_cuts": len(cert.cuts),
        "t_lp": t_lp,
        "t_split": t_split,
        "t_other": max(t_total - t_lp - t_split, 0.0),
    }
    return Solution(best.walk, best.value, lower_bound=sol.objective, stats=stats)


def _check_stage(ghat, xt, yt, pg, tol=1e-6):
    total = ghat.total_weight
    if abs(total - 1.0) > tol:
        raise AssertionError(f"tree weights sum to {total}")
    edge_marg = ghat.edge_marginals()
    for key in pg.pos_edges:
        want = xt.get(key, 0.0)
        if abs(edge_marg.get(key, 0.0) - want) > tol:
            raise AssertionError(f"positive-edge marginal off on {key}")
    vert_marg = ghat.vertex_marginals(pg.root)
    for v, want in yt.items():
        if v == pg.root:
            continue
        if abs(vert_marg.get(v, 0.0) - want) > tol:
            raise AssertionError(f"vertex marginal off at {v}")
    expect = ghat.expected_length(lambda k: pg.lengths[k])
    budget = sum(pg.lengths[k] * val for k, val in xt.items())
    if expect > budget + tol:
        raise AssertionError("expected tree length exceeds the vector length")


def exact_oracle(inst: Instance, cap: int = 12) -> Solution:
    """Exhaustive optimum over traversal vectors in {0,1,2} per edge."""
    m = len(inst.edges)
    if m > cap:
        raise ValueError(f"instance has {m} edges, oracle cap is {cap}")
    if m == 0:
        walk = Walk.trivial(inst.root)
        return Solution(walk, 0.0, lower_bound=0.0, stats={"vectors": 1})

    vecs = np.array(list(itertools.product((0, 1, 2), repeat=m)), dtype=np.int8)
    incidence = np.zeros((m, inst.vertex_count), dtype=np.int8)
    for i, e in enumerate(inst.edges):
        incidence[i, e.u] = 1
        incidence[i, e.v] = 1
    degrees = vecs @ incidence
    even = ~(degrees & 1).any(axis=1)
    weights = np.array([e.length for e in inst.edges])
    profits = np.array([e.profit for e in inst.edges])
    values = vecs @ weights + (vecs == 0) @ profits

    order = np.lexsort((np.arange(len(vecs)), values))
    best_vec = None
    best_val = None
    for idx in order:
        if not even[idx]:
            continue
        vec = vecs[idx]
        if _support_connected(inst, vec):
            best_vec = vec
            best_val = float(values[idx])
            break
    if best_vec is None:
        raise AssertionError("no feasible traversal vector found")
    counts = Counter()
    for i, mult in enumerate(best_vec):
        if mult > 0:
            counts[ekey(inst.edges[i].u, inst.edges[i].v)] += int(mult)
    walk = euler_tour(Multigraph(counts), inst.root)
    value = objective(inst, walk)
    if abs(value - best_val) > 1e-9:
        raise AssertionError("walk value disagrees with the vector value")
    return Solution(walk, value, lower_bound=value, stats={"vectors": len(vecs)})


def _support_connected(inst: Instance, vec) -> bool:
    parent = list(range(inst.vertex_count))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    touched = set()
    for i, mult in enumerate(vec):
        if mult > 0:
            e = inst.edges[i]
            touched.add(e.u)
            touched.add(e.v)
            ra, rb = find(e.u), find(e.v)
            if ra != rb:
                parent[ra] = rb
    if not touched:
        return True
    root_rep = find(inst.root)
    return all(find(v) == root_rep for v in touched)


def pctsp_solve_exact(nodes, dist, penalties, root, cap: int = 12) -> list:
    """Optimal visit set and order by subset DP over the representatives."""
    nodes = sorted(nodes)
    k = len(nodes)
    if k > cap:
        raise ValueError(f"{k} representatives exceed the exact cap {cap}")
    if k == 0:
        return []

    def d(a, b):
        if a == b:
            return 0.0
        return dist[(a, b)] if (a, b) in dist else dist[(b, a)]

    total_penalty = sum(penalties[s] for s in nodes)
    dp = {}
    parent = {}
    for i, s in enumerate(nodes):
        dp[(1 << i, i)] = d(root, s)
        parent[(1 << i, i)] = None
    for mask in range(1, 1 << k):
        for i in range(k):
            if not mask & (1 << i) or (mask, i) not in dp:
                continue
            base = dp[(mask, i)]
            for j in range(k):
                if mask & (1 << j):
                    continue
                nmask = mask | (1 << j)
                cost = base + d(nodes[i], nodes[j])
                if (nmask, j) not in dp or cost < dp[(nmask, j)] - 1e-15:
                    dp[(nmask, j)] = cost
                    parent[(nmask, j)] = (mask, i)

    best_value = total_penalty
    best_state = None
    for mask in range(1, 1 << k):
        skipped = sum(penalties[nodes[i]] for i in range(k) if not mask & (1 << i))
        for i in range(k):
            if mask & (1 << i) and (mask, i) in dp:
                value = dp[(mask, i)] + d(nodes[i], root) + skipped
                if value < best_value - 1e-15:
                    best_value = value
                    best_state = (mask, i)
    if best_state is None:
        return []
    seq = []
    state = best_state
    while state is not None:
        seq.append(nodes[state[1]])
        state = parent[state]
    seq.reverse()
    return seq


def _pctsp_greedy(nodes, dist, penalties, root) -> list:
    """Nearest-improving fallback when the representative count exceeds the cap."""
    def d(a, b):
        if a == b:
            return 0.0
        return dist[(a, b)] if (a, b) in dist else dist[(b, a)]

    visited = []
    cur = root
    remaining = sorted(nodes)
    while remaining:
        best_s = None
        best_gain = 0.0
        for s in remaining:
            gain = penalties[s] - (d(cur, s) + d(s, root) - d(cur, root))
            if gain > best_gain + 1e-15:
                best_gain = gain
                best_s = s
        if best_s is None:
            break
        visited.append(best_s)
        remaining.remove(best_s)
        cur = best_s
    return visited


def pctsp_reduction(inst: Instance, pctsp=None, cap: int = 12) -> Solution:
    """Baseline: one representative vertex per positive edge, then stitch back.

    Builds the subdivided graph with two half-length edges per positive edge,
    takes the metric complete graph on the root and the representatives, runs
    the plugged PCTSP solver, and walks the selected edges in tour order via
    the nearer endpoint each time.
    """
    t_start = time.perf_counter()
    positive = [i for i, e in enumerate(inst.edges) if e.profit > 0.0]
    if not positive:
        walk = Walk.trivial(inst.root)
        return Solution(walk, objective(inst, walk), stats={"exact": True, "visited": 0})

    n = inst.vertex_count
    rep_of = {i: n + j for j, i in enumerate(positive)}
    adj: dict[int, list[tuple[int, float]]] = {v: [] for v in range(n + len(positive))}
    for i, e in enumerate(inst.edges):
        if e.profit > 0.0:
            s = rep_of[i]
            adj[e.u].append((s, e.length / 2.0))
            adj[s].append((e.u, e.length / 2.0))
            adj[s].append((e.v, e.length / 2.0))
            adj[e.v].append((s, e.length / 2.0))
        else:
            adj[e.u].append((e.v, e.length))
            adj[e.v].append((e.u, e.length))
    for lst in adj.values():
        lst.sort()

    terminals = [inst.root] + [rep_of[i] for i in positive]
    dist = {}
    for a in terminals:
        dvals, _ = shortest_paths(adj, a)
        for b in terminals:
            if a < b:
                dist[(a, b)] = dvals[b]
    penalties = {rep_of[i]: inst.edges[i].profit for i in positive}

    exact = True
    if pctsp is None:
        try:
            visited = pctsp_solve_exact(
                [rep_of[i] for i in positive], dist, penalties, inst.root, cap=cap
            )
        except ValueError:
            visited = _pctsp_greedy(
                [rep_of[i] for i in positive], dist, penalties, inst.root
            )
            exact = False
    else:
        visited = pctsp([rep_of[i] for i in positive], dist, penalties, inst.root)

    edge_of_rep = {rep_of[i]: i for i in positive}
    orig_adj = inst.adjacency()
    sp = {}

    def paths_from(v):
        if v not in sp:
            sp[v] = shortest_paths(orig_adj, v)
        return sp[v]

    seq = [inst.root]
    cur = inst.root
    for s in visited:
        e = inst.edges[edge_of_rep[s]]
        dvals, preds = paths_from(cur)
        first, second = (e.u, e.v)
        if dvals[e.v] < dvals[e.u] - 1e-15 or (
            abs(dvals[e.v] - dvals[e.u]) <= 1e-15 and e.v < e.u
        ):
            first, second = (e.v, e.u)
        seq.extend(reconstruct_path(preds, cur, first)[1:])
        seq.append(second)
        cur = second
    dvals, preds = paths_from(cur)
    seq.extend(reconstruct_path(preds, cur, inst.root)[1:])
    walk = Walk(tuple(seq))
    value = objective(inst, walk)
    stats = {
        "exact": exact,
        "visited": len(visited),
        "t_total": time.perf_counter() - t_start,
    }
    return Solution(walk, value, stats=stats)
