import itertools
import random
from collections import Counter

import pytest

from pcrpp.candidates import (
    CoreTree,
    build_candidate,
    edge_profit_core,
    matching_by_dp,
    min_perfect_matching,
    min_tjoin,
)
from pcrpp.core import Multigraph, ekey, odd_vertices, parse_instance
from pcrpp.preprocess import preprocess
from pcrpp.treedecomp import RootedTree
from conftest import random_suite


def test_core_no_positive_edge(barrier):
    pg = preprocess(barrier)
    tree = RootedTree(frozenset({(0, 1)}))
    assert edge_profit_core(tree, {(0, 1): 1.0}, 0.5, pg).edges == frozenset()


def test_core_path_with_positive_tip(single_pos):
    pg = preprocess(single_pos)
    # tree r - a - copy with the positive edge (1, 2) at value one half
    tree = RootedTree(frozenset({(0, 1), (1, 2)}))
    x = {(0, 1): 0.5, (1, 2): 0.5}
    assert edge_profit_core(tree, x, 0.3, pg).edges == tree.edges
    assert edge_profit_core(tree, x, 0.7, pg).edges == frozenset()


def test_core_monotone_in_threshold():
    for inst in random_suite(15, base_seed=7000):
        pg = preprocess(inst)
        # a star tree out of the root over the whole graph is not a real
        # decomposition output, but core extraction only needs a tree
        keys = sorted(pg.lengths)
        edges = set()
        seen = {pg.root}
        for u, v in keys:
            if (u in seen) != (v in seen):
                edges.add((u, v))
                seen.update((u, v))
        tree = RootedTree(frozenset(edges))
        x = {k: (0.1 + (i % 10) / 10.0) for i, k in enumerate(sorted(tree.edges))}
        for g1, g2 in [(0.2, 0.5), (0.3, 0.9), (0.0, 1.0)]:
            c_hi = edge_profit_core(tree, x, max(g1, g2), pg)
            c_lo = edge_profit_core(tree, x, min(g1, g2), pg)
            assert c_hi.edges <= c_lo.edges


def test_matching_empty_and_pair():
    assert min_perfect_matching([], {}) == []
    assert min_perfect_matching([3, 7], {(3, 7): 2.0}) == [(3, 7)]


def test_matching_line_of_four():
    # points on a line at 0, 1, 10, 11: the three pairings cost 2, 20, 20
    pts = [0, 1, 2, 3]
    coord = {0: 0.0, 1: 1.0, 2: 10.0, 3: 11.0}
    dist = {(a, b): abs(coord[a] - coord[b]) for a in pts for b in pts if a < b}
    pairs = min_perfect_matching(pts, dist)
    assert sorted(pairs) == [(0, 1), (2, 3)]
    cost, dp_pairs = matching_by_dp(pts, dist)
    assert cost == pytest.approx(2.0)
    assert sorted(dp_pairs) == sorted(pairs)


def test_matching_agrees_with_dp_oracle():
    rng = random.Random(31)
    for _ in range(60):
        k = rng.choice([2, 4, 6, 8])
        pts = list(range(k))
        dist = {(a, b): rng.randint(1, 50) * 1.0 for a in pts for b in pts if a < b}
        pairs = min_perfect_matching(pts, dist)
        cost = sum(dist[p] for p in pairs)
        dp_cost, _ = matching_by_dp(pts, dist)
        assert cost == pytest.approx(dp_cost)


def test_tjoin_empty():
    inst = parse_instance("2 1 1\n1 2 1 0\n")
    assert min_tjoin(inst, []).edge_counts == {}


def test_tjoin_path_endpoints():
    inst = parse_instance("3 2 1\n1 2 1 0\n2 3 1 0\n")
    join = min_tjoin(inst, [0, 2])
    assert join.edge_counts == {(0, 1): 1, (1, 2): 1}


def test_tjoin_four_cycle_opposite():
    inst = parse_instance("4 4 1\n1 2 1 0\n2 3 1 0\n3 4 1 0\n1 4 1 0\n")
    join = min_tjoin(inst, [0, 2])
    lengths = {ekey(e.u, e.v): e.length for e in inst.edges}
    assert join.total_length(lengths) == pytest.approx(2.0)
    assert odd_vertices(join) == frozenset({0, 2})


def brute_force_tjoin(inst, targets):
    """Exhaustive minimum over all edge subsets (multiplicity one suffices)."""
    lengths = [e.length for e in inst.edges]
    best = None
    target = frozenset(targets)
    for mask in itertools.product((0, 1), repeat=len(inst.edges)):
        m = Multigraph(
            Counter({ekey(e.u, e.v): 1 for i, e in enumerate(inst.edges) if mask[i]})
        )
        if odd_vertices(m) != target:
            continue
        cost = sum(lengths[i] for i in range(len(lengths)) if mask[i])
        if best is None or cost < best:
            best = cost
    return best


def test_tjoin_matches_brute_force():
    rng = random.Random(41)
    lengths_of = lambda inst: {ekey(e.u, e.v): e.length for e in inst.edges}
    trials = 0
    suite = random_suite(60, base_seed=7100, max_n=5, max_m=8)
    for inst in suite:
        if len(inst.edges) > 8:
            continue
        verts = list(range(inst.vertex_count))
        even = [v for v in verts]
        rng.shuffle(even)
        size = rng.choice([0, 2, 2, 4]) if len(even) >= 4 else (2 if len(even) >= 2 else 0)
        targets = sorted(even[:size])
        want = brute_force_tjoin(inst, targets)
        if want is None:
            continue
        join = min_tjoin(inst, targets)
        assert odd_vertices(join) == frozenset(targets)
        assert join.total_length(lengths_of(inst)) == pytest.approx(want, abs=1e-9)
        trials += 1
    assert trials >= 40


def test_tjoin_below_fractional_relaxation():
    # any feasible fractional cut-covering solution costs at least the join
    import numpy as np
    from scipy.optimize import linprog

    rng = random.Random(47)
    for inst in random_suite(12, base_seed=7200, max_n=5, max_m=7):
        verts = list(range(inst.vertex_count))
        if len(verts) < 2:
            continue
        targets = sorted(rng.sample(verts, 2))
        join = min_tjoin(inst, targets)
        lengths = {ekey(e.u, e.v): e.length for e in inst.edges}
        join_cost = join.total_length(lengths)
        keys = sorted(lengths)
        rows, rhs = [], []
        for size in range(1, len(verts)):
            for sub in itertools.combinations(verts, size):
                side = set(sub)
                if len(side & set(targets)) % 2 == 1:
                    row = np.zeros(len(keys))
                    for i, k in enumerate(keys):
                        if (k[0] in side) != (k[1] in side):
                            row[i] = -1.0
                    rows.append(row)
                    rhs.append(-1.0)
        res = linprog(
            np.array([lengths[k] for k in keys]),
            A_ub=np.array(rows),
            b_ub=np.array(rhs),
            bounds=[(0, None)] * len(keys),
            method="highs",
        )
        assert res.success
        assert join_cost <= res.fun + 1e-6


def test_build_candidate_trivial(barrier):
    pg = preprocess(barrier)
    cand = build_candidate(barrier, pg, CoreTree(frozenset()), ("trivial",))
    assert cand.walk.vertices == (0,)
    assert cand.value == pytest.approx(barrier.total_profit)


def test_build_candidate_single_positive(single_pos):
    pg = preprocess(single_pos)
    core = CoreTree(frozenset({(0, 2), (1, 2)}))  # tether + positive edge
    cand = build_candidate(single_pos, pg, core, (1.0, 0, 1.0))
    assert cand.walk.vertices == (0, 1, 0)
    assert cand.value == pytest.approx(2.0)


def test_build_candidate_barrier_tree(barrier):
    pg = preprocess(barrier)
    core = CoreTree(frozenset({(0, 1), (1, 2)}))  # path r - a plus profit edge
    cand = build_candidate(barrier, pg, core, (1.0, 0, 1.0))
    assert cand.value == pytest.approx(2.1)
    assert odd_vertices(Multigraph(cand.walk.edge_multiset())) == frozenset()


def test_candidate_walks_are_valid_random():
    from pcrpp.core import check_walk

    for inst in random_suite(15, base_seed=7300):
        pg = preprocess(inst)
        keys = sorted(pg.lengths)
        edges = set()
        seen = {pg.root}
        for u, v in keys:
            if (u in seen) != (v in seen):
                edges.add((u, v))
                seen.update((u, v))
        x = {k: 1.0 for k in edges}
        core = edge_profit_core(RootedTree(frozenset(edges)), x, 0.5, pg)
        cand = build_candidate(inst, pg, core, ("t",))
        check_walk(inst, cand.walk)
        m = Multigraph(cand.walk.edge_multiset())
        assert odd_vertices(m) == frozenset()
