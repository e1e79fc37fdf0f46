from collections import Counter

import pytest

from pcrpp.core import ekey, parse_instance
from pcrpp.preprocess import copy_vertices, preprocess, restore
from conftest import random_suite


def test_copy_root_positive_edge(single_pos):
    copied = copy_vertices(single_pos)
    # fresh copy 2, tether r-2 of (0, 0), positive edge now 2-a with (1, 5)
    assert copied.vertex_count == 3
    assert copied.copy_map[2] == 0
    by_pair = {ekey(e.u, e.v): e for e in copied.edges}
    assert by_pair[(0, 2)].length == 0.0 and by_pair[(0, 2)].profit == 0.0
    assert by_pair[(1, 2)].length == 1.0 and by_pair[(1, 2)].profit == 5.0


def test_copy_single_positive_off_root_unchanged(barrier):
    copied = copy_vertices(barrier)
    assert copied.vertex_count == 3
    assert copied.copy_map == {0: 0, 1: 1, 2: 2}


def test_copy_vertex_with_two_positive_edges():
    inst = parse_instance("4 3 1\n1 2 1 0\n2 3 1 4\n2 4 1 6\n")
    copied = copy_vertices(inst)
    # vertex 1 owns both positive edges: copies 4 and 5, tethers (0,0)
    assert copied.vertex_count == 6
    assert copied.copy_map[4] == 1 and copied.copy_map[5] == 1
    by_pair = {ekey(e.u, e.v): e for e in copied.edges}
    assert by_pair[(1, 4)].length == 0.0 and by_pair[(1, 4)].profit == 0.0
    assert by_pair[(1, 5)].length == 0.0 and by_pair[(1, 5)].profit == 0.0
    positives = sorted(k for k, e in by_pair.items() if e.profit > 0)
    assert positives == [(2, 4), (3, 5)]


def test_complete_barrier(barrier):
    # all-pairs shortest paths by enumeration: ra=0.1, rb=1, ab kept positive
    pg = preprocess(barrier)
    assert pg.vertex_count == 3
    assert pg.lengths[(0, 1)] == pytest.approx(0.1)
    assert pg.lengths[(0, 2)] == pytest.approx(1.0)
    assert pg.lengths[(1, 2)] == pytest.approx(1.0)
    assert pg.profits[(1, 2)] == pytest.approx(1.3)
    assert pg.pos_edges == frozenset({(1, 2)})


def test_complete_single_positive(single_pos):
    pg = preprocess(single_pos)
    # vertices r=0, a=1, copy=2: r-copy tether 0, r-a shortest path 1, copy-a positive
    assert pg.vertex_count == 3
    assert pg.lengths[(0, 2)] == 0.0
    assert pg.lengths[(0, 1)] == pytest.approx(1.0)
    assert pg.lengths[(1, 2)] == pytest.approx(1.0)
    assert pg.profits[(1, 2)] == 5.0
    assert pg.pos_edges == frozenset({(1, 2)})


def test_complete_zero_profit_is_metric_closure(zero_profit):
    pg = preprocess(zero_profit)
    assert pg.pos_edges == frozenset()
    assert pg.lengths[(0, 2)] == pytest.approx(2.0)  # direct 2 = via-middle 2


def test_properties_on_random_instances():
    for inst in random_suite(40):
        pg = preprocess(inst)
        root = pg.root
        incident = Counter()
        for u, v in pg.pos_edges:
            assert root not in (u, v)  # root touches no positive edge
            incident[u] += 1
            incident[v] += 1
        assert all(c == 1 for c in incident.values())
        assert pg.vertex_count <= inst.vertex_count + 2 * len(inst.edges)
        # zero-profit lengths obey the triangle inequality
        n = pg.vertex_count
        zp = [k for k in pg.lengths if k not in pg.pos_edges]
        dist = {k: pg.lengths[k] for k in zp}
        for u, v in zp:
            for z in range(n):
                if z in (u, v):
                    continue
                kz1, kz2 = ekey(u, z), ekey(z, v)
                if kz1 in dist and kz2 in dist:
                    assert dist[(u, v)] <= dist[kz1] + dist[kz2] + 1e-9


def test_restore_empty(single_pos):
    pg = preprocess(single_pos)
    assert restore(pg, Counter()).edge_counts == {}


def test_restore_tether_plus_positive(single_pos):
    pg = preprocess(single_pos)
    out = restore(pg, Counter({(0, 2): 1, (1, 2): 1}))
    assert out.edge_counts == {(0, 1): 1}


def test_restore_barrier_triangle(barrier):
    pg = preprocess(barrier)
    out = restore(pg, Counter({(0, 1): 1, (1, 2): 1, (0, 2): 1}))
    assert out.edge_counts == {(0, 1): 1, (1, 2): 1, (0, 2): 1}
    lengths = {ekey(e.u, e.v): e.length for e in barrier.edges}
    assert out.total_length(lengths) == pytest.approx(2.1)


def test_restore_length_matches_selection_random():
    for inst in random_suite(25):
        pg = preprocess(inst)
        lengths = {ekey(e.u, e.v): e.length for e in inst.edges}
        keys = sorted(pg.lengths)
        pick = Counter({k: 1 + (i % 2) for i, k in enumerate(keys[::2])})
        expect = sum(pg.lengths[k] * m for k, m in pick.items())
        out = restore(pg, pick)
        assert out.total_length(lengths) == pytest.approx(expect, abs=1e-9)
