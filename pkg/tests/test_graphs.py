import json
from fractions import Fraction

import pytest

from fockforge.graphs import (
    StableGraph,
    automorphism_order,
    canonical_form,
    enumerate_stable_graphs,
    graphs_to_json,
)


def test_census_constants():
    # (0,3) -> 1, (1,1) -> 2, (2,0) -> 7 are fixed by the genus <= 2
    # closed formulas; (0,4), (0,5), (1,2) are frozen regression constants.
    assert len(enumerate_stable_graphs(0, 3)) == 1
    assert len(enumerate_stable_graphs(1, 1)) == 2
    assert len(enumerate_stable_graphs(2, 0)) == 7
    assert len(enumerate_stable_graphs(0, 4)) == 4
    assert len(enumerate_stable_graphs(0, 5)) == 26
    assert len(enumerate_stable_graphs(1, 2)) == 5


def test_genus_two_symmetry_factors():
    factors = sorted(
        Fraction(1, aut) for _, aut in enumerate_stable_graphs(2, 0)
    )
    assert factors == sorted(
        [
            Fraction(1),
            Fraction(1, 2),
            Fraction(1, 2),
            Fraction(1, 2),
            Fraction(1, 8),
            Fraction(1, 8),
            Fraction(1, 12),
        ]
    )


def test_genus_one_one_point_graphs():
    graphs = enumerate_stable_graphs(1, 1)
    auts = sorted(aut for _, aut in graphs)
    assert auts == [1, 2]
    by_aut = {aut: g for g, aut in graphs}
    assert by_aut[1].genera == (1,) and by_aut[1].edges == ()
    assert by_aut[2].genera == (0,) and by_aut[2].edges == ((0, 0),)


def test_automorphism_orders_worked_examples():
    two_loops = StableGraph(genera=(0,), edges=((0, 0), (0, 0)), legs=())
    assert automorphism_order(two_loops) == 8
    theta = StableGraph(genera=(0, 0), edges=((0, 1), (0, 1), (0, 1)), legs=())
    assert automorphism_order(theta) == 12
    dumbbell = StableGraph(genera=(0, 0), edges=((0, 0), (0, 1), (1, 1)), legs=())
    assert automorphism_order(dumbbell) == 8
    lonely = StableGraph(genera=(2,), edges=(), legs=())
    assert automorphism_order(lonely) == 1


def test_canonical_form_isomorphism_invariance():
    theta_a = StableGraph(genera=(0, 0), edges=((0, 1), (0, 1), (0, 1)), legs=())
    theta_b = StableGraph(genera=(0, 0), edges=((1, 0) if False else (0, 1),) * 3, legs=())
    assert canonical_form(theta_a) == canonical_form(theta_b)
    loop = StableGraph(genera=(1,), edges=((0, 0),), legs=(0,))
    noloop = StableGraph(genera=(1,), edges=(), legs=(0,))
    assert canonical_form(loop) != canonical_form(noloop)
    dumbbell = StableGraph(genera=(0, 0), edges=((0, 0), (0, 1), (1, 1)), legs=())
    theta = theta_a
    assert canonical_form(dumbbell) != canonical_form(theta)
    # vertex relabeling of an asymmetric 2-vertex graph
    a = StableGraph(genera=(1, 0), edges=((0, 1),), legs=(1, 1, 1))
    b = StableGraph(genera=(0, 1), edges=((0, 1),), legs=(0, 0, 0))
    assert canonical_form(a) == canonical_form(b)


def test_structural_invariants_sweep():
    for g, n in [(0, 3), (0, 4), (0, 5), (1, 1), (1, 2), (1, 3), (2, 0), (2, 1), (2, 2), (3, 0)]:
        graphs = enumerate_stable_graphs(g, n)
        keys = set()
        for graph, aut in graphs:
            assert graph.is_connected()
            assert graph.is_stable()
            assert graph.total_genus() == g
            assert len(graph.legs) == n
            assert len(graph.edges) <= 3 * g - 3 + n
            assert aut == automorphism_order(graph) >= 1
            key = canonical_form(graph)
            assert key not in keys
            keys.add(key)


def test_unstable_pair_rejected():
    with pytest.raises(ValueError):
        enumerate_stable_graphs(0, 2)
    with pytest.raises(ValueError):
        enumerate_stable_graphs(1, 0)


def test_json_dump():
    data = json.loads(graphs_to_json(2, 0))
    assert data["count"] == 7
    assert {g["aut_order"] for g in data["graphs"]} == {1, 2, 8, 12}
