import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from rialign.errors import CapExceeded
from rialign.netmodel import make_config
from rialign.regions import (
    Constraint,
    DofRegion,
    enumerate_vertices,
    group_size,
    inner_contains,
    inner_region,
    maximize_total,
    outer_region,
    outer_total_dof,
    total_dof_formulas,
    witness_point,
)


def ic(K, M, N):
    return make_config("ic", K, K, [M] * K, [N] * K)


def test_ic_membership_examples():
    r = inner_region(ic(3, 2, 2))
    assert r.contains([1, 1, 1])
    assert not r.contains([2, 1, 1])
    assert [c.provenance for c in r.violated([2, 1, 1])]


def test_symmetric_point_on_boundary():
    r = inner_region(ic(3, 2, 3))
    p = [F(6, 5)] * 3
    assert r.contains(p)
    assert not r.contains([F(6, 5) + F(1, 1000), F(6, 5), F(6, 5)])
    assert any(c.value(tuple(p)) == c.rhs for c in r.constraints)


def test_floats_rejected():
    with pytest.raises(TypeError):
        inner_region(ic(2, 1, 1)).contains([0.5, 0.5])


def test_negative_point_rejected():
    r = inner_region(ic(2, 1, 1))
    assert not r.contains([F(-1, 2), 0])


def test_general_demand_membership(general):
    r = inner_region(general)
    assert r.contains([1, F(1, 2), F(1, 2)])
    assert inner_contains(general, [1, F(1, 2), F(1, 2)])
    assert "exact" in r.constraints[0].provenance


def test_general_demand_without_interferers():
    cfg = make_config("general", 2, 1, [1, 1], [2], [[1, 2]])
    r = inner_region(cfg)
    assert len(r.constraints) == 1
    assert maximize_total(r) == 2


def test_maximize_ic_inner():
    value, argmax = inner_region(ic(3, 2, 2)).maximize([1, 1, 1])
    assert value == 3 and argmax == [(1, 1, 1)]


def test_outer_single_group_shape():
    r = outer_region(3, 2, 2)
    assert r.contains([1, 1, 1])
    assert not r.contains([1, F(11, 10), 1])


def test_outer_examples():
    assert maximize_total(outer_region(3, 1, 1)) == F(3, 2)
    assert group_size(5, 2, 3, 2) == 3
    assert maximize_total(outer_region(5, 2, 3)) == 6


def test_outer_total_examples():
    assert outer_total_dof(3, 1, 1).value == F(3, 2)
    r = outer_total_dof(5, 2, 3)
    assert r.value == 6 == F(5 * 2 * 3, 5) and r.g == 2
    r = outer_total_dof(2, 1, 3)
    assert r.value == 3 and r.zero_forcing == 2


@pytest.mark.parametrize("M,N", [(1, 1), (1, 2), (2, 3), (3, 2), (2, 2)])
def test_outer_total_monotone_in_K(M, N):
    vals = [outer_total_dof(K, M, N).value for K in range(1, 10)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_outer_cap():
    with pytest.raises(CapExceeded):
        outer_region(9, 1, 1)


def test_formulas():
    x = make_config("x", 2, 2, [1, 1], [1, 1])
    rows = {r.label: r for r in total_dof_formulas(x)}
    assert rows["x-total"].value == F(4, 3) and rows["x-total"].witness == F(1, 3)
    rows = {r.label: r for r in total_dof_formulas(ic(3, 2, 2))}
    assert rows["ic-total"].value == 3
    simo = make_config("x", 3, 2, [1, 1, 1], [2, 2])
    rows = {r.label: r for r in total_dof_formulas(simo)}
    assert rows["simo-x-total"].value == F(12, 5) and rows["simo-x-total"].witness == F(2, 5)
    assert total_dof_formulas(make_config("ic", 2, 2, [1, 2], [1, 1])) == []


def test_x_witness_in_region():
    for N in (1, 2):
        x = make_config("x", 2, 2, [N, N], [N, N])
        r = inner_region(x)
        w = witness_point(x, F(N, 3))
        assert r.contains(w) and inner_contains(x, w)
        assert maximize_total(r) == F(4 * N, 3)


def test_x_selector_cap():
    x = make_config("x", 4, 4, [1] * 4, [1] * 4)
    with pytest.raises(CapExceeded):
        inner_region(x, selector_cap=100)


def test_vertex_caps():
    r = inner_region(make_config("x", 3, 3, [1] * 3, [1] * 3))
    with pytest.raises(CapExceeded, match="dimension"):
        r.vertices()
    many = DofRegion(("a",), tuple(Constraint((F(1),), F(k), "c") for k in range(1, 70)), "big")
    with pytest.raises(CapExceeded, match="constraints"):
        many.vertices()


def test_vertices_simplex():
    cons = [Constraint((F(1), F(1)), F(1), "sum")]
    assert enumerate_vertices(cons, 2) == [(0, 0), (0, 1), (1, 0)]


def test_vertices_match_exhaustive_grid():
    # every vertex of a 2-D region is a grid point of the exact solutions; cross-check by
    # intersecting all pairs of boundary lines by hand
    r = inner_region(ic(2, 2, 3))
    rows = [(c.coeffs, c.rhs) for c in r.constraints] + [((F(-1), F(0)), F(0)), ((F(0), F(-1)), F(0))]
    pts = set()
    for (a, b), (c, d) in itertools.combinations(rows, 2):
        det = a[0] * c[1] - a[1] * c[0]
        if det == 0:
            continue
        x = (b * c[1] - a[1] * d) / det
        y = (a[0] * d - b * c[0]) / det
        if all(co[0] * x + co[1] * y <= rh for co, rh in rows):
            pts.add((x, y))
    assert set(r.vertices()) == pts


@pytest.mark.parametrize("M,N", [(1, 1), (1, 2), (2, 1), (2, 3)])
def test_scaling_doubles_vertices(M, N):
    a = inner_region(ic(3, M, N)).vertices()
    b = inner_region(ic(3, 2 * M, 2 * N)).vertices()
    assert sorted(tuple(2 * x for x in v) for v in a) == sorted(b)
    oa = outer_region(3, M, N).vertices()
    ob = outer_region(3, 2 * M, 2 * N).vertices()
    assert sorted(tuple(2 * x for x in v) for v in oa) == sorted(ob)


fractions = st.fractions(min_value=0, max_value=3, max_denominator=6)


@settings(max_examples=200, deadline=None)
@given(st.lists(fractions, min_size=3, max_size=3), st.integers(1, 3), st.integers(1, 3))
def test_expansion_matches_max_form_ic(point, M, N):
    cfg = make_config("ic", 3, 3, [M, 1, 2], [N, 2, 1])
    assert inner_region(cfg).contains(point) == inner_contains(cfg, point)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(fractions, min_size=3, max_size=3), min_size=2, max_size=2))
def test_expansion_matches_max_form_x(point):
    cfg = make_config("x", 3, 2, [1, 2, 1], [2, 1])
    assert inner_region(cfg).contains(point) == inner_contains(cfg, point)


@settings(max_examples=200, deadline=None)
@given(st.lists(fractions, min_size=3, max_size=3))
def test_expansion_matches_max_form_general(point):
    cfg = make_config("general", 3, 2, [2, 2, 2], [2, 3], [[1, 2], [3]])
    assert inner_region(cfg).contains(point) == inner_contains(cfg, point)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.fractions(min_value=0, max_value=2, max_denominator=20), min_size=3, max_size=3))
def test_sampled_inner_points_lie_in_outer(point):
    inner, outer = inner_region(ic(3, 2, 3)), outer_region(3, 2, 3)
    if inner.contains(point):
        assert outer.contains(point)


@pytest.mark.parametrize("K", [2, 3, 4, 5])
@pytest.mark.parametrize("M,N", [(1, 1), (2, 3), (3, 1)])
def test_inner_vertices_inside_outer(K, M, N):
    outer = outer_region(K, M, N)
    for v in inner_region(ic(K, M, N)).vertices():
        assert outer.contains(v)


def test_region_json():
    doc = inner_region(ic(2, 1, 1)).to_json()
    assert doc["labels"] == ["d1", "d2"]
    assert doc["constraints"][0] == {"coeffs": ["1", "1"], "rhs": "1", "provenance": "IC rx1 interferer tx2"}
