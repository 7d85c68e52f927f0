import numpy as np
import pytest
from hypothesis import given, strategies as st

from loopsoup.lattice import (VertexSet, Region, annulus, box, crosses_annulus, curve_from_json, curve_to_json,
                              fill_and_frontier, fill_vertices, frontier_vertices, half_plane, inner_boundary,
                              sphere, linf)
from conftest import random_walk_loop


def ring(R, c=(0, 0)):
    """Closed counter-clockwise walk around the sphere of radius R."""
    x0, y0 = c
    pts = [(x0 + x, y0 - R) for x in range(-R, R)]
    pts += [(x0 + R, y0 + y) for y in range(-R, R)]
    pts += [(x0 + x, y0 + R) for x in range(R, -R, -1)]
    pts += [(x0 - R, y0 + y) for y in range(R, -R, -1)]
    return pts + pts[:1]


def test_box_examples():
    assert list(box((0, 0), 0)) == [(0, 0)]
    assert len(box((0, 0), 1)) == 9
    b = box((2, 3), 2)
    assert len(b) == 25 and (2, 3) in b and (4, 5) in b and (5, 3) not in b
    assert b.bbox == (0, 1, 4, 5)


@given(st.integers(0, 12), st.integers(-5, 5), st.integers(-5, 5))
def test_box_cardinality(R, x, y):
    assert len(box((x, y), R)) == (2 * R + 1) ** 2


@given(st.integers(1, 10), st.integers(1, 10))
def test_annulus_cardinality(r, extra):
    R = r + extra
    A = annulus((0, 0), r, R)
    assert len(A) == (2 * R + 1) ** 2 - (2 * r - 1) ** 2
    assert all(r <= linf(v, (0, 0)) <= R for v in A)


def test_inner_boundary_examples():
    ib = inner_boundary(box((0, 0), 1))
    assert len(ib) == 8 and (0, 0) not in ib
    assert inner_boundary(VertexSet([(0, 0)])) == VertexSet([(0, 0)])
    ib2 = inner_boundary(box((0, 0), 2))
    assert len(ib2) == 16 and ib2 == sphere((0, 0), 2)


@given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=1, max_size=40))
def test_inner_boundary_definition(pts):
    A = VertexSet(pts)
    ib = inner_boundary(A)
    for v in A:
        outside_nb = any((v[0] + a, v[1] + b) not in A for a in (-1, 0, 1) for b in (-1, 0, 1))
        assert (v in ib) == outside_nb
    assert ib <= A


def test_vertexset_ops_and_mask():
    A = VertexSet([(0, 0), (1, 0), (2, 2)])
    B = VertexSet([(1, 0), (5, 5)])
    assert (A | B) == VertexSet([(0, 0), (1, 0), (2, 2), (5, 5)])
    assert (A & B) == VertexSet([(1, 0)])
    assert (A - B) == VertexSet([(0, 0), (2, 2)])
    m = A.mask()
    assert m.shape == (3, 3) and m.sum() == 3 and m[2, 2]
    assert half_plane(box((0, 0), 2), 1) == VertexSet([(x, y) for x in range(-2, 3) for y in (1, 2)])
    assert VertexSet().bbox is None


def test_crosses_annulus_examples():
    path = [(x, 0) for x in range(1, 6)]
    assert crosses_annulus(path, (0, 0), 1, 5)
    assert not crosses_annulus(sphere((0, 0), 3), (0, 0), 1, 5)
    assert not crosses_annulus([(x, 0) for x in range(2, 6)], (0, 0), 1, 5)
    with pytest.raises(ValueError, match="degenerate annulus"):
        crosses_annulus(path, (0, 0), 5, 5)


@given(st.integers(0, 2**31 - 1), st.integers(1, 4), st.integers(2, 8))
def test_connected_crossing_meets_every_sphere(seed, r, extra):
    rng = np.random.default_rng(seed)
    R = r + extra
    walk = [(0, 0)]
    while linf(walk[-1], (0, 0)) < R:
        a, b = [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.integers(4)]
        walk.append((walk[-1][0] + a, walk[-1][1] + b))
    assert crosses_annulus(walk, (0, 0), r, R)
    for s in range(r, R + 1):
        assert any(linf(v, (0, 0)) == s for v in walk)


def test_fill_ring_contains_center():
    region, walks = fill_and_frontier([ring(1)])
    assert region.contains_vertex((0, 0))
    assert fill_vertices([ring(1)]) == box((0, 0), 1)
    assert len(walks) == 1 and walks[0][0] == (-1, -1)


def test_fill_segment():
    region, walks = fill_and_frontier([[(0, 0), (1, 0)]])
    assert region.members == {(0, 0), (1, 0), (2, 0)}
    assert walks == [[(0, 0), (1, 0), (0, 0)]]


def test_fill_nested_rings():
    region, walks = fill_and_frontier([ring(1), ring(3)])
    outer, _ = fill_and_frontier([ring(3)])
    assert region == outer
    assert len(walks) == 1


def test_fill_empty_error():
    with pytest.raises(ValueError, match="empty curve set"):
        fill_and_frontier([])


def _fill_oracle(curves):
    """Vertices whose 4-flood of unvisited vertices plus crossed edges cannot reach far away.

    Independent route: a vertex v is outside the fill iff a path of unit
    squares from a square next to v reaches the bounding frame while never
    crossing a curve edge.
    """
    pts = {tuple(p) for c in curves for p in np.asarray(c).tolist()}
    edges = set()
    for c in curves:
        c = [tuple(p) for p in np.asarray(c).tolist()]
        for u, v in zip(c, c[1:]):
            edges.add(frozenset((u, v)))
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1, y0, y1 = min(xs) - 1, max(xs) + 1, min(ys) - 1, max(ys) + 1
    # squares indexed by lower-left corner
    start = (x0, y0)
    seen = {start}
    stack = [start]
    while stack:
        a, b = stack.pop()
        for (da, db), edge in (((1, 0), ((a + 1, b), (a + 1, b + 1))), ((-1, 0), ((a, b), (a, b + 1))),
                               ((0, 1), ((a, b + 1), (a + 1, b + 1))), ((0, -1), ((a, b), (a + 1, b)))):
            n = (a + da, b + db)
            if not (x0 <= n[0] < x1 and y0 <= n[1] < y1) or n in seen or frozenset(edge) in edges:
                continue
            seen.add(n)
            stack.append(n)
    inside = set()
    for x in range(x0 + 1, x1):
        for y in range(y0 + 1, y1):
            if (x, y) in pts:
                inside.add((x, y))
            elif not any(s in seen for s in ((x, y), (x - 1, y), (x, y - 1), (x - 1, y - 1))):
                inside.add((x, y))
    return VertexSet(list(inside))


@given(st.integers(0, 2**31 - 1), st.integers(2, 12))
def test_fill_matches_square_flood(seed, n):
    rng = np.random.default_rng(seed)
    curves = [random_walk_loop(rng, n)]
    if seed % 2:
        curves.append(random_walk_loop(rng, n, start=(int(rng.integers(-2, 3)), int(rng.integers(-2, 3)))))
    assert fill_vertices(curves) == _fill_oracle(curves)


@given(st.integers(0, 2**31 - 1), st.integers(2, 10))
def test_fill_monotone_and_idempotent(seed, n):
    rng = np.random.default_rng(seed)
    a = random_walk_loop(rng, n)
    b = random_walk_loop(rng, n)
    fa, wa = fill_and_frontier([a])
    fab, wab = fill_and_frontier([a, b])
    assert fa <= fab
    # the frontier walk bounds the same region
    again, _ = fill_and_frontier(wa)
    assert again == fa
    fv = frontier_vertices([a])
    assert fv <= VertexSet(a)
    assert VertexSet([v for w in wa for v in w]) == fv


def test_figure_eight_frontier():
    eight = [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0), (-1, 0), (-1, -1), (0, -1), (0, 0)]
    _, walks = fill_and_frontier([eight])
    assert len(walks) == 1
    assert walks[0][0] == (-1, -1) and walks[0][-1] == (-1, -1)
    assert len(walks[0]) - 1 == 8


def test_region_and_curve_json_roundtrip():
    region, walks = fill_and_frontier([ring(2)])
    assert Region.from_json(region.to_json()) == region
    text = curve_to_json([(0, 0), (1, 0)])
    assert text == '[["0/2", "0/2"], ["2/2", "0/2"]]'
    assert curve_from_json(text) == [(0, 0), (1, 0)]
    with pytest.raises(ValueError):
        curve_from_json('[["1/2", "0/2"]]')
