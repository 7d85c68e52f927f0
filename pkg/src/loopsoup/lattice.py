"""Square-lattice geometry: boxes, boundaries, crossing tests and planar filling.

Vertices are plain ``(x, y)`` integer tuples.  Topological operations work on
a doubled grid where vertex ``(x, y)`` sits at cell ``(2x, 2y)`` and the
midpoint of an edge sits at the sum of its endpoints, so that two lattice
edges meet in the raster exactly when they meet in the plane.
"""
from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
from scipy import ndimage

STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1))  # E N W S, counter-clockwise
_FOUR = ndimage.generate_binary_structure(2, 1)


def linf(u, v):
    return max(abs(u[0] - v[0]), abs(u[1] - v[1]))


class VertexSet:
    """Immutable finite set of lattice vertices."""

    __slots__ = ("_pts", "_set", "_index")

    def __init__(self, vertices=()):
        if isinstance(vertices, np.ndarray):
            arr = np.asarray(vertices, dtype=np.int64).reshape(-1, 2)
        else:
            arr = np.array(list(vertices), dtype=np.int64).reshape(-1, 2)
        if len(arr):
            arr = np.unique(arr, axis=0)
        self._pts = arr
        self._pts.setflags(write=False)
        self._set = None
        self._index = None

    @property
    def points(self):
        """Sorted (n, 2) array of coordinates."""
        return self._pts

    @property
    def members(self):
        if self._set is None:
            self._set = frozenset(map(tuple, self._pts.tolist()))
        return self._set

    @property
    def index(self):
        """Vertex -> row position in ``points``."""
        if self._index is None:
            self._index = {v: i for i, v in enumerate(map(tuple, self._pts.tolist()))}
        return self._index

    @property
    def bbox(self):
        if not len(self._pts):
            return None
        lo = self._pts.min(axis=0)
        hi = self._pts.max(axis=0)
        return int(lo[0]), int(lo[1]), int(hi[0]), int(hi[1])

    def __len__(self):
        return len(self._pts)

    def __iter__(self):
        return iter(map(tuple, self._pts.tolist()))

    def __contains__(self, v):
        return tuple(v) in self.members

    def __eq__(self, other):
        if not isinstance(other, VertexSet):
            return NotImplemented
        return self._pts.shape == other._pts.shape and bool(np.all(self._pts == other._pts))

    def __hash__(self):
        return hash(self._pts.tobytes())

    def __repr__(self):
        return f"VertexSet(n={len(self)}, bbox={self.bbox})"

    def __or__(self, other):
        return VertexSet(np.vstack([self._pts, other.points]))

    def __and__(self, other):
        keep = [v for v in self if v in other]
        return VertexSet(keep)

    def __sub__(self, other):
        return VertexSet([v for v in self if v not in other])

    def __le__(self, other):
        return all(v in other for v in self)

    def filter(self, pred):
        return VertexSet([v for v in self if pred(v)])

    def key(self):
        """Canonical text encoding, used for hashing domains."""
        return ";".join(f"{x},{y}" for x, y in self._pts.tolist())

    def mask(self, bbox=None):
        """Boolean raster over ``bbox`` (defaults to own bbox), indexed [x-x0, y-y0]."""
        x0, y0, x1, y1 = bbox or self.bbox
        out = np.zeros((x1 - x0 + 1, y1 - y0 + 1), dtype=bool)
        p = self._pts
        ok = (p[:, 0] >= x0) & (p[:, 0] <= x1) & (p[:, 1] >= y0) & (p[:, 1] <= y1)
        out[p[ok, 0] - x0, p[ok, 1] - y0] = True
        return out


def box(center, radius):
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    cx, cy = center
    xs, ys = np.meshgrid(np.arange(cx - radius, cx + radius + 1),
                         np.arange(cy - radius, cy + radius + 1), indexing="ij")
    return VertexSet(np.stack([xs.ravel(), ys.ravel()], axis=1))


def annulus(center, r, R):
    """Vertices with r <= |w - center|_inf <= R."""
    if r > R:
        raise ValueError("degenerate annulus")
    outer = box(center, R).points
    d = np.abs(outer - np.asarray(center)).max(axis=1)
    return VertexSet(outer[d >= r])


def sphere(center, radius):
    """The inner boundary of box(center, radius): |w - center|_inf == radius."""
    return annulus(center, radius, radius)


def half_plane(A, ymin=1):
    return VertexSet(A.points[A.points[:, 1] >= ymin])


def inner_boundary(A):
    if not len(A):
        return VertexSet()
    m = np.pad(A.mask(), 1)
    full = ndimage.binary_erosion(m, structure=np.ones((3, 3), dtype=bool))
    edge = m & ~full
    x0, y0 = A.bbox[:2]
    ix, iy = np.nonzero(edge)
    return VertexSet(np.stack([ix - 1 + x0, iy - 1 + y0], axis=1))


def _as_points(A):
    if isinstance(A, VertexSet):
        return A.points
    arr = np.asarray(A, dtype=np.int64)
    return arr.reshape(-1, 2)


def crosses_annulus(A, center, r, R):
    """True iff A meets both the sphere of radius r and the sphere of radius R."""
    if r >= R:
        raise ValueError("degenerate annulus")
    p = _as_points(A)
    if not len(p):
        return False
    d = np.abs(p - np.asarray(center)).max(axis=1)
    return bool(np.any(d == r) and np.any(d == R))


def check_path(vertices):
    v = np.asarray(vertices, dtype=np.int64).reshape(-1, 2)
    if len(v) > 1:
        step = np.abs(np.diff(v, axis=0)).sum(axis=1)
        if np.any(step != 1):
            raise ValueError("consecutive vertices must be lattice neighbours")
    return v


class Region:
    """Finite set of half-resolution cells, stored with doubled coordinates.

    Cell ``(a, b)`` stands for the point ``(a/2, b/2)``.
    """

    scale = Fraction(1, 2)

    def __init__(self, cells):
        arr = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
        if len(arr):
            arr = np.unique(arr, axis=0)
        self.cells = arr
        self._set = None

    @classmethod
    def from_mask(cls, mask, origin):
        ix, iy = np.nonzero(mask)
        return cls(np.stack([ix + origin[0], iy + origin[1]], axis=1))

    @property
    def members(self):
        if self._set is None:
            self._set = frozenset(map(tuple, self.cells.tolist()))
        return self._set

    def __len__(self):
        return len(self.cells)

    def __eq__(self, other):
        return isinstance(other, Region) and self.members == other.members

    def __hash__(self):
        return hash(self.members)

    def __le__(self, other):
        return self.members <= other.members

    def contains_vertex(self, v):
        return (2 * v[0], 2 * v[1]) in self.members

    def vertices(self):
        """Lattice vertices lying in the region."""
        c = self.cells
        even = (c[:, 0] % 2 == 0) & (c[:, 1] % 2 == 0)
        return VertexSet(c[even] // 2)

    def to_json(self):
        return json.dumps({"den": 2, "cells": self.cells.tolist()})

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        if obj.get("den", 2) != 2:
            raise ValueError("region cells must use denominator 2")
        return cls(obj["cells"])


def curve_to_json(vertices):
    """Curve as exact half-integers n/2 (all lattice vertices have even numerators)."""
    return json.dumps([[f"{2 * x}/2", f"{2 * y}/2"] for x, y in np.asarray(vertices).tolist()])


def curve_from_json(text):
    out = []
    for a, b in json.loads(text):
        fa, fb = Fraction(a), Fraction(b)
        if fa.denominator != 1 or fb.denominator != 1:
            raise ValueError("curve vertices must be lattice points")
        out.append((int(fa), int(fb)))
    return out


def rasterize(curves, pad=2):
    """Blocked-cell raster of a set of curves on the doubled grid.

    Returns ``(blocked, origin)`` where cell ``(a, b)`` is at
    ``blocked[a - origin[0], b - origin[1]]``.
    """
    arrs = [check_path(c) for c in curves]
    if not arrs or all(len(a) == 0 for a in arrs):
        raise ValueError("empty curve set")
    allv = np.vstack([a for a in arrs if len(a)])
    lo = 2 * allv.min(axis=0) - pad
    hi = 2 * allv.max(axis=0) + pad
    blocked = np.zeros((hi[0] - lo[0] + 1, hi[1] - lo[1] + 1), dtype=bool)
    for a in arrs:
        if not len(a):
            continue
        blocked[2 * a[:, 0] - lo[0], 2 * a[:, 1] - lo[1]] = True
        if len(a) > 1:
            mid = a[1:] + a[:-1]
            blocked[mid[:, 0] - lo[0], mid[:, 1] - lo[1]] = True
    return blocked, (int(lo[0]), int(lo[1]))


def outside_mask(blocked):
    """Cells of the unbounded complementary component (grid already padded)."""
    labels, _ = ndimage.label(~blocked, structure=_FOUR)
    return labels == labels[0, 0]


def _edge_set(curves):
    adj = {}
    for c in curves:
        c = [tuple(v) for v in np.asarray(c).tolist()]
        if len(c) == 1:
            adj.setdefault(c[0], set())
        for u, v in zip(c, c[1:]):
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
    return adj


def _trace_outer(adj, s):
    """Closed walk around the unbounded face of the component of ``s``.

    ``s`` must be the lexicographically minimal vertex of its component.
    The walk keeps the unbounded face on its right-hand side.
    """
    if not adj[s]:
        return [s]
    x, y = s
    d = 0 if (x + 1, y) in adj[s] else 1
    first = (s, d)
    walk = [s]
    v = s
    while True:
        nxt = (v[0] + STEPS[d][0], v[1] + STEPS[d][1])
        walk.append(nxt)
        v = nxt
        for turn in (-1, 0, 1, 2):
            nd = (d + turn) % 4
            w = (v[0] + STEPS[nd][0], v[1] + STEPS[nd][1])
            if w in adj[v]:
                d = nd
                break
        if (v, d) == first:
            return walk


def _components(adj):
    seen = set()
    comps = []
    for v in sorted(adj):
        if v in seen:
            continue
        stack = [v]
        seen.add(v)
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        comps.append(v)
    return comps


def fill_and_frontier(curves):
    """Fill of the union of curves and the closed walks bounding it.

    The fill is the complement of the unbounded component of the complement.
    The frontier is one closed walk per component of the union that is not
    enclosed by another component; each starts at its lexicographically
    minimal vertex.
    """
    curves = [np.asarray(c) for c in curves]
    blocked, origin = rasterize(curves)
    out = outside_mask(blocked)
    region = Region.from_mask(~out, origin)
    adj = _edge_set(curves)
    walks = []
    for s in _components(adj):
        a = 2 * s[0] - 1 - origin[0]
        b = 2 * s[1] - origin[1]
        if out[a, b]:
            walks.append(_trace_outer(adj, s))
    return region, walks


def fill_vertices(curves):
    """Lattice vertices inside the fill of a set of curves."""
    region, _ = fill_and_frontier(curves)
    return region.vertices()


def frontier_vertices(curves):
    """Curve vertices that touch the unbounded complementary component."""
    blocked, origin = rasterize(curves)
    out = outside_mask(blocked)
    near = ndimage.binary_dilation(out, structure=np.ones((3, 3), dtype=bool))
    even = np.zeros_like(blocked)
    even[(origin[0] % 2)::2, (origin[1] % 2)::2] = True
    hit = blocked & near & even
    ix, iy = np.nonzero(hit)
    return VertexSet(np.stack([(ix + origin[0]) // 2, (iy + origin[1]) // 2], axis=1))
