"""Clusters of a loop configuration: vertex-sharing chains of loops, their fills and frontiers."""
from __future__ import annotations

import csv
import io
import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .lattice import Region, VertexSet, _edge_set, _trace_outer
from .loops import LoopConfig
from . import _kernels


class ClusterSet:
    """Partition of a configuration's loop copies into clusters.

    Cluster ids run 0..n-1 in increasing order of each cluster's
    lexicographically smallest vertex.  Fills are computed on demand on the
    doubled grid and cached.
    """

    def __init__(self, config):
        self.config = config
        coords, offsets = config.packed()
        self.xs = np.ascontiguousarray(coords[:, 0], dtype=np.int64)
        self.ys = np.ascontiguousarray(coords[:, 1], dtype=np.int64)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        m = len(self.offsets) - 1
        self.n_loops_total = m
        if m == 0:
            self.loop_cluster = np.zeros(0, dtype=np.int64)
            self.merges = 0
            self.n = 0
            self._loops = []
            self._fills = {}
            self._outer = None
            return
        x0, y0 = self.xs.min(), self.ys.min()
        H = int(self.ys.max() - y0 + 1)
        W = int(self.xs.max() - x0 + 1)
        cells = (self.xs - x0) * H + (self.ys - y0)
        roots, self.merges = _kernels.cluster_labels(cells, self.offsets, W * H)
        # order clusters by smallest vertex
        lens = np.diff(self.offsets)
        per_vertex_root = np.repeat(roots, lens)
        o = np.lexsort((self.ys, self.xs))
        uroots, first = np.unique(per_vertex_root[o], return_index=True)
        ranked = uroots[np.argsort(first)]
        remap = np.zeros(m, dtype=np.int64)
        remap[ranked] = np.arange(len(ranked))
        self.loop_cluster = remap[roots]
        self.n = len(ranked)
        order = np.argsort(self.loop_cluster, kind="stable")
        bounds = np.searchsorted(self.loop_cluster[order], np.arange(self.n + 1))
        self._loops = [order[bounds[c]:bounds[c + 1]] for c in range(self.n)]
        mn, mx, bb = _kernels.cluster_extent(self.xs, self.ys, self.offsets, self.loop_cluster, 0, 0)
        self.bbox = bb[:self.n]
        self._fills = {}
        self._outer = None

    def __len__(self):
        return self.n

    def loops(self, c):
        """Indices (into the packed configuration) of the loop copies in cluster c."""
        return self._loops[c]

    def coords(self, c):
        sel = self._loops[c]
        parts = [np.arange(self.offsets[k], self.offsets[k + 1]) for k in sel]
        idx = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        return np.stack([self.xs[idx], self.ys[idx]], axis=1)

    def vertices(self, c):
        return VertexSet(self.coords(c))

    def linf_range(self, center):
        """Per cluster (min, max) of |v - center|_inf over its vertices."""
        mn, mx, _ = _kernels.cluster_extent(self.xs, self.ys, self.offsets, self.loop_cluster,
                                            int(center[0]), int(center[1]))
        return mn[:self.n], mx[:self.n]

    def _raster(self, c, pad=2):
        x0, y0, x1, y1 = (int(v) for v in self.bbox[c])
        ox, oy = 2 * x0 - pad, 2 * y0 - pad
        W, Hh = 2 * (x1 - x0) + 2 * pad + 1, 2 * (y1 - y0) + 2 * pad + 1
        sel = np.asarray(self._loops[c], dtype=np.int64)
        blocked = _kernels.raster_cycles(self.xs, self.ys, self.offsets, sel, ox, oy, W, Hh)
        return blocked, (ox, oy)

    def outside(self, c):
        """(blocked, outside, origin) rasters for cluster c on the doubled grid."""
        if c not in self._fills:
            blocked, origin = self._raster(c)
            self._fills[c] = (blocked, _kernels.flood_outside(blocked), origin)
        return self._fills[c]

    def fill(self, c):
        _, out, origin = self.outside(c)
        return Region.from_mask(~out, origin)

    def fill_contains(self, c, v):
        _, out, (ox, oy) = self.outside(c)
        a, b = 2 * int(v[0]) - ox, 2 * int(v[1]) - oy
        if a < 0 or b < 0 or a >= out.shape[0] or b >= out.shape[1]:
            return False
        return not out[a, b]

    def frontier_vertices(self, c):
        """Vertices of cluster c adjacent to the unbounded face (as an (n, 2) array)."""
        sel = self._loops[c]
        if len(sel) == 1 and self.offsets[sel[0] + 1] - self.offsets[sel[0]] < 8:
            # loops shorter than 8 enclose no vertex: every vertex is on the frontier
            return np.unique(self.coords(c), axis=0)
        blocked, out, (ox, oy) = self.outside(c)
        pts = np.unique(self.coords(c), axis=0)
        a, b = 2 * pts[:, 0] - ox, 2 * pts[:, 1] - oy
        near = np.zeros(len(pts), dtype=bool)
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                if da or db:
                    near |= out[a + da, b + db]
        return pts[near]

    def frontier(self, c):
        """Closed walk around the unbounded face of cluster c."""
        curves = [self.loop_vertices(k) for k in self._loops[c]]
        adj = _edge_set(curves)
        s = min(adj)
        return _trace_outer(adj, s)

    def loop_vertices(self, k):
        a, b = self.offsets[k], self.offsets[k + 1]
        cyc = np.stack([self.xs[a:b], self.ys[a:b]], axis=1)
        return np.vstack([cyc, cyc[:1]])

    def encloses(self, K, c):
        """Does Fill(K) contain cluster c (K != c)?"""
        if K == c:
            return False
        bk, bc = self.bbox[K], self.bbox[c]
        if not (bk[0] <= bc[0] and bk[1] <= bc[1] and bk[2] >= bc[2] and bk[3] >= bc[3]):
            return False
        k0 = self._loops[c][0]
        v = (self.xs[self.offsets[k0]], self.ys[self.offsets[k0]])
        return self.fill_contains(K, v)

    def is_outermost(self, c):
        if self._outer is not None:
            return bool(self._outer[c])
        bb = self.bbox
        cand = np.nonzero((bb[:, 0] <= bb[c, 0]) & (bb[:, 1] <= bb[c, 1])
                          & (bb[:, 2] >= bb[c, 2]) & (bb[:, 3] >= bb[c, 3]))[0]
        return not any(self.encloses(int(K), c) for K in cand if K != c)

    @property
    def outermost_flags(self):
        if self._outer is None:
            self._outer = np.array([self.is_outermost(c) for c in range(self.n)], dtype=bool)
        return self._outer

    def n_loops(self, c):
        return len(self._loops[c])

    def diameter(self, c):
        pts = np.unique(self.coords(c), axis=0).astype(float)
        if len(pts) > 64:
            try:
                pts = pts[ConvexHull(pts).vertices]
            except QhullError:
                lo = np.lexsort((pts[:, 1], pts[:, 0]))
                pts = pts[[lo[0], lo[-1]]]
        d = pts[:, None, :] - pts[None, :, :]
        return float(math.sqrt((d ** 2).sum(axis=2).max()))

    def crossing(self, center, l, d):
        mn, mx = self.linf_range(center)
        return (mn <= l) & (mx >= d)

    def to_csv(self, scans=()):
        """Summary rows; scans is a list of (center, l, d) annuli for crossing flags."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["cluster_id", "n_loops", "n_vertices", "diameter", "outermost"]
        head += [f"crosses_{cx}_{cy}_{l}_{d}" for (cx, cy), l, d in scans]
        w.writerow(head)
        flags = [self.crossing(z, l, d) for z, l, d in scans]
        for c in range(self.n):
            row = [c, self.n_loops(c), len(np.unique(self.coords(c), axis=0)),
                   f"{self.diameter(c):.6f}", int(self.outermost_flags[c])]
            row += [int(f[c]) for f in flags]
            w.writerow(row)
        return buf.getvalue()


def cluster_decompose(L):
    return ClusterSet(L)


def outermost(C):
    return C.outermost_flags


def hull(A, L):
    """A together with every cluster of L that meets A."""
    C = L if isinstance(L, ClusterSet) else ClusterSet(L)
    if C.n == 0:
        return A
    mask = A.mask() if len(A) else None
    hit = set()
    if mask is not None:
        x0, y0, x1, y1 = A.bbox
        inb = (C.xs >= x0) & (C.xs <= x1) & (C.ys >= y0) & (C.ys <= y1)
        on = np.zeros(len(C.xs), dtype=bool)
        on[inb] = mask[C.xs[inb] - x0, C.ys[inb] - y0]
        loop_of = np.repeat(np.arange(C.n_loops_total), np.diff(C.offsets))
        hit = set(C.loop_cluster[loop_of[on]].tolist())
    parts = [A.points] + [C.coords(c) for c in sorted(hit)]
    return VertexSet(np.vstack(parts))


def frontier_soup(L):
    """Frontier walk of each loop copy taken on its own."""
    C = L if isinstance(L, ClusterSet) else ClusterSet(L)
    out = []
    for k in range(C.n_loops_total):
        adj = _edge_set([C.loop_vertices(k)])
        out.append(_trace_outer(adj, min(adj)))
    return out


def frontier_config(L):
    """The frontier soup as a LoopConfig, each frontier kept as a closed curve."""
    from .loops import unroot

    return LoopConfig.from_loops([unroot(w) for w in frontier_soup(L)], L.domain)


def small_cluster_probability(R, alpha, delta, trials, seed):
    """Fraction of soups in B_R whose clusters all have diameter < delta * R."""
    from .lattice import box
    from .sampler import SoupSpec, sample_batch

    spec = SoupSpec(box((0, 0), R), alpha, rng_seed=seed)
    k = 0
    for cfg in sample_batch(spec, trials):
        C = ClusterSet(cfg)
        bb = C.bbox if C.n else np.zeros((0, 4))
        # bbox side is a lower bound on the diameter; check exact value only when needed
        if all(max(b[2] - b[0], b[3] - b[1]) < delta * R and C.diameter(c) < delta * R
               for c, b in enumerate(bb)):
            k += 1
    return k
