"""Arm events of soup clusters and the separation quality of two walk packets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import VertexSet, box, half_plane, rasterize, outside_mask
from .loops import LoopConfig
from .clusters import ClusterSet
from . import _kernels

KINDS = ("four", "two", "boundary_two", "boundary_four")
VARIANTS = ("plain", "truncated_out", "truncated_in", "local")


@dataclass(frozen=True)
class ArmQuery:
    kind: str
    z: tuple
    l: int
    d: int
    variant: str = "plain"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not 1 <= self.l < self.d:
            raise ValueError(f"malformed query: need 1 <= l < d, got l={self.l}, d={self.d}")
        object.__setattr__(self, "z", (int(self.z[0]), int(self.z[1])))

    @property
    def boundary(self):
        return self.kind.startswith("boundary")

    @property
    def needs_two(self):
        return self.kind in ("four", "boundary_four")

    def domain(self, D=None):
        """Sampling domain for the query: B_2d(z) for the local variant, else D."""
        if self.variant == "local":
            D = box(self.z, 2 * self.d)
        elif D is None:
            raise ValueError("non-local variants need an explicit domain")
        if self.boundary:
            D = half_plane(D, self.z[1] + 1)
        return D

    def encode(self):
        return f"{self.kind}|{self.variant}|{self.z[0]},{self.z[1]}|{self.l}|{self.d}"


class ArmDetector:
    """Cluster analysis of one configuration, shared across queries."""

    def __init__(self, config):
        self.config = config
        self.C = config if isinstance(config, ClusterSet) else ClusterSet(config)
        self._ranges = {}
        self._front = {}

    def ranges(self, z):
        if z not in self._ranges:
            self._ranges[z] = self.C.linf_range(z)
        return self._ranges[z]

    def frontier_range(self, c, z):
        key = (c, z)
        if key not in self._front:
            fv = self.C.frontier_vertices(c)
            m = np.abs(fv - np.asarray(z)).max(axis=1)
            self._front[key] = (int(m.min()), int(m.max()))
        return self._front[key]

    def crossing_outermost(self, q, limit):
        """Up to ``limit`` outermost clusters crossing the query annulus."""
        C = self.C
        if C.n == 0:
            return []
        mn, mx = self.ranges(q.z)
        cand = np.nonzero((mn <= q.l) & (mx >= q.d))[0]
        found = []
        for c in cand.tolist():
            if q.kind in ("two", "boundary_two"):
                a, b = self.frontier_range(c, q.z)
                if not (a <= q.l and b >= q.d):
                    continue
            if C.is_outermost(c):
                found.append(c)
                if len(found) >= limit:
                    break
        return found

    def truncation_ok(self, q):
        C = self.C
        if C.n == 0:
            return True
        mn, mx = self.ranges(q.z)
        if q.variant == "truncated_out":
            # clusters meeting B_l must stay inside B_2d
            return not np.any((mn <= q.l) & (mx > 2 * q.d))
        if q.variant == "truncated_in":
            # clusters meeting the sphere of radius d must avoid B_{l/2}
            return not np.any((mn <= q.d) & (mx >= q.d) & (mn <= q.l // 2))
        return True

    def detect(self, q):
        if not self.truncation_ok(q):
            return False
        need = 2 if q.needs_two else 1
        return len(self.crossing_outermost(q, need)) >= need


def detect(query, config):
    return ArmDetector(config).detect(query)


# ---------------------------------------------------------------- quality


def walk_to_sphere(start, s, rng, center=(0, 0), chunk=256):
    """Simple random walk from start, stopped at its first visit to |w - center|_inf = s."""
    steps = np.array([(1, 0), (-1, 0), (0, 1), (0, -1)], dtype=np.int64)
    pos = np.asarray(start, dtype=np.int64)
    c = np.asarray(center, dtype=np.int64)
    out = [pos[None, :]]
    if np.abs(pos - c).max() == s:
        return out[0]
    while True:
        path = pos + np.cumsum(steps[rng.integers(0, 4, chunk)], axis=0)
        m = np.abs(path - c).max(axis=1)
        hit = np.nonzero(m == s)[0]
        if len(hit):
            out.append(path[:hit[0] + 1])
            return np.vstack(out)
        out.append(path)
        pos = path[-1]


def stop_at(path, s, center=(0, 0)):
    """Prefix of a walk up to its first visit to the sphere of radius s."""
    m = np.abs(np.asarray(path) - np.asarray(center)).max(axis=1)
    hit = np.nonzero(m == s)[0]
    if not len(hit):
        raise ValueError(f"walk never reaches radius {s}")
    return path[:hit[0] + 1]


@dataclass
class QualityInput:
    """Initial configuration, two walk packets and the outer soup.

    initial: loops of the initial configuration (kept as they are);
    outer: loops whose frontiers (or themselves, if frontier=False) are added;
    walks1, walks2: lists of (n, 2) vertex arrays, run at least to radius s.
    """
    initial: LoopConfig
    V1: np.ndarray
    V2: np.ndarray
    walks1: list
    walks2: list
    outer: LoopConfig
    r: int
    R: int
    frontier: bool = True
    center: tuple = (0, 0)
    _lists: object = field(default=None, repr=False)

    def vertex_lists(self):
        """Vertex lists of the loops used for clusters (initial loops, then outer frontiers)."""
        if self._lists is None:
            parts = []
            c0, o0 = self.initial.packed()
            for a, b in zip(o0[:-1], o0[1:]):
                parts.append(c0[a:b])
            if len(self.outer):
                C = ClusterSet(self.outer)
                for k in range(C.n_loops_total):
                    a, b = C.offsets[k], C.offsets[k + 1]
                    if not self.frontier or b - a < 8:
                        parts.append(np.stack([C.xs[a:b], C.ys[a:b]], axis=1))
                    else:
                        # a single-loop cluster view gives the loop's own frontier
                        sub = LoopConfig.from_packed(self.outer.domain,
                                                     np.stack([C.xs[a:b], C.ys[a:b]], axis=1),
                                                     np.array([0, b - a]))
                        parts.append(ClusterSet(sub).frontier_vertices(0))
            self._lists = parts
        return self._lists


def _as_array(V):
    if isinstance(V, VertexSet):
        return V.points
    return np.asarray(V, dtype=np.int64).reshape(-1, 2)


def _pack(lists):
    if not lists:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(1, dtype=np.int64)
    lens = [len(p) for p in lists]
    return np.vstack(lists).astype(np.int64), np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)


def _member(points, S):
    """Boolean per point: is it in the vertex array S?"""
    if not len(S) or not len(points):
        return np.zeros(len(points), dtype=bool)
    lo = S.min(axis=0)
    hi = S.max(axis=0)
    m = np.zeros(tuple(hi - lo + 1), dtype=bool)
    m[S[:, 0] - lo[0], S[:, 1] - lo[1]] = True
    ok = np.all((points >= lo) & (points <= hi), axis=1)
    out = np.zeros(len(points), dtype=bool)
    p = points[ok]
    out[ok] = m[p[:, 0] - lo[0], p[:, 1] - lo[1]]
    return out


def _dist_to(points, E):
    """l-infinity distance of each point to the nearest of the points E."""
    if not len(points):
        return np.zeros(0, dtype=np.int64)
    d = np.abs(points[:, None, :] - E[None, :, :]).max(axis=2)
    return d.min(axis=1)


def _clusters_of(lists):
    coords, offsets = _pack(lists)
    if not len(coords):
        return coords, np.zeros(0, dtype=np.int64), 0
    x0, y0 = coords.min(axis=0)
    H = int(coords[:, 1].max() - y0 + 1)
    W = int(coords[:, 0].max() - x0 + 1)
    cells = (coords[:, 0] - x0) * H + (coords[:, 1] - y0)
    roots, _ = _kernels.cluster_labels(cells, offsets, W * H)
    _, lab = np.unique(roots, return_inverse=True)
    per_vertex = np.repeat(lab, np.diff(offsets))
    return coords, per_vertex, int(lab.max()) + 1


def check_initial(inp):
    """Raise if some cluster of the initial loops touches both sides."""
    V1, V2 = _as_array(inp.V1), _as_array(inp.V2)
    if np.any(_member(V1, V2)):
        raise ValueError("sides already connected")
    c0, o0 = inp.initial.packed()
    lists = [c0[a:b] for a, b in zip(o0[:-1], o0[1:])]
    coords, lab, n = _clusters_of(lists)
    if n:
        t1 = np.zeros(n, dtype=bool)
        t2 = np.zeros(n, dtype=bool)
        np.logical_or.at(t1, lab, _member(coords, V1))
        np.logical_or.at(t2, lab, _member(coords, V2))
        if np.any(t1 & t2):
            raise ValueError("sides already connected")


def failure_radius(inp, s):
    """Smallest ball radius k at which the two sides become connected.

    With A_i(k) the side-i set (V_i, walks up to radius s and radius-k
    balls at the walk endpoints), failure at k means A_1(k) meets A_2(k) or
    some cluster meets both.  Each condition fails from a threshold on, so
    the answer is the least threshold.
    """
    c = inp.center
    p1 = [stop_at(w, s, c) for w in inp.walks1]
    p2 = [stop_at(w, s, c) for w in inp.walks2]
    X1 = np.vstack([_as_array(inp.V1)] + p1)
    X2 = np.vstack([_as_array(inp.V2)] + p2)
    E1 = np.array([p[-1] for p in p1])
    E2 = np.array([p[-1] for p in p2])
    if np.any(_member(X1, X2)):
        return 0
    ks = [
        int(_dist_to(X1, E2).min()),
        int(_dist_to(X2, E1).min()),
        int(np.ceil(np.abs(E1[:, None, :] - E2[None, :, :]).max(axis=2).min() / 2)),
    ]
    coords, lab, n = _clusters_of(inp.vertex_lists())
    if n:
        big = 1 << 40
        t1 = np.zeros(n, dtype=bool)
        t2 = np.zeros(n, dtype=bool)
        np.logical_or.at(t1, lab, _member(coords, X1))
        np.logical_or.at(t2, lab, _member(coords, X2))
        if np.any(t1 & t2):
            return 0
        a1 = np.full(n, big, dtype=np.int64)
        a2 = np.full(n, big, dtype=np.int64)
        np.minimum.at(a1, lab, _dist_to(coords, E1))
        np.minimum.at(a2, lab, _dist_to(coords, E2))
        thr = np.where(t1, a2, np.where(t2, a1, np.maximum(a1, a2)))
        ks.append(int(thr.min()))
    return max(0, min(ks))


def quality(inp, s, check=True):
    """Sup of delta such that radius delta*s balls keep the two sides apart.

    Balls are l-infinity balls centred at lattice points, so the side sets
    only change when delta*s crosses an integer; the supremum is k/s where
    k is the failure radius, capped at 1.
    """
    if check:
        check_initial(inp)
    k = failure_radius(inp, s)
    return min(1.0, k / s)


def quality_by_search(inp, s):
    """Quality computed by testing every grid radius directly (reference route)."""
    c = inp.center
    p1 = [stop_at(w, s, c) for w in inp.walks1]
    p2 = [stop_at(w, s, c) for w in inp.walks2]
    lists = inp.vertex_lists()

    def side(V, paths, k):
        parts = [_as_array(V)] + paths
        for p in paths:
            e = p[-1]
            parts.append(box((int(e[0]), int(e[1])), k).points)
        return np.unique(np.vstack(parts), axis=0)

    def ok(k):
        A1, A2 = side(inp.V1, p1, k), side(inp.V2, p2, k)
        if np.any(_member(A1, A2)):
            return False
        for L in lists:
            if np.any(_member(L, A1)) and np.any(_member(L, A2)):
                return False
        # chains of loops: merge via hull iteration
        reach = A1
        changed = True
        used = np.zeros(len(lists), dtype=bool)
        while changed:
            changed = False
            for i, L in enumerate(lists):
                if not used[i] and np.any(_member(L, reach)):
                    used[i] = True
                    reach = np.unique(np.vstack([reach, L]), axis=0)
                    changed = True
        return not np.any(_member(reach, A2))

    best = None
    for k in range(0, s + 1):
        if ok(k):
            best = k
        else:
            break
    if best is None:
        return 0.0
    return 1.0 if best == s else (best + 1) / s


def _fill_hits(curves, balls, U):
    """Does U meet the fill of the union of curves and solid balls?"""
    pts = [np.asarray(c) for c in curves if len(c)]
    for e, k in balls:
        pts.append(np.array([[e[0] - k, e[1] - k], [e[0] + k, e[1] + k]]))
    allv = np.vstack(pts)
    lo = 2 * allv.min(axis=0) - 2
    hi = 2 * allv.max(axis=0) + 2
    blocked = np.zeros((hi[0] - lo[0] + 1, hi[1] - lo[1] + 1), dtype=bool)
    for cv in curves:
        if not len(cv):
            continue
        cv = np.asarray(cv)
        blocked[2 * cv[:, 0] - lo[0], 2 * cv[:, 1] - lo[1]] = True
        if len(cv) > 1:
            mid = cv[1:] + cv[:-1]
            blocked[mid[:, 0] - lo[0], mid[:, 1] - lo[1]] = True
    for e, k in balls:
        blocked[2 * (e[0] - k) - lo[0]:2 * (e[0] + k) - lo[0] + 1,
                2 * (e[1] - k) - lo[1]:2 * (e[1] + k) - lo[1] + 1] = True
    out = _kernels.flood_outside(blocked)
    U = _as_array(U)
    a, b = 2 * U[:, 0] - lo[0], 2 * U[:, 1] - lo[1]
    inside = (a >= 0) & (b >= 0) & (a < out.shape[0]) & (b < out.shape[1])
    return bool(np.any(~out[a[inside], b[inside]]))


def disconnection_quality(initial, U, walks, outer, s, frontier=True, center=(0, 0)):
    """One-packet quality: largest k/s with U outside the fill of the side-1 hull."""
    paths = [stop_at(w, s, center) for w in walks]
    E = np.array([p[-1] for p in paths])
    inp = QualityInput(initial, np.zeros((0, 2), dtype=np.int64), np.zeros((0, 2), dtype=np.int64),
                       walks, walks, outer, 0, s, frontier, center)
    lists = inp.vertex_lists()
    coords, lab, n = _clusters_of(lists)
    closed = []
    c0, o0 = initial.packed()
    for a, b in zip(o0[:-1], o0[1:]):
        closed.append(np.vstack([c0[a:b], c0[a:a + 1]]))
    if len(outer):
        for F in _frontier_curves(outer, frontier):
            closed.append(F)
    # cluster membership of the closed curves follows the same loop order as vertex_lists
    curve_cluster = None
    if n:
        offs = np.concatenate([[0], np.cumsum([len(p) for p in lists])])
        curve_cluster = lab[offs[:-1]]

    def bad(k):
        side = np.vstack(paths + [box((int(e[0]), int(e[1])), k).points for e in E])
        curves = list(paths)
        if n:
            hit = np.zeros(n, dtype=bool)
            np.logical_or.at(hit, lab, _member(coords, side))
            for i, cl in enumerate(curve_cluster):
                if hit[cl]:
                    curves.append(closed[i])
        return _fill_hits(curves, [(tuple(e), k) for e in E], U)

    if bad(0):
        return 0.0
    lo, hi = 0, s + 1  # bad(lo) false
    if not bad(s):
        return 1.0
    hi = s
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bad(mid):
            hi = mid
        else:
            lo = mid
    return min(1.0, hi / s)


def _frontier_curves(outer, frontier):
    from .lattice import _edge_set, _trace_outer

    C = ClusterSet(outer)
    out = []
    for k in range(C.n_loops_total):
        cyc = C.loop_vertices(k)
        if frontier:
            adj = _edge_set([cyc])
            out.append(np.asarray(_trace_outer(adj, min(adj))))
        else:
            out.append(cyc)
    return out


def separation_trial(r, R, alpha, rng, soup=None, frontier=True):
    """Q(R) for two walks from (r, 0) and (-r, 0) in a soup on D (None: no soup)."""
    z1, z2 = (r, 0), (-r, 0)
    w1 = walk_to_sphere(z1, R, rng)
    w2 = walk_to_sphere(z2, R, rng)
    empty = LoopConfig.from_packed(box((0, 0), R), np.zeros((0, 2), dtype=np.int64), np.zeros(1, dtype=np.int64))
    if soup is None:
        initial, outer = empty, empty
    else:
        Br = box((0, 0), r)
        initial = soup.restrict(Br)
        coords, offsets = soup.packed()
        from .loops import _inside_flags, _select

        inside = _inside_flags(coords, offsets, Br)
        outer = _select(soup, ~inside, soup.domain)
    inp = QualityInput(initial, np.array([z1]), np.array([z2]), [w1], [w2], outer, r, R, frontier)
    try:
        check_initial(inp)
    except ValueError:
        return None
    return quality(inp, R, check=False)


def separation_experiment(r, R, alpha, trials, seed, frontier=True, threshold=0.1):
    """Estimate P(Q(R) > threshold | Q(R) > 0) by rejection."""
    from .driver.stats import clopper_pearson
    from .sampler import SoupSpec, sample_batch

    if trials < 1:
        raise ValueError("trials must be positive")
    if R < 2 * r:
        raise ValueError("need R >= 2r")
    rng = np.random.default_rng(np.random.SeedSequence([seed, r, R, 7]))
    soups = None
    if alpha > 0:
        soups = sample_batch(SoupSpec(box((0, 0), 2 * R), alpha, rng_seed=seed), trials, stream=r * 1000 + R)
    n_pos = 0
    n_good = 0
    for _ in range(trials):
        soup = next(soups) if soups is not None else None
        q = separation_trial(r, R, alpha, rng, soup, frontier)
        if q is None or q <= 0:
            continue
        n_pos += 1
        if q > threshold:
            n_good += 1
    res = {"r": r, "R": R, "alpha": alpha, "trials": trials, "conditioned": n_pos, "successes": n_good}
    if n_pos == 0:
        res.update(p_hat=float("nan"), ci_lo=0.0, ci_hi=1.0, flag="insufficient conditioning mass")
    else:
        lo, hi = clopper_pearson(n_good, n_pos)
        res.update(p_hat=n_good / n_pos, ci_lo=lo, ci_hi=hi, flag="")
    return res
