"""Exact Poisson sampling of the random walk loop soup on a finite domain.

Loops are grouped by the first vertex of a fixed ordering that they visit.
With D_i the domain minus the first i-1 vertices, loops whose first vertex is
x_i have total mass log G_{D_i}(x_i, x_i); each is a logarithmic number of
excursions from x_i inside D_i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import VertexSet
from .loops import LatticePath, LoopConfig, unroot
from .greens import build_green, downdate, nested_diagonals, scan_order, return_and_hitting, DEFAULT_CAP
from . import _kernels


@dataclass(frozen=True)
class SoupSpec:
    domain: VertexSet
    alpha: float
    vertex_order: object = None
    rng_seed: int = 0
    allow_supercritical: bool = False

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.alpha > 0.5 and not self.allow_supercritical:
            raise ValueError("alpha > 1/2 is outside the supported regime (set allow_supercritical)")
        if self.vertex_order is not None:
            order = np.asarray(self.vertex_order, dtype=np.int64).reshape(-1, 2)
            if len(order) != len(self.domain) or VertexSet(order) != self.domain:
                raise ValueError("vertex_order must be a permutation of the domain")

    def order(self):
        if self.vertex_order is None:
            return scan_order(self.domain)
        return np.asarray(self.vertex_order, dtype=np.int64).reshape(-1, 2)


def trial_seed(master, trial, stream=0):
    """32-bit seed for one trial, derived from (master, stream, trial)."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, int(stream), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def random_order(D, seed):
    rng = np.random.default_rng(seed)
    return D.points[rng.permutation(len(D))]


def total_loop_mass(D, order=None):
    if not len(D):
        return 0.0
    return float(np.log(nested_diagonals(D, order)).sum())


class _Prepared:
    """Per-domain tables for the compiled sampler."""

    def __init__(self, D, order):
        self.domain = D
        self.order = order
        g = nested_diagonals(D, order)
        self.masses = np.log(g)
        self.cum = np.cumsum(self.masses)
        self.rvals = 1.0 - 1.0 / g
        x0, y0, x1, y1 = D.bbox
        self.x0, self.y0 = x0, y0
        self.H = y1 - y0 + 3
        W = x1 - x0 + 3
        self.ncells = W * self.H
        self.rank = np.full(self.ncells, -1, dtype=np.int64)
        self.order_cells = self.cell(order)
        self.rank[self.order_cells] = np.arange(len(order))

    @property
    def total(self):
        return float(self.cum[-1]) if len(self.cum) else 0.0

    def cell(self, pts):
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, 2)
        return (pts[:, 0] - self.x0 + 1) * self.H + (pts[:, 1] - self.y0 + 1)

    def coords(self, cells):
        return np.stack([cells // self.H - 1 + self.x0, cells % self.H - 1 + self.y0], axis=1)


_CACHE = {}
_CACHE_MAX = 8


def prepared(spec):
    order = spec.order()
    key = (spec.domain.key(), order.tobytes())
    p = _CACHE.get(key)
    if p is None:
        if len(_CACHE) >= _CACHE_MAX:
            _CACHE.pop(next(iter(_CACHE)))
        p = _Prepared(spec.domain, order)
        _CACHE[key] = p
    return p


def _truncate(config, L):
    if L is None:
        return config
    coords, offsets = config.packed()
    keep = np.diff(offsets) <= L
    from .loops import _select

    return _select(config, keep, config.domain)


def sample_loop_soup(spec, trial=0, method="fast", truncate=None, stream=0):
    """One soup configuration for the given trial index.

    method="fast" uses the compiled sampler; method="exact" runs the
    reference algorithm with dense Green tables and h-transformed excursions.
    truncate drops loops longer than the given length.
    """
    seed = trial_seed(spec.rng_seed, trial, stream)
    if method == "exact":
        cfg = exact_sample(spec, np.random.default_rng(seed))
        return _truncate(cfg, truncate)
    if method != "fast":
        raise ValueError(f"unknown method {method!r}")
    p = prepared(spec)
    if not len(p.cum) or p.total == 0.0:
        return LoopConfig.from_packed(spec.domain, np.zeros((0, 2), dtype=np.int64), np.zeros(1, dtype=np.int64))
    cells, offs, _ = _kernels.soup_trial(seed, spec.alpha, p.cum, p.rvals, p.order_cells, p.rank, p.H)
    cfg = LoopConfig.from_packed(spec.domain, p.coords(cells), offs)
    return _truncate(cfg, truncate)


def sample_batch(spec, trials, stream=0, start=0, chunk=256, truncate=None):
    """Yield configurations for trials start .. start+trials-1 in order."""
    p = prepared(spec)
    empty = p.total == 0.0
    t = start
    end = start + trials
    while t < end:
        m = min(chunk, end - t)
        seeds = np.array([trial_seed(spec.rng_seed, k, stream) for k in range(t, t + m)], dtype=np.int64)
        if empty:
            for _ in range(m):
                yield LoopConfig.from_packed(spec.domain, np.zeros((0, 2), dtype=np.int64), np.zeros(1, dtype=np.int64))
        else:
            cells, offs, tr = _kernels.soup_batch(seeds, spec.alpha, p.cum, p.rvals, p.order_cells, p.rank, p.H)
            xy = p.coords(cells)
            for j in range(m):
                a, b = tr[j], tr[j + 1]
                o = offs[a:b + 1]
                cfg = LoopConfig.from_packed(spec.domain, xy[o[0]:o[-1]], o - o[0])
                yield _truncate(cfg, truncate)
        t += m


def sample_logarithmic(r, rng):
    """Positive integer v with P(v) = r^v / (v * -log(1-r))."""
    if not 0 < r < 1:
        raise ValueError(f"r={r} outside (0, 1)")
    return int(rng.logseries(r))


def logarithmic_pmf(v, r):
    return r ** v / (v * -math.log1p(-r))


def logarithmic_mean(r):
    return r / ((1 - r) * -math.log1p(-r))


_NB = ((1, 0), (-1, 0), (0, 1), (0, -1))


def sample_excursion(G, x, rng):
    """Walk from x back to x inside G's domain, conditioned to return before exiting."""
    x = tuple(x)
    r, h = return_and_hitting(G, x)
    if r <= 0:
        raise ValueError("no excursion exists")
    path = [x]
    y = x
    while True:
        nbrs = [(y[0] + dx, y[1] + dy) for dx, dy in _NB]
        w = np.array([0.25 * h.get(z, 0.0) for z in nbrs])
        w /= w.sum()
        z = nbrs[rng.choice(4, p=w)]
        path.append(z)
        if z == x:
            return LatticePath(path)
        y = z


def exact_sample(spec, rng, cap=DEFAULT_CAP):
    """Reference sampler: successive Green downdates, one stage per vertex."""
    D = spec.domain
    order = [tuple(v) for v in spec.order().tolist()]
    if len(D) == 0:
        return LoopConfig({}, D)
    G = build_green(D, cap)
    loops = []
    for x in order:
        gxx = G(x, x)
        mass = math.log(gxx)
        if mass > 0:
            n = rng.poisson(spec.alpha * mass)
            r = 1.0 - 1.0 / gxx
            for _ in range(n):
                v = sample_logarithmic(r, rng)
                verts = [x]
                for _ in range(v):
                    verts.extend(sample_excursion(G, x, rng).vertices[1:])
                loops.append(unroot(verts))
        if len(G) > 1:
            G = downdate(G, x)
    return LoopConfig.from_loops(loops, D)
