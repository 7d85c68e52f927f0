"""Exact small-domain references: loop catalogs, log-determinants, tail bounds,
interval-valued event probabilities, and Palm / FKG checks."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import linalg

from .greens import transition_matrix
from .loops import LoopConfig, unroot, nu_weight_exact


class BudgetExceeded(RuntimeError):
    def __init__(self, msg, partial):
        super().__init__(msg)
        self.partial = partial


@dataclass
class LoopCatalog:
    domain: object
    max_len: int
    loops: list  # (UnrootedLoop, Fraction)
    enumerated_mass: Fraction
    tail_bound: float

    def weights(self):
        return {g: w for g, w in self.loops}

    def to_jsonl(self):
        import json

        lines = []
        for g, w in self.loops:
            lines.append(json.dumps({"v": [list(v) for v in g.vertices()], "w": f"{w.numerator}/{w.denominator}"}))
        return "".join(s + "\n" for s in lines)


def enumerate_loops(D, max_len, budget=5_000_000):
    """All unrooted loops in D of length <= max_len, found from their smallest vertex."""
    verts = sorted(D)
    member = set(verts)
    found = {}
    steps = 0
    for root in verts:
        # depth-first over rooted loops at root that never visit a smaller vertex
        stack = [(root, [root])]
        while stack:
            v, path = stack.pop()
            n = len(path) - 1
            steps += 1
            if steps > budget:
                raise BudgetExceeded(f"enumeration budget exceeded after {len(found)} loops", len(found))
            if n >= 2 and v == root:
                g = unroot(path)
                if g not in found:
                    found[g] = nu_weight_exact(g)
            if n == max_len:
                continue
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                w = (v[0] + dx, v[1] + dy)
                if w not in member or w < root:
                    continue
                if abs(w[0] - root[0]) + abs(w[1] - root[1]) > max_len - n - 1:
                    continue
                stack.append((w, path + [w]))
    loops = sorted(found.items(), key=lambda kv: kv[0])
    mass = sum((w for _, w in loops), Fraction(0))
    return LoopCatalog(D, max_len, loops, mass, tail_bound(D, max_len) if len(D) else 0.0)


def brute_force_loops(D, max_len):
    """Unrooted loops found by filtering all 4^n step sequences from every vertex."""
    member = set(D)
    found = set()
    moves = ((1, 0), (-1, 0), (0, 1), (0, -1))
    for n in range(2, max_len + 1, 2):
        for root in D:
            for code in range(4 ** n):
                v = root
                path = [root]
                ok = True
                c = code
                for _ in range(n):
                    dx, dy = moves[c & 3]
                    c >>= 2
                    v = (v[0] + dx, v[1] + dy)
                    if v not in member:
                        ok = False
                        break
                    path.append(v)
                if ok and v == root:
                    found.add(unroot(path))
    return found


def trace_mass(D, max_len):
    """sum_{n <= max_len} tr(P_D^n) / n, the catalog mass computed spectrally."""
    P = transition_matrix(D).toarray()
    ev = np.linalg.eigvalsh(P)
    return float(sum((ev ** n).sum() / n for n in range(1, max_len + 1)))


def exact_total_mass(D):
    if not len(D):
        return 0.0
    M = np.eye(len(D)) - transition_matrix(D).toarray()
    c, _ = linalg.cho_factor(M, lower=True)
    return float(-2.0 * np.log(np.diag(c)).sum())


def spectral_radius_bound(D, iters=500):
    """Rigorous upper bound on the spectral radius of P_D (Collatz-Wielandt)."""
    P = transition_matrix(D)
    x = np.ones(len(D))
    for _ in range(iters):
        y = P @ x + 1e-300
        x = y / y.max()
    x = np.maximum(x, 1e-12)
    return float((P @ x / x).max())


def tail_bound(D, max_len):
    rho = spectral_radius_bound(D)
    L = max_len
    return len(D) * rho ** (L + 1) / ((L + 1) * (1 - rho))


def _poisson_configs(lams, eps, budget):
    """Sparse count vectors with prod lam^k/k! >= eps, as (weight, {index: count})."""
    out = [(1.0, {})]
    stack = [(0, 1.0, {})]
    n = len(lams)
    while stack:
        start, w, cfg = stack.pop()
        for i in range(start, n):
            wk = w
            for k in range(1, 64):
                wk *= lams[i] / k
                if wk < eps:
                    break
                c = dict(cfg)
                c[i] = k
                out.append((wk, c))
                if len(out) > budget:
                    raise BudgetExceeded("configuration budget exceeded", len(out))
                stack.append((i + 1, wk, c))
    return out


def exact_event_interval(D, alpha, event, max_len, floor=1e-4, eps=1e-6, budget=2_000_000, catalog=None,
                         whole_soup=False, depends_on=None):
    """Bracket P(event) for the soup on D.

    Loops of length <= max_len with alpha*nu >= floor are enumerated
    exactly, and their Poisson outcomes with probability >= eps are passed
    to event (as a LoopConfig).  By default the event is taken to read only
    loops of length <= max_len; with whole_soup=True it may depend on any
    loop and the longer loops are bracketed through the total mass.
    depends_on, if given, declares the only loops the event can see; the
    others are then irrelevant and are not enumerated.
    """
    cat = catalog if catalog is not None else enumerate_loops(D, max_len)
    if depends_on is not None:
        dep = set(depends_on)
        kept = [(g, w) for g, w in cat.loops if g in dep]
        if len(kept) != len(dep):
            raise ValueError("depends_on lists loops outside the catalog")
        cat = LoopCatalog(cat.domain, cat.max_len, kept, sum((w for _, w in kept), Fraction(0)), 0.0)
        whole_soup = False
    kept = [(g, w) for g, w in cat.loops if alpha * float(w) >= floor]
    lams = [alpha * float(w) for _, w in kept]
    kept_mass = sum((w for _, w in kept), Fraction(0))
    rest_up = float(cat.enumerated_mass - kept_mass)
    if whole_soup:
        exact_rest = exact_total_mass(D) - float(kept_mass)
        rest_up = min(exact_rest * (1 + 1e-9) + 1e-15, rest_up + cat.tail_bound)
    p0 = math.exp(-sum(lams))
    p_clean = math.exp(-alpha * rest_up)
    yes = no = 0.0
    for w, cfg in _poisson_configs(lams, eps / max(p0, 1e-300), budget):
        p = p0 * w
        L = LoopConfig({kept[i][0]: k for i, k in cfg.items()}, D)
        if event(L):
            yes += p
        else:
            no += p
    lo = yes * p_clean
    hi = 1.0 - no * p_clean
    flag = "cutoff too small" if hi - lo > 0.5 else ""
    return lo, hi, flag


def palm_check(D, alpha, F, Phi, trials, seed, stream=31):
    """Both sides of E sum_{g in L} F(g) Phi(L) = alpha * sum_g F(g) nu(g) E Phi(L + {g}).

    F is a dict UnrootedLoop -> value (its support); the right side uses the
    same soups for every adjoined loop.
    """
    from .sampler import SoupSpec, sample_batch

    support = [(g, float(v)) for g, v in F.items() if v]
    wts = [alpha * v * float(nu_weight_exact(g)) for g, v in support]
    lhs = np.empty(trials)
    rhs = np.empty(trials)
    spec = SoupSpec(D, alpha, rng_seed=seed)
    for t, L in enumerate(sample_batch(spec, trials, stream=stream)):
        counts = L.counts
        phi = Phi(L) if any(g in counts for g, _ in support) else None
        s = 0.0
        for g, v in support:
            n = counts.get(g, 0)
            if n:
                s += n * v * phi
        lhs[t] = s
        acc = 0.0
        for (g, v), w in zip(support, wts):
            acc += w * Phi(L.union(LoopConfig({g: 1}, D)))
        rhs[t] = acc
    a, b = lhs.mean(), rhs.mean()
    se = math.sqrt(lhs.var(ddof=1) / trials + rhs.var(ddof=1) / trials)
    return a, b, (abs(a - b) / se if se > 0 else (0.0 if a == b else math.inf))


def increasing_events(D, seed, n=20):
    """n pairs of increasing indicator functionals on configurations in D."""
    from .clusters import ClusterSet

    rng = np.random.default_rng(seed)
    verts = sorted(D)

    def visited(v):
        def f(L):
            return any(v in g.cycle for g in L.counts)
        f.__name__ = f"visited{v}"
        return f

    def at_least(k):
        def f(L):
            return len(L) >= k
        f.__name__ = f"count>={k}"
        return f

    def long_loop(m):
        def f(L):
            return any(g.length >= m for g in L.counts)
        f.__name__ = f"len>={m}"
        return f

    def connected(u, v):
        def f(L):
            if not len(L):
                return False
            C = ClusterSet(L)
            lab = {}
            for c in range(C.n):
                for p in map(tuple, C.coords(c).tolist()):
                    lab[p] = c
            return u in lab and v in lab and lab[u] == lab[v]
        f.__name__ = f"conn{u}{v}"
        return f

    def pick():
        kind = rng.integers(4)
        if kind == 0:
            return visited(verts[rng.integers(len(verts))])
        if kind == 1:
            return at_least(int(rng.integers(1, 4)))
        if kind == 2:
            return long_loop(int(rng.choice([4, 6, 8])))
        u = verts[rng.integers(len(verts))]
        v = (u[0] + 1, u[1]) if (u[0] + 1, u[1]) in D else (u[0] - 1, u[1])
        return connected(u, v)

    return [(pick(), pick()) for _ in range(n)]


def fkg_check(D, alpha, pairs, trials, seed, stream=41):
    """Per pair: (E fg, E f * E g, stderr of the covariance estimate)."""
    from .sampler import SoupSpec, sample_batch

    spec = SoupSpec(D, alpha, rng_seed=seed)
    vals = np.zeros((trials, len(pairs), 2), dtype=bool)
    for t, L in enumerate(sample_batch(spec, trials, stream=stream)):
        for j, (f, g) in enumerate(pairs):
            vals[t, j, 0] = f(L)
            vals[t, j, 1] = g(L)
    out = []
    for j in range(len(pairs)):
        f = vals[:, j, 0].astype(float)
        g = vals[:, j, 1].astype(float)
        efg = (f * g).mean()
        ef, eg = f.mean(), g.mean()
        # influence-function stderr of fg - f*g
        infl = f * g - eg * f - ef * g
        se = infl.std(ddof=1) / math.sqrt(trials)
        out.append((efg, ef * eg, se))
    return out
