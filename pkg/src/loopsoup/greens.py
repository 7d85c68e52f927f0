"""Green's functions of the simple random walk killed on leaving a finite set."""
from __future__ import annotations

import hashlib
import math
import struct
from collections import namedtuple

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from .lattice import VertexSet, box
from . import _kernels

DEFAULT_CAP = 6000

LogFit = namedtuple("LogFit", "slope intercept slope_stderr intercept_extrapolated values")


def transition_matrix(D, order=None):
    """Sparse killed one-step kernel P_D (entries 1/4 on domain edges)."""
    pts = D.points if order is None else np.asarray(order, dtype=np.int64)
    idx = {v: i for i, v in enumerate(map(tuple, pts.tolist()))}
    rows, cols = [], []
    for i, (x, y) in enumerate(pts.tolist()):
        for dx, dy in ((1, 0), (0, 1)):
            j = idx.get((x + dx, y + dy))
            if j is not None:
                rows += [i, j]
                cols += [j, i]
    n = len(pts)
    return sparse.csr_matrix((np.full(len(rows), 0.25), (rows, cols)), shape=(n, n))


class GreenTable:
    """Dense Green's function on a domain; rows follow ``domain.points``."""

    def __init__(self, domain, values):
        self.domain = domain
        self.values = values
        self.values.setflags(write=False)

    @property
    def index(self):
        return self.domain.index

    def __call__(self, u, v):
        idx = self.index
        if u not in idx or v not in idx:
            return 0.0
        return float(self.values[idx[u], idx[v]])

    def column(self, v):
        return self.values[:, self.index[v]]

    def __len__(self):
        return len(self.domain)

    def residual(self):
        M = np.eye(len(self.domain)) - transition_matrix(self.domain).toarray()
        return float(np.abs(M @ self.values - np.eye(len(self.domain))).max()) if len(self.domain) else 0.0

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(struct.pack("<q", len(self.domain)))
            fh.write(self.domain.points.astype("<i8").tobytes())
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            (n,) = struct.unpack("<q", fh.read(8))
            pts = np.frombuffer(fh.read(16 * n), dtype="<i8").reshape(n, 2)
            vals = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n).copy()
        D = VertexSet(pts)
        if not np.array_equal(D.points, pts):
            raise ValueError("cache vertex list is not in canonical order")
        return cls(D, vals)


def domain_hash(D):
    return hashlib.sha256(D.key().encode()).hexdigest()[:16]


def build_green(D, cap=DEFAULT_CAP):
    n = len(D)
    if n == 0:
        raise ValueError("empty domain")
    if n > cap:
        raise MemoryError(f"domain has {n} vertices, above the exact-mode cap {cap}")
    M = np.eye(n) - transition_matrix(D).toarray()
    c = linalg.cho_factor(M)
    G = linalg.cho_solve(c, np.eye(n))
    G = 0.5 * (G + G.T)
    return GreenTable(D, G)


def cached_green(D, cache_dir, cap=DEFAULT_CAP):
    import os

    path = os.path.join(cache_dir, f"green_{domain_hash(D)}.bin")
    if os.path.exists(path):
        T = GreenTable.load(path)
        if T.domain == D:
            return T
    T = build_green(D, cap)
    os.makedirs(cache_dir, exist_ok=True)
    T.save(path)
    return T


def downdate(G, y):
    idx = G.index
    if y not in idx:
        raise KeyError(f"{y} is not in the domain")
    k = idx[y]
    col = G.values[:, k]
    V = G.values - np.outer(col, col) / col[k]
    keep = np.ones(len(G.domain), dtype=bool)
    keep[k] = False
    return GreenTable(VertexSet(G.domain.points[keep]), np.ascontiguousarray(V[np.ix_(keep, keep)]))


def return_and_hitting(G, x):
    """Return probability to x and the hitting probabilities of x."""
    col = G.column(x)
    gxx = col[G.index[x]]
    r = 1.0 - 1.0 / gxx
    h = {v: float(c / gxx) for v, c in zip(G.domain, col)}
    return r, h


def hit_value(h, z):
    return h.get(tuple(z), 0.0)


def green_at(D, x):
    """G_D(x, x) by a sparse single-column solve."""
    idx = D.index
    M = sparse.identity(len(D), format="csc") - transition_matrix(D).tocsc()
    e = np.zeros(len(D))
    e[idx[tuple(x)]] = 1.0
    g = splinalg.spsolve(M, e)
    return float(g[idx[tuple(x)]])


def green_log_fit(n_list):
    """Fit G_{B_n}(0,0) = slope * log n + intercept + b / n by least squares.

    The 1/n term absorbs the leading finite-size correction; with two sizes
    only the straight line through both points is returned.  The slope
    stderr is infinite when the fit has no residual degrees of freedom.
    intercept_extrapolated is the constant from the two largest sizes when
    they differ by a factor 2, with the 1/n term eliminated.
    """
    n_list = list(n_list)
    if len(n_list) < 2 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("need an increasing list of at least two sizes")
    vals = np.array([green_at(box((0, 0), n), (0, 0)) for n in n_list])
    ns = np.array(n_list, dtype=float)
    X = np.log(ns)
    cols = [X, np.ones_like(X)] + ([1.0 / ns] if len(n_list) > 2 else [])
    A = np.vstack(cols).T
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    slope, icept = coef[0], coef[1]
    dof = len(n_list) - A.shape[1]
    if dof > 0:
        resid = vals - A @ coef
        s2 = resid @ resid / dof
        se = math.sqrt(s2 * np.linalg.inv(A.T @ A)[0, 0])
    else:
        se = math.inf
    c = vals - 2.0 / math.pi * X
    extrap = float(c[-1])
    if n_list[-1] == 2 * n_list[-2]:
        extrap = float(2 * c[-1] - c[-2])
    return LogFit(float(slope), float(icept), se, extrap, vals)


def scan_order(D):
    """Column-by-column snake order of a vertex set."""
    pts = D.points
    xs = pts[:, 0]
    ys = np.where((xs - xs.min()) % 2 == 0, pts[:, 1], -pts[:, 1])
    return pts[np.lexsort((ys, xs))]


def nested_diagonals(D, order=None):
    """G_{D_i}(x_i, x_i) for D_i = D minus the first i-1 vertices of the order.

    Cholesky of I - P_D with the order reversed gives these as 1/L_jj^2.  For
    banded orders (the default snake) the banded factorization is used.
    """
    order = scan_order(D) if order is None else np.asarray(order, dtype=np.int64)
    n = len(order)
    if n == 0:
        return np.zeros(0)
    rev = order[::-1]
    P = transition_matrix(D, rev).tocoo()
    bw = int(np.abs(P.row - P.col).max()) if P.nnz else 0
    if bw and (bw + 1) ** 2 * n < n ** 3 / 3:
        ab = np.zeros((bw + 1, n))
        ab[0, :] = 1.0
        lower = P.row > P.col
        ab[P.row[lower] - P.col[lower], P.col[lower]] = -0.25
        L = linalg.cholesky_banded(ab, lower=True)
        piv = L[0]
    else:
        M = np.eye(n) - P.toarray()
        L = linalg.cholesky(M, lower=True)
        piv = np.diag(L)
    return (1.0 / piv ** 2)[::-1].copy()


def nondisconnection_walks(r, R, trials, seed):
    """Number of walks from (r, 0) to the sphere of radius R that leave B_r connected to infinity."""
    if not 1 <= r < R:
        raise ValueError("need 1 <= r < R")
    if trials < 1:
        raise ValueError("trials must be positive")
    return int(_kernels.nondisc_count(r, R, trials, seed))


def nondisconnection_estimate(r, R, trials, seed):
    from .driver.stats import clopper_pearson

    k = nondisconnection_walks(r, R, trials, seed)
    lo, hi = clopper_pearson(k, trials)
    return k / trials, (lo, hi)
