"""Compiled inner loops.

Grids here are padded rasters: a vertex (x, y) of a domain with bounding box
(x0, y0, x1, y1) lives at cell (x - x0 + 1) * H + (y - y0 + 1) with
H = y1 - y0 + 3, so the four neighbours are at offsets +-H and +-1 and the
one-cell margin is never part of the domain.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _grow(a, n):
    b = np.empty(max(2 * len(a), n), dtype=a.dtype)
    b[:len(a)] = a
    return b


@njit(cache=True)
def _log_series(r):
    # inversion of P(v) = r^v / (v * -log(1-r))
    u = np.random.random()
    p = r / (-math.log1p(-r))
    cdf = p
    k = 1
    while u > cdf and p > 0.0:
        p *= r * k / (k + 1.0)
        k += 1
        cdf += p
    return k


@njit(cache=True)
def soup_trial(seed, alpha, cum, rvals, order_cells, rank, H):
    """One Poisson loop soup as (cells, offsets, stage of each loop).

    cum is the cumulative loop mass by stage; a loop at stage i is v
    excursions from order_cells[i] avoiding every cell of rank < i, v drawn
    from the logarithmic law with parameter rvals[i].  Excursions are drawn
    by running the plain walk and discarding attempts that get killed.
    """
    np.random.seed(seed)
    n = len(cum)
    total = cum[n - 1] if n else 0.0
    nloops = np.random.poisson(alpha * total) if total > 0 else 0
    stages = np.empty(nloops, dtype=np.int64)
    for k in range(nloops):
        u = np.random.random() * total
        stages[k] = np.searchsorted(cum, u, side="right")
        if stages[k] >= n:
            stages[k] = n - 1
    stages.sort()
    nb = (H, -H, 1, -1)
    cells = np.empty(64, dtype=np.int64)
    offsets = np.empty(nloops + 1, dtype=np.int64)
    offsets[0] = 0
    pos = 0
    for k in range(nloops):
        i = stages[k]
        c0 = order_cells[i]
        v = _log_series(rvals[i])
        for _ in range(v):
            while True:
                start = pos
                if pos + 1 > len(cells):
                    cells = _grow(cells, pos + 1)
                cells[pos] = c0
                pos += 1
                c = c0
                bits = 0
                nbits = 0
                ok = False
                while True:
                    if nbits == 0:
                        bits = np.random.randint(0, 1 << 30)
                        nbits = 15
                    c += nb[bits & 3]
                    bits >>= 2
                    nbits -= 1
                    if c == c0:
                        ok = True
                        break
                    if rank[c] < i:
                        break
                    if pos + 1 > len(cells):
                        cells = _grow(cells, pos + 1)
                    cells[pos] = c
                    pos += 1
                if ok:
                    break
                pos = start
        offsets[k + 1] = pos
    return cells[:pos].copy(), offsets, stages


@njit(cache=True)
def soup_batch(seeds, alpha, cum, rvals, order_cells, rank, H):
    """Several trials; returns flat cells, loop offsets and per-trial loop offsets."""
    allc = np.empty(1024, dtype=np.int64)
    allo = np.empty(64, dtype=np.int64)
    allo[0] = 0
    tr = np.empty(len(seeds) + 1, dtype=np.int64)
    tr[0] = 0
    nc = 0
    nl = 0
    for t in range(len(seeds)):
        cells, offs, _ = soup_trial(seeds[t], alpha, cum, rvals, order_cells, rank, H)
        m = len(offs) - 1
        if nc + len(cells) > len(allc):
            allc = _grow(allc, nc + len(cells))
        allc[nc:nc + len(cells)] = cells
        if nl + m + 1 > len(allo):
            allo = _grow(allo, nl + m + 1)
        for k in range(m):
            allo[nl + 1 + k] = nc + offs[k + 1]
        nc += len(cells)
        nl += m
        tr[t + 1] = nl
    return allc[:nc].copy(), allo[:nl + 1].copy(), tr


@njit(cache=True)
def _walk_to_sphere(r, R, stamp, V, EH, EV, path, record):
    """Walk from (r, 0) until |w|_inf = R, stamping vertices and edges."""
    x = r
    y = 0
    V[x + R, y + R] = stamp
    n = 0
    if record:
        path[0, 0] = x
        path[0, 1] = y
    n = 1
    bits = 0
    nbits = 0
    while True:
        if nbits == 0:
            bits = np.random.randint(0, 1 << 30)
            nbits = 15
        d = bits & 3
        bits >>= 2
        nbits -= 1
        if d == 0:
            EH[x + R, y + R] = stamp
            x += 1
        elif d == 1:
            EH[x - 1 + R, y + R] = stamp
            x -= 1
        elif d == 2:
            EV[x + R, y + R] = stamp
            y += 1
        else:
            EV[x + R, y - 1 + R] = stamp
            y -= 1
        V[x + R, y + R] = stamp
        if record:
            if n >= path.shape[0]:
                return n, path, False
            path[n, 0] = x
            path[n, 1] = y
        n += 1
        if x == R or x == -R or y == R or y == -R:
            return n, path, True


@njit(cache=True)
def _escapes(r, R, stamp, V, EH, EV, S, queue):
    """Is some vertex of B_r outside the fill of the stamped trace?

    Flood over unit squares, crossing only edges not stamped, starting from
    squares next to unvisited vertices of B_r; reaching the outer ring of
    squares means reaching the unbounded face.
    """
    m = 2 * R
    qn = 0
    for x in range(-r, r + 1):
        for y in range(-r, r + 1):
            if V[x + R, y + R] != stamp:
                i = x + R
                j = y + R
                if S[i, j] != stamp:
                    S[i, j] = stamp
                    queue[qn, 0] = i
                    queue[qn, 1] = j
                    qn += 1
    head = 0
    while head < qn:
        i = queue[head, 0]
        j = queue[head, 1]
        head += 1
        if i == 0 or j == 0 or i == m - 1 or j == m - 1:
            return True
        # square (i, j) has corners (i, j) .. (i + 1, j + 1) in shifted vertex coordinates
        if EV[i + 1, j] != stamp and S[i + 1, j] != stamp:
            S[i + 1, j] = stamp
            queue[qn, 0] = i + 1
            queue[qn, 1] = j
            qn += 1
        if EV[i, j] != stamp and S[i - 1, j] != stamp:
            S[i - 1, j] = stamp
            queue[qn, 0] = i - 1
            queue[qn, 1] = j
            qn += 1
        if EH[i, j + 1] != stamp and S[i, j + 1] != stamp:
            S[i, j + 1] = stamp
            queue[qn, 0] = i
            queue[qn, 1] = j + 1
            qn += 1
        if EH[i, j] != stamp and S[i, j - 1] != stamp:
            S[i, j - 1] = stamp
            queue[qn, 0] = i
            queue[qn, 1] = j - 1
            qn += 1
    return False


@njit(cache=True)
def nondisc_count(r, R, trials, seed):
    np.random.seed(seed)
    w = 2 * R + 1
    V = np.zeros((w, w), dtype=np.int32)
    EH = np.zeros((w, w), dtype=np.int32)
    EV = np.zeros((w, w), dtype=np.int32)
    S = np.zeros((w, w), dtype=np.int32)
    queue = np.empty((w * w, 2), dtype=np.int32)
    path = np.empty((1, 2), dtype=np.int64)
    k = 0
    for t in range(trials):
        stamp = t + 1
        _walk_to_sphere(r, R, stamp, V, EH, EV, path, False)
        if _escapes(r, R, stamp, V, EH, EV, S, queue):
            k += 1
    return k


@njit(cache=True)
def nondisc_single(r, R, seed, maxlen):
    """One walk with its trace, for cross-checking the flood against the raster fill."""
    np.random.seed(seed)
    w = 2 * R + 1
    V = np.zeros((w, w), dtype=np.int32)
    EH = np.zeros((w, w), dtype=np.int32)
    EV = np.zeros((w, w), dtype=np.int32)
    S = np.zeros((w, w), dtype=np.int32)
    queue = np.empty((w * w, 2), dtype=np.int32)
    path = np.empty((maxlen, 2), dtype=np.int64)
    n, path, done = _walk_to_sphere(r, R, 1, V, EH, EV, path, True)
    if not done:
        return path[:0], False
    return path[:n], _escapes(r, R, 1, V, EH, EV, S, queue)


@njit(cache=True)
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit(cache=True)
def cluster_labels(cells, offsets, ncells):
    """Union-find over loops sharing a cell; labels are root loop indices."""
    m = len(offsets) - 1
    parent = np.arange(m)
    owner = np.full(ncells, -1, dtype=np.int64)
    merges = 0
    for k in range(m):
        for p in range(offsets[k], offsets[k + 1]):
            c = cells[p]
            o = owner[c]
            if o < 0:
                owner[c] = k
            else:
                a = _find(parent, o)
                b = _find(parent, k)
                if a != b:
                    if a < b:
                        parent[b] = a
                    else:
                        parent[a] = b
                    merges += 1
    out = np.empty(m, dtype=np.int64)
    for k in range(m):
        out[k] = _find(parent, k)
    return out, merges


@njit(cache=True)
def cluster_extent(xs, ys, offsets, labels, cx, cy):
    """Per loop-root: min/max of |v - c|_inf and the bounding box over the cluster."""
    m = len(offsets) - 1
    mn = np.full(m, 1 << 40, dtype=np.int64)
    mx = np.full(m, -1, dtype=np.int64)
    bb = np.empty((m, 4), dtype=np.int64)
    for k in range(m):
        bb[k, 0] = 1 << 40
        bb[k, 1] = 1 << 40
        bb[k, 2] = -(1 << 40)
        bb[k, 3] = -(1 << 40)
    for k in range(m):
        c = labels[k]
        for p in range(offsets[k], offsets[k + 1]):
            d = max(abs(xs[p] - cx), abs(ys[p] - cy))
            if d < mn[c]:
                mn[c] = d
            if d > mx[c]:
                mx[c] = d
            if xs[p] < bb[c, 0]:
                bb[c, 0] = xs[p]
            if ys[p] < bb[c, 1]:
                bb[c, 1] = ys[p]
            if xs[p] > bb[c, 2]:
                bb[c, 2] = xs[p]
            if ys[p] > bb[c, 3]:
                bb[c, 3] = ys[p]
    return mn, mx, bb


@njit(cache=True)
def raster_cycles(xs, ys, offsets, sel, ox, oy, W, Hh):
    """Blocked doubled-grid raster of the closed loops listed in sel."""
    g = np.zeros((W, Hh), dtype=np.bool_)
    for s in range(len(sel)):
        k = sel[s]
        a = offsets[k]
        b = offsets[k + 1]
        for p in range(a, b):
            q = p + 1 if p + 1 < b else a
            g[2 * xs[p] - ox, 2 * ys[p] - oy] = True
            g[xs[p] + xs[q] - ox, ys[p] + ys[q] - oy] = True
    return g


@njit(cache=True)
def flood_outside(blocked):
    """4-connected component of cell (0, 0) among unblocked cells."""
    W, Hh = blocked.shape
    out = np.zeros((W, Hh), dtype=np.bool_)
    q = np.empty((W * Hh, 2), dtype=np.int32)
    out[0, 0] = True
    q[0, 0] = 0
    q[0, 1] = 0
    qn = 1
    head = 0
    while head < qn:
        i = q[head, 0]
        j = q[head, 1]
        head += 1
        if i > 0 and not out[i - 1, j] and not blocked[i - 1, j]:
            out[i - 1, j] = True
            q[qn, 0] = i - 1
            q[qn, 1] = j
            qn += 1
        if i < W - 1 and not out[i + 1, j] and not blocked[i + 1, j]:
            out[i + 1, j] = True
            q[qn, 0] = i + 1
            q[qn, 1] = j
            qn += 1
        if j > 0 and not out[i, j - 1] and not blocked[i, j - 1]:
            out[i, j - 1] = True
            q[qn, 0] = i
            q[qn, 1] = j - 1
            qn += 1
        if j < Hh - 1 and not out[i, j + 1] and not blocked[i, j + 1]:
            out[i, j + 1] = True
            q[qn, 0] = i
            q[qn, 1] = j + 1
            qn += 1
    return out
