"""Paths, rooted and unrooted loops, loop weights and loop configurations."""
from __future__ import annotations

import json
from fractions import Fraction

import numpy as np

from .lattice import VertexSet, check_path


def least_rotation(seq):
    """Index of the lexicographically least rotation (Booth's algorithm)."""
    n = len(seq)
    s = seq + seq
    f = [-1] * (2 * n)
    k = 0
    for j in range(1, 2 * n):
        sj = s[j]
        i = f[j - k - 1]
        while i != -1 and sj != s[k + i + 1]:
            if sj < s[k + i + 1]:
                k = j - i - 1
            i = f[i]
        if sj != s[k + i + 1]:
            if sj < s[k]:
                k = j
            f[j - k] = -1
        else:
            f[j - k] = i + 1
    return k


def _period(seq):
    """Smallest p dividing len(seq) with seq periodic of period p."""
    n = len(seq)
    for p in range(1, n + 1):
        if n % p == 0 and seq[p:] == seq[:-p]:
            return p
    return n


class LatticePath:
    __slots__ = ("vertices",)

    def __init__(self, vertices):
        check_path(vertices)
        self.vertices = tuple((int(x), int(y)) for x, y in vertices)

    def __len__(self):
        return len(self.vertices) - 1

    def __eq__(self, other):
        return isinstance(other, LatticePath) and self.vertices == other.vertices

    def __hash__(self):
        return hash(self.vertices)

    def __repr__(self):
        return f"LatticePath({list(self.vertices)})"

    def reversed(self):
        return type(self)(self.vertices[::-1])

    def concat(self, other):
        if self.vertices[-1] != other.vertices[0]:
            raise ValueError("paths do not join")
        return type(self)(self.vertices + other.vertices[1:])


class RootedLoop(LatticePath):
    __slots__ = ()

    def __init__(self, vertices):
        super().__init__(vertices)
        if len(self.vertices) < 3 or self.vertices[0] != self.vertices[-1]:
            raise ValueError("not a loop")

    @property
    def root(self):
        return self.vertices[0]

    def rotate(self, k):
        cyc = self.vertices[:-1]
        k %= len(cyc)
        cyc = cyc[k:] + cyc[:k]
        return RootedLoop(cyc + cyc[:1])


class UnrootedLoop:
    """Rotation class of a rooted loop, held by its least rotation."""

    __slots__ = ("cycle", "J", "_hash")

    def __init__(self, cycle, J=None):
        # cycle: vertex tuple without the repeated endpoint, already canonical
        self.cycle = cycle
        self.J = J if J is not None else len(cycle) // _period(cycle)
        self._hash = hash(cycle)

    @property
    def length(self):
        return len(self.cycle)

    def __len__(self):
        return len(self.cycle)

    @property
    def canonical(self):
        return RootedLoop(self.cycle + self.cycle[:1])

    def vertices(self):
        return self.cycle + self.cycle[:1]

    def vertex_set(self):
        return frozenset(self.cycle)

    def __eq__(self, other):
        return isinstance(other, UnrootedLoop) and self.cycle == other.cycle

    def __lt__(self, other):
        return (len(self.cycle), self.cycle) < (len(other.cycle), other.cycle)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"UnrootedLoop(len={len(self.cycle)}, J={self.J}, root={self.cycle[0]})"

    def reversed(self):
        return unroot(self.vertices()[::-1])

    def rooted_representatives(self):
        """Distinct rooted loops in the class; there are |loop|/J of them."""
        n = len(self.cycle) // self.J
        return [RootedLoop(self.cycle[k:] + self.cycle[:k] + self.cycle[k:k + 1]) for k in range(n)]

    def to_json(self, n=1):
        return json.dumps({"v": [list(v) for v in self.vertices()], "n": int(n)})


def unroot(loop):
    """Canonical unrooted loop of a rooted loop (or a closed vertex sequence)."""
    verts = loop.vertices if isinstance(loop, LatticePath) else loop
    verts = [tuple(int(c) for c in v) for v in verts]
    if len(verts) < 3 or verts[0] != verts[-1]:
        raise ValueError("not a loop")
    if not isinstance(loop, LatticePath):
        check_path(verts)
    cyc = verts[:-1]
    k = least_rotation(cyc)
    return UnrootedLoop(tuple(cyc[k:] + cyc[:k]))


def nu_weight(loop):
    return 4.0 ** (-loop.length) / loop.J


def nu_weight_exact(loop):
    return Fraction(1, 4 ** loop.length * loop.J)


def path_weight(path):
    n = len(path)
    if n < 1:
        raise ValueError("zero-length path has no weight")
    return 4.0 ** (-n)


def is_excursion(path, A):
    """True iff the path stays in A and both endpoints lie on the inner boundary of A."""
    from .lattice import inner_boundary

    if not all(v in A for v in path.vertices):
        return False
    bd = inner_boundary(A)
    return path.vertices[0] in bd and path.vertices[-1] in bd


class LoopConfig:
    """Multiset of unrooted loops living in a domain.

    Configurations coming from the sampler keep the loops in packed form
    (flat coordinate array plus offsets, one entry per loop copy) and only
    build the canonical count table when it is asked for.
    """

    def __init__(self, counts=None, domain=None, packed=None):
        self.domain = domain if domain is not None else VertexSet()
        self._counts = None
        self._packed = packed
        if counts is not None:
            c = {}
            for g, n in counts.items():
                if n < 0:
                    raise ValueError("negative multiplicity")
                if n:
                    c[g] = c.get(g, 0) + int(n)
            self._counts = c

    @classmethod
    def from_packed(cls, domain, coords, offsets):
        return cls(domain=domain, packed=(np.asarray(coords), np.asarray(offsets)))

    @classmethod
    def from_loops(cls, loops, domain=None):
        c = {}
        for g in loops:
            if not isinstance(g, UnrootedLoop):
                g = unroot(g)
            c[g] = c.get(g, 0) + 1
        if domain is None:
            domain = VertexSet([v for g in c for v in g.cycle])
        return cls(c, domain)

    @property
    def counts(self):
        if self._counts is None:
            coords, offsets = self._packed
            c = {}
            cl = coords.tolist()
            for a, b in zip(offsets[:-1].tolist(), offsets[1:].tolist()):
                cyc = [tuple(v) for v in cl[a:b]]
                k = least_rotation(cyc)
                g = UnrootedLoop(tuple(cyc[k:] + cyc[:k]))
                c[g] = c.get(g, 0) + 1
            self._counts = c
        return self._counts

    def packed(self):
        """(coords, offsets): each loop copy as its cycle without the repeated root."""
        if self._packed is None:
            parts = []
            offs = [0]
            for g in sorted(self._counts):
                arr = np.asarray(g.cycle, dtype=np.int64)
                for _ in range(self._counts[g]):
                    parts.append(arr)
                    offs.append(offs[-1] + len(arr))
            coords = np.vstack(parts) if parts else np.zeros((0, 2), dtype=np.int64)
            self._packed = (coords, np.asarray(offs, dtype=np.int64))
        return self._packed

    def __len__(self):
        if self._counts is None:
            return len(self._packed[1]) - 1
        return sum(self._counts.values())

    def __iter__(self):
        for g in sorted(self.counts):
            for _ in range(self.counts[g]):
                yield g

    def __getitem__(self, g):
        return self.counts.get(g, 0)

    def __eq__(self, other):
        return isinstance(other, LoopConfig) and self.counts == other.counts

    def __repr__(self):
        return f"LoopConfig(loops={len(self)}, distinct={len(self.counts)}, domain={len(self.domain)})"

    def distinct(self):
        return sorted(self.counts)

    def union(self, other):
        c = dict(self.counts)
        for g, n in other.counts.items():
            c[g] = c.get(g, 0) + n
        return LoopConfig(c, self.domain | other.domain)

    __add__ = union

    def difference(self, other):
        c = {}
        for g, n in self.counts.items():
            m = n - other.counts.get(g, 0)
            if m > 0:
                c[g] = m
        return LoopConfig(c, self.domain)

    __sub__ = difference

    def restrict(self, D):
        """Loops staying entirely inside D."""
        coords, offsets = self.packed()
        keep = _inside_flags(coords, offsets, D)
        return _select(self, keep, D)

    def loops_meeting(self, A):
        coords, offsets = self.packed()
        mask = _vertex_flags(coords, A)
        keep = np.logical_or.reduceat(mask, offsets[:-1]) if len(coords) else np.zeros(0, bool)
        return _select(self, keep, self.domain)

    def total_length(self):
        coords, offsets = self.packed()
        return int(offsets[-1])

    def to_jsonl(self):
        return "".join(g.to_json(n) + "\n" for g, n in sorted(self.counts.items()))

    @classmethod
    def from_jsonl(cls, text, domain=None):
        c = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            g = unroot([tuple(v) for v in obj["v"]])
            c[g] = c.get(g, 0) + int(obj.get("n", 1))
        if domain is None:
            domain = VertexSet([v for g in c for v in g.cycle])
        return cls(c, domain)


def _vertex_flags(coords, A):
    if not len(coords):
        return np.zeros(0, dtype=bool)
    bb = A.bbox
    if bb is None:
        return np.zeros(len(coords), dtype=bool)
    x0, y0, x1, y1 = bb
    m = A.mask()
    inb = (coords[:, 0] >= x0) & (coords[:, 0] <= x1) & (coords[:, 1] >= y0) & (coords[:, 1] <= y1)
    out = np.zeros(len(coords), dtype=bool)
    c = coords[inb]
    out[inb] = m[c[:, 0] - x0, c[:, 1] - y0]
    return out


def _inside_flags(coords, offsets, D):
    if not len(coords):
        return np.zeros(len(offsets) - 1, dtype=bool)
    flags = _vertex_flags(coords, D)
    return np.logical_and.reduceat(flags, offsets[:-1])


def _select(config, keep, domain):
    coords, offsets = config.packed()
    idx = np.nonzero(keep)[0]
    parts = [coords[offsets[i]:offsets[i + 1]] for i in idx]
    lens = [len(p) for p in parts]
    new_off = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
    new_coords = np.vstack(parts) if parts else np.zeros((0, 2), dtype=np.int64)
    return LoopConfig.from_packed(domain, new_coords, new_off)
