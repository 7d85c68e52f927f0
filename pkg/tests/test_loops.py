from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from loopsoup.lattice import box
from loopsoup.loops import (LatticePath, LoopConfig, RootedLoop, UnrootedLoop, is_excursion, least_rotation,
                            nu_weight, nu_weight_exact, path_weight, unroot)
from loopsoup.oracle import enumerate_loops
from conftest import random_walk_loop

a, b = (0, 0), (1, 0)
SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)]


def test_unroot_examples():
    assert unroot([a, b, a]) == unroot([b, a, b])
    reps = {unroot(RootedLoop(SQUARE).rotate(k)) for k in range(4)}
    assert len(reps) == 1 and next(iter(reps)).J == 1
    g = unroot([a, b, a, b, a])
    assert g.length == 4 and g.J == 2
    with pytest.raises(ValueError, match="not a loop"):
        unroot([a, b])
    with pytest.raises(ValueError, match="not a loop"):
        RootedLoop([a])


def test_nu_weight_examples():
    assert nu_weight(unroot([a, b, a])) == 1 / 16
    assert nu_weight(unroot([a, b, a, b, a])) == 1 / 512
    assert nu_weight(unroot(SQUARE)) == 1 / 256
    assert nu_weight_exact(unroot([a, b, a, b, a])) == Fraction(1, 512)


def test_path_weight_and_excursion():
    assert path_weight(LatticePath([(0, 0), (1, 0), (1, 1), (2, 1)])) == 1 / 64
    with pytest.raises(ValueError):
        path_weight(LatticePath([(0, 0)]))
    B1 = box((0, 0), 1)
    assert is_excursion(LatticePath([(1, 1), (1, 0), (1, -1)]), B1)
    assert not is_excursion(LatticePath([(1, 0), (0, 0)]), B1)
    with pytest.raises(ValueError):
        LatticePath([(0, 0), (2, 0)])


def test_multiset_ops():
    g = unroot([a, b, a])
    h = unroot(SQUARE)
    L = LoopConfig({g: 2, h: 1}, box((0, 0), 2))
    E = LoopConfig({}, box((0, 0), 2))
    assert L.union(E) == L
    assert (LoopConfig({g: 2}) + LoopConfig({g: 3})).counts == {g: 5}
    assert (LoopConfig({g: 2}) - LoopConfig({g: 3})).counts == {}
    assert (L - LoopConfig({g: 1})).counts == {g: 1, h: 1}
    assert len(L) == 3


@given(st.integers(0, 2**31 - 1), st.integers(1, 8))
def test_rotation_invariance_and_reversal(seed, n):
    rng = np.random.default_rng(seed)
    loop = RootedLoop(random_walk_loop(rng, n))
    g = unroot(loop)
    for k in range(len(loop)):
        assert unroot(loop.rotate(k)) == g
    r = g.reversed()
    assert r.reversed() == g
    assert r.length == g.length and r.J == g.J
    assert len(g.cycle) % g.J == 0
    prim = g.cycle[:len(g.cycle) // g.J]
    assert prim * g.J == g.cycle
    assert g.cycle == min(g.cycle[k:] + g.cycle[:k] for k in range(len(g.cycle)))


@given(st.lists(st.integers(0, 3), min_size=1, max_size=30))
def test_least_rotation_is_minimal(seq):
    k = least_rotation(seq)
    rot = seq[k:] + seq[:k]
    assert rot == min(seq[i:] + seq[:i] for i in range(len(seq)))


def test_rooted_unrooted_mass_consistency_B2():
    cat = enumerate_loops(box((0, 0), 2), 8)
    for g, w in cat.loops:
        reps = g.rooted_representatives()
        assert len(reps) == g.length // g.J
        assert len(set(reps)) == len(reps)
        assert Fraction(len(reps), 4 ** g.length * g.length) == w


def test_reversal_is_distinct_class():
    g = unroot(SQUARE)
    assert g.reversed() != g


def test_jsonl_roundtrip_and_format():
    g = unroot([a, b, a, b, a])
    h = unroot(SQUARE)
    L = LoopConfig({g: 1, h: 3}, box((0, 0), 2))
    text = L.to_jsonl()
    lines = text.strip().split("\n")
    assert lines[0] == '{"v": [[0, 0], [1, 0], [0, 0], [1, 0], [0, 0]], "n": 1}'
    assert LoopConfig.from_jsonl(text, L.domain) == L


def test_packed_roundtrip_and_restrict():
    g = unroot([a, b, a])
    far = unroot([(2, 2), (2, 3), (2, 2)])
    L = LoopConfig({g: 2, far: 1}, box((0, 0), 3))
    coords, offsets = L.packed()
    assert list(np.diff(offsets)) == [2, 2, 2]
    M = LoopConfig.from_packed(L.domain, coords, offsets)
    assert M.counts == L.counts
    assert L.restrict(box((0, 0), 1)).counts == {g: 2}
    assert L.loops_meeting(box((2, 2), 0)).counts == {far: 1}
