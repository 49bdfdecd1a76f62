import random

import pytest

from isoflag.canonical import (
    b15_block_normalize, canonicalize, layout, normalize_pair, representative,
)
from isoflag.exact_linalg import Field, Subspace, span
from isoflag.invariants import InvariantTuple, PairShape, all_shapes, compute_b, enumerate_tuples
from isoflag.split_form import OrthElement, compose, is_isotropic, is_orthogonal
from isoflag.stabilizer_gens import g_generators

Q = Field(0)
F3 = Field(3)


def e(i, N, F=Q):
    return tuple(F.one if j == i - 1 else F.zero for j in range(N))


def test_layout_empty_and_b15():
    lay = layout(PairShape.make(2), InvariantTuple.of(b14=2))
    assert all(not lay.I[j] for j in range(1, 16) if j != 14)
    lay = layout(PairShape.make(1, a1=1), InvariantTuple.of(1, b15=1))
    assert lay.I[15] == [1] and lay.c == 1 and lay.I15plus == [1]
    lay.check()


def test_layout_partitions_indices():
    for n in (1, 2, 3):
        for sh in all_shapes(n):
            for t in enumerate_tuples(sh):
                layout(sh, t).check()


def test_representative_examples():
    sh = PairShape.make(1, a0=1)
    assert representative(sh, InvariantTuple.of(b1=1), F3) == span(F3, [e(1, 3, F3)])
    assert representative(sh, InvariantTuple.of(b2=1), F3) == span(F3, [e(3, 3, F3)])
    V = representative(PairShape.make(1, a1=1), InvariantTuple.of(1, b15=1), Q)
    assert V == span(Q, [(-Q.half, 1, 1)])


def test_normalize_pair_swap():
    Up, Um = span(Q, [e(3, 3)]), span(Q, [e(1, 3)])
    g, sh = normalize_pair(Up, Um, 1)
    assert g.image(Up) == span(Q, [e(1, 3)]) and g.image(Um) == span(Q, [e(3, 3)])
    assert sh == PairShape.make(1, a1=1)


def test_normalize_pair_identity_on_model():
    for sh in all_shapes(2):
        Up, Um = sh.model_pair(Q)
        g, sh2 = normalize_pair(Up, Um, 2)
        assert sh2 == sh and g.image(Up) == Up and g.image(Um) == Um


def _random_element(F, n, rng, length=25):
    gens = g_generators(F, n)
    return compose(*(rng.choice(gens) for _ in range(length)))


def test_normalize_pair_random_gf5():
    F = Field(5)
    rng = random.Random(7)
    for _ in range(200):
        sh = rng.choice(all_shapes(2))
        Up, Um = sh.model_pair(F)
        h = _random_element(F, 2, rng)
        Ap, Am = h.image(Up), h.image(Um)
        g, sh2 = normalize_pair(Ap, Am, 2)
        assert sh2 == sh
        assert (g.image(Ap), g.image(Am)) == (Up, Um)
        assert is_orthogonal(g.mat, 2)


def test_canonicalize_on_representative():
    sh = PairShape.make(1, a1=1)
    Up, Um = sh.model_pair(F3)
    t = InvariantTuple.of(1, b15=1)
    V = representative(sh, t, F3)
    g, t2, trace = canonicalize(Up, Um, V, 1, sh)
    assert t2 == t and g.image(V) == V


def test_canonicalize_n1_b2():
    Up = Um = span(Q, [e(1, 3)])
    V = span(Q, [(1, 1, -Q.half)])
    g, t, trace = canonicalize(Up, Um, V, 1)
    assert t == InvariantTuple.of(b2=1)
    assert g.image(V) == span(Q, [e(3, 3)])
    assert g.image(Up) == Up
    assert trace.labels() == ["i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix"]


def test_b15_block_trivial():
    sh = PairShape.make(1, a0=1)
    lay = layout(sh, InvariantTuple.of(b1=1))
    assert b15_block_normalize(span(Q, [e(1, 3)]), lay, 0, 1).is_identity()


@pytest.mark.parametrize("p", [3, 5, 7])
def test_b15_block_single(p):
    F = Field(p)
    sh = PairShape.make(1, a1=1)
    t = InvariantTuple.of(1, b15=1)
    lay = layout(sh, t)
    target = representative(sh, t, F)
    for s in range(1, p):
        tt = F.red(-s * s * F.half)   # isotropy: s^2 + 2t = 0
        block = span(F, [(tt, s, 1)])
        assert is_isotropic(block)
        g = b15_block_normalize(block, lay, 1, 1)
        assert g.image(block) == target


def test_b15_block_pairs_gf3():
    # every block that canonicalize meets with b15 = 2, eps = 0 normalizes
    from isoflag.orbit_oracle import enumerate_max_isotropic
    sh = PairShape.make(2, a1=2)
    Up, Um = sh.model_pair(F3)
    hit = 0
    for V in enumerate_max_isotropic(2, 3):
        t = compute_b(Up, Um, V, 2, sh)
        if t[15] == 2 and t.eps == 0:
            g, t2, _ = canonicalize(Up, Um, V, 2, sh)
            assert g.image(V) == representative(sh, t, F3)
            hit += 1
    assert hit > 0
