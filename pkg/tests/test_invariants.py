import pytest

from isoflag.exact_linalg import Field, span
from isoflag.invariants import (
    InvariantTuple, NotNormalized, PairShape, all_shapes, compute_b, enumerate_tuples,
    identities_hold, invariant_spaces, pair_shape, projection_balance,
)
from isoflag.orbit_oracle import enumerate_max_isotropic
from isoflag.stabilizer_gens import r_generators

Q = Field(0)
F3 = Field(3)


def e(i, N, F=Q):
    return tuple(F.one if j == i - 1 else F.zero for j in range(N))


def test_pair_shape_examples():
    sh = pair_shape(span(Q, [e(1, 3)]), span(Q, [e(1, 3)]), 1)
    assert (sh.a0, sh.ap, sh.am, sh.a1, sh.a2, sh.d, sh.m) == (1, 0, 0, 0, 0, 1, 1)
    sh = pair_shape(span(Q, [e(1, 3)]), span(Q, [e(3, 3)]), 1)
    assert (sh.a0, sh.ap, sh.am, sh.a1, sh.a2, sh.d, sh.m) == (0, 0, 0, 1, 0, 0, 3)
    sh = pair_shape(span(Q, [e(1, 5)]), span(Q, [e(2, 5)]), 2)
    assert (sh.a0, sh.ap, sh.am, sh.a1, sh.a2, sh.d, sh.m) == (0, 1, 1, 0, 0, 2, 1)


def test_compute_b_examples():
    W0 = span(Q, [e(1, 3)])
    assert compute_b(W0, W0, W0, 1) == InvariantTuple.of(b1=1)
    V = span(Q, [(1, 1, -Q.half)])
    assert compute_b(W0, W0, V, 1) == InvariantTuple.of(b2=1)
    assert compute_b(W0, span(Q, [e(3, 3)]), V, 1) == InvariantTuple.of(1, b15=1)


def test_compute_b_refuses_unnormalized_pair():
    with pytest.raises(NotNormalized):
        compute_b(span(Q, [e(3, 3)]), span(Q, [e(1, 3)]), span(Q, [e(1, 3)]), 1)


def test_enumerate_tuples_examples():
    assert enumerate_tuples(PairShape.make(1, a0=1)) == [InvariantTuple.of(b2=1), InvariantTuple.of(b1=1)]
    got = enumerate_tuples(PairShape.make(1, a1=1))
    assert set(got) == {InvariantTuple.of(b5=1), InvariantTuple.of(b6=1), InvariantTuple.of(1, b15=1)}
    assert enumerate_tuples(PairShape.make(2)) == [InvariantTuple.of(b14=2)]


def test_enumerate_tuples_sorted_and_valid():
    for n in (1, 2, 3):
        for sh in all_shapes(n):
            ts = enumerate_tuples(sh)
            assert ts == sorted(ts)
            assert all(identities_hold(sh, t) for t in ts)


def test_malformed_tuple_rejected():
    with pytest.raises(ValueError):
        InvariantTuple((0,) * 14, 0)
    with pytest.raises(ValueError):
        InvariantTuple((0,) * 15, 2)


def _sweep(n, p):
    F = Field(p)
    Vs = enumerate_max_isotropic(n, p)
    for sh in all_shapes(n):
        Up, Um = sh.model_pair(F)
        for V in Vs:
            yield sh, Up, Um, V


@pytest.mark.parametrize("n", [1, 2])
def test_identities_parity_and_chain(n):
    for sh, Up, Um, V in _sweep(n, 3):
        t = compute_b(Up, Um, V, n, sh)
        assert identities_hold(sh, t)
        if t.eps == 0:
            assert t[15] % 2 == 0
        sp = invariant_spaces(Up, Um, V, n)
        assert sp["X0"] <= sp["X1"] <= sp["X"] <= sp["Xp"]
        a, b = projection_balance(Up, Um, V, n)
        assert a == b


@pytest.mark.parametrize("n", [1, 2])
def test_invariants_constant_along_R(n):
    for sh in all_shapes(n):
        Up, Um = sh.model_pair(F3)
        gens = r_generators(sh, 3).elements
        for V in enumerate_max_isotropic(n, 3):
            t = compute_b(Up, Um, V, n, sh)
            for g in gens:
                assert compute_b(Up, Um, g.image(V), n, sh) == t
