import pytest

from isoflag.canonical import representative
from isoflag.exact_linalg import Field, Mat, span
from isoflag.invariants import InvariantTuple, PairShape, all_shapes, enumerate_tuples
from isoflag.orbit_oracle import generation_report, stabilizer_elements
from isoflag.split_form import OrthElement
from isoflag.stabilizer_gens import (
    GeneratorSet, NotInContext, group_closure, r_generators, restricted_stabilizer, rv_generators,
)

F3 = Field(3)


def test_borel_like_stabilizer_n1():
    sh = PairShape.make(1, a0=1)
    rep = generation_report(r_generators(sh, 3), 1, 3, sh.model_pair(F3))
    assert rep["match"]


def test_torus_times_sign_n1():
    sh = PairShape.make(1, a1=1)
    gens = r_generators(sh, 3)
    assert len(group_closure(gens)) == 4
    assert len(stabilizer_elements(1, 3, sh.model_pair(F3))) == 4


def test_middle_sign_generator():
    sh = PairShape.make(1, a1=1)
    assert sh.m - 2 * sh.a1 == 1
    gens = r_generators(sh, 3)
    minus_mid = Mat.of(F3, [[1, 0, 0], [0, 2, 0], [0, 0, 1]])
    assert any(g.mat == minus_mid for g in gens)


def test_char_two_rejected():
    with pytest.raises(ValueError):
        r_generators(PairShape.make(1, a0=1), 2)


@pytest.mark.slow
@pytest.mark.parametrize("n", [1, 2])
def test_generation_complete_small(n):
    for sh in all_shapes(n):
        rep = generation_report(r_generators(sh, 3), n, 3, sh.model_pair(F3))
        assert rep["match"], (sh, rep)


def test_eager_validation():
    sh = PairShape.make(1, a0=1)
    gs = GeneratorSet(1, 3, "R", sh.model_pair(F3))
    J = OrthElement(1, Mat.of(F3, [[0, 0, 1], [0, 1, 0], [1, 0, 0]]))
    with pytest.raises(NotInContext):
        gs.add(J, "swap")


@pytest.mark.parametrize("n", [1, 2])
def test_rv_elements_stabilize(n):
    for sh in all_shapes(n):
        Up, Um = sh.model_pair(F3)
        for t in enumerate_tuples(sh):
            V = representative(sh, t, F3)
            for g in rv_generators(sh, t, 3, extended=True):
                assert g.image(Up) == Up and g.image(Um) == Um and g.image(V) == V


def test_rv_tuple_mismatch():
    with pytest.raises(ValueError):
        rv_generators(PairShape.make(1, a0=1), InvariantTuple.of(b5=1), 3)


def test_rv_b15_n1():
    sh = PairShape.make(1, a1=1)
    t = InvariantTuple.of(1, b15=1)
    V = span(F3, [(-F3.half, 1, 1)])
    assert representative(sh, t, F3) == V
    gs = rv_generators(sh, t, 3, extended=True)
    assert len(gs) > 0 and all(g.image(V) == V for g in gs)


def test_rv_generation_tiny():
    for sh in all_shapes(1):
        Up, Um = sh.model_pair(F3)
        for t in enumerate_tuples(sh):
            V = representative(sh, t, F3)
            rep = generation_report(rv_generators(sh, t, 3, extended=True), 1, 3, (Up, Um, V))
            assert rep["match"]


def test_restricted_identity_is_trivial():
    V = span(F3, [(1, 0, 0)])
    assert len(restricted_stabilizer(V, [OrthElement.identity(F3, 1)])) == 1
