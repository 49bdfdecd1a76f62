import pytest
from hypothesis import given, strategies as st

from isoflag.exact_linalg import (
    BudgetExceeded, Field, FieldMismatch, Mat, Subspace, enumerate_subspaces,
    gaussian_binomial, intersect, parse_matrices, rref, span, subspace_sum,
)

F3 = Field(3)


def test_rref_identity():
    m = Mat.identity(F3, 3)
    red, piv, rank = rref(m)
    assert red == m and piv == (0, 1, 2) and rank == 3


def test_rref_dependent_rows_gf5():
    red, piv, rank = rref(Mat.of(Field(5), [[1, 2], [2, 4]]))
    assert red == Mat.of(Field(5), [[1, 2], [0, 0]])
    assert rank == 1 and piv == (0,)


def test_rref_zero():
    z = Mat.zeros(F3, 2, 3)
    red, piv, rank = rref(z)
    assert red == z and rank == 0 and piv == ()


def test_mixed_fields_rejected():
    with pytest.raises(FieldMismatch):
        Mat.of(F3, [[Field(5).elem(1), 1]])


def test_char_two_rejected():
    with pytest.raises(ValueError):
        Field(2)


def test_span_meet_and_join():
    e = lambda i: tuple(int(j == i) for j in range(3))
    S = span(F3, [e(0)])
    assert intersect(S, S) == S
    A, B = span(F3, [e(0), e(1)]), span(F3, [e(1), e(2)])
    assert intersect(A, B) == span(F3, [e(1)])
    assert subspace_sum(A, B) == Subspace.whole(F3, 3)


def test_transversal_lines_gf3():
    S, T = span(F3, [(1, 1)]), span(F3, [(1, 2)])
    assert intersect(S, T).dim == 0
    assert subspace_sum(S, T) == Subspace.whole(F3, 2)


@pytest.mark.parametrize("N,k,p,count", [(2, 1, 3, 4), (3, 3, 3, 1), (4, 2, 3, 130)])
def test_enumerate_subspaces_examples(N, k, p, count):
    subs = enumerate_subspaces(N, k, p)
    assert len(subs) == count == len(set(subs))


@pytest.mark.parametrize("p", [3, 5])
@pytest.mark.parametrize("N", range(1, 6))
def test_enumerate_matches_gaussian_binomial(N, p):
    for k in range(N + 1):
        if gaussian_binomial(N, k, p) > 20000:
            continue
        subs = enumerate_subspaces(N, k, p)
        assert len(set(subs)) == gaussian_binomial(N, k, p)
        assert all(S.dim == k for S in subs)


def test_enumerate_budget_refuses():
    with pytest.raises(BudgetExceeded):
        enumerate_subspaces(6, 3, 5, budget=100)


primes = st.sampled_from([3, 5, 7])


@st.composite
def matrices(draw, max_rows=4, max_cols=5):
    p = draw(primes)
    r = draw(st.integers(1, max_rows))
    c = draw(st.integers(1, max_cols))
    rows = draw(st.lists(st.lists(st.integers(0, p - 1), min_size=c, max_size=c),
                         min_size=r, max_size=r))
    return Mat.of(Field(p), rows, c)


@given(matrices())
def test_rref_idempotent(m):
    red, piv, rank = rref(m)
    assert rref(red) == (red, piv, rank)


@given(matrices(), st.data())
def test_span_invariant_under_row_operations(m, data):
    F = m.field
    i = data.draw(st.integers(0, m.nrows - 1))
    j = data.draw(st.integers(0, m.nrows - 1))
    c = data.draw(st.integers(1, F.p - 1))
    rows = [list(r) for r in m.rows]
    if i != j:
        rows[i] = [F.red(a + c * b) for a, b in zip(rows[i], rows[j])]
    else:
        rows[i] = [F.red(c * a) for a in rows[i]]
    assert span(F, m.rows, m.ncols) == span(F, rows, m.ncols)


@given(st.data())
def test_modular_law(data):
    p = data.draw(primes)
    F = Field(p)
    N = data.draw(st.integers(1, 5))
    vecs = st.lists(st.lists(st.integers(0, p - 1), min_size=N, max_size=N), max_size=4)
    S = span(F, data.draw(vecs), N)
    T = span(F, data.draw(vecs), N)
    assert S.dim + T.dim == (S + T).dim + (S & T).dim


@given(matrices())
def test_matrix_text_round_trip(m):
    assert Mat.from_text(m.to_text()) == m
    assert parse_matrices(m.to_text() + m.to_text()) == [m, m]


def test_malformed_matrix_text():
    with pytest.raises(ValueError):
        Mat.from_text("2 2 3\n1 0\n")
