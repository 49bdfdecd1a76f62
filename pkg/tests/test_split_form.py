import pytest
from hypothesis import given, strategies as st

from isoflag.exact_linalg import Field, Mat, Subspace, span
from isoflag.orbit_oracle import enumerate_max_isotropic
from isoflag.split_form import (
    FlagType, NotOrthogonal, OrthElement, bar1, compose, dim_of, element_from_isotropic_vectors,
    form_value, gram_J, is_isotropic, is_orthogonal, parabolic_contains, perp,
    standard_flag, to_external, to_internal, unipotent_XZ,
)

Q = Field(0)
F3 = Field(3)


def e(i, N, F=Q):
    """1-based unit vector."""
    return tuple(F.one if j == i - 1 else F.zero for j in range(N))


def test_index_conversion():
    assert to_external(to_internal(4)) == 4
    assert bar1(1, 2) == 5 and bar1(3, 2) == 3


@pytest.mark.parametrize("u,v,val", [(1, 3, 1), (2, 2, 1), (1, 1, 0)])
def test_form_value_n1(u, v, val):
    assert form_value(e(u, 3), e(v, 3), 1) == Q.elem(val)


def test_form_value_length_checked():
    with pytest.raises(ValueError):
        form_value((1, 0), (0, 1), 1)


def test_perp_examples():
    assert perp(span(Q, [e(1, 3)]), 1) == span(Q, [e(1, 3), e(2, 3)])
    assert perp(Subspace.whole(Q, 3), 1).dim == 0
    S = span(Q, [tuple(a + b for a, b in zip(e(1, 5), e(5, 5)))])
    P = perp(S, 2)
    assert P.dim == 4
    assert all(e(i, 5) in P for i in (2, 3, 4))
    # (e1+e5, e1-e5) = -1 + 1 = 0
    assert tuple(a - b for a, b in zip(e(1, 5), e(5, 5))) in P


def test_isotropy_examples():
    for n in (1, 2, 3):
        N = dim_of(n)
        assert is_isotropic(span(Q, [e(i, N) for i in range(1, n + 1)]))
    assert not is_isotropic(span(Q, [e(2, 3)]))


def test_J_is_orthogonal():
    for n in (1, 2):
        J = gram_J(Q, dim_of(n))
        assert is_orthogonal(J, n)
        assert not parabolic_contains(OrthElement(n, J), standard_flag(Q, n, FlagType((n,))))


def test_orth_element_rejects_non_isometries():
    with pytest.raises(NotOrthogonal):
        OrthElement(1, Mat.of(Q, [[1, 1, 0], [0, 1, 0], [0, 0, 1]]))


def test_unipotent_trivial_and_n1():
    assert unipotent_XZ(Mat.zeros(Q, 1, 1), {}, 1, 1).is_identity()
    x = Q(3)
    g = unipotent_XZ(Mat.of(Q, [[x]]), {}, 1, 1)
    # g e3 = -(x^2/2) e1 - x e2 + e3; the e2 coefficient is forced by (g e2, g e3) = 0
    assert g.mat.column(1) == (x, Q.one, Q.zero)
    assert g.mat.column(2) == (-x * x * Q.half, -x, Q.one)


@given(st.lists(st.integers(0, 4), min_size=10, max_size=10), st.integers(0, 4),
       st.lists(st.integers(0, 4), min_size=10, max_size=10), st.integers(0, 4))
def test_unipotent_n2_closed_under_products(xs, z, ys, w):
    F = Field(5)
    X = Mat.of(F, [xs[:1], xs[1:2]], 1)
    Y = Mat.of(F, [ys[:1], ys[1:2]], 1)
    g = unipotent_XZ(X, {(0, 0): z}, 2, 2)
    h = unipotent_XZ(Y, {(0, 0): w}, 2, 2)
    gh = compose(g, h)
    assert is_orthogonal(gh.mat, 2)
    W = span(F, [e(1, 5, F), e(2, 5, F)])
    # product fixes W and acts trivially on it and on W-perp / W
    assert gh.image(W) == W
    for i in range(5):
        v = gh.apply(e(i + 1, 5, F))
        assert v[i] == F.one and all(v[j] == 0 for j in range(i + 1, 5))


def test_element_from_isotropic_vectors():
    assert element_from_isotropic_vectors([0], [e(1, 3)], 1).is_identity()
    with pytest.raises(ValueError):
        element_from_isotropic_vectors([0], [(1, 1, 0)], 1)
    v = (1, 0, 1, 0, -Q.half)
    g = element_from_isotropic_vectors([0], [v], 2)
    assert is_orthogonal(g.mat, 2)
    assert g.apply(e(1, 5)) == tuple(Q(x) for x in v)


def test_parabolic_contains():
    flag = standard_flag(Q, 2, FlagType((1, 1)))
    assert parabolic_contains(OrthElement.identity(Q, 2), flag)
    # torus element diag(2, 3, 1, 1/3, 1/2) is block upper triangular
    d = [Q(2), Q(3), Q.one, Q.inv(3), Q.inv(2)]
    t = OrthElement(2, Mat.of(Q, [[d[i] if i == j else 0 for j in range(5)] for i in range(5)]))
    assert parabolic_contains(t, flag)


def test_perp_involution_and_order_reversal():
    n, N = 2, 5
    subs = [span(F3, [e(1, N, F3)]), span(F3, [e(1, N, F3), e(2, N, F3)]),
            span(F3, [e(1, N, F3), e(3, N, F3)])]
    for S in subs:
        assert perp(perp(S, n), n) == S
    assert perp(subs[1], n) <= perp(subs[0], n)


def test_projection_of_perp_over_gf3():
    # p_Wbar(V) = (W ∩ V)^perp ∩ Wbar for every maximal isotropic V at n = 2
    n, N = 2, 5
    for d in (1, 2):
        W = Subspace.coordinate(F3, N, range(d))
        Wbar_idx = range(N - d, N)
        Wbar = Subspace.coordinate(F3, N, Wbar_idx)
        for V in enumerate_max_isotropic(n, 3):
            proj = span(F3, [tuple(x if i in Wbar_idx else 0 for i, x in enumerate(b))
                             for b in V.basis], N)
            assert proj == perp(W & V, n) & Wbar
