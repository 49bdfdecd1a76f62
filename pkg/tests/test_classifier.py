import itertools
import math

import pytest
from hypothesis import given, strategies as st

from isoflag.classifier import (
    InvalidComposition, TripleType, classify_multiple, compositions, equality_catalogue,
    flag_dim, group_dim, is_finite_type, normalize, normalized_triples, parse_composition,
)
from isoflag.orbit_oracle import triple_orbit_count


def T(a, b, c, n):
    return TripleType.of(a, b, c, n)


@pytest.mark.parametrize("n", range(1, 7))
def test_case_I_family(n):
    v = is_finite_type(T((n,), (n,), (1,) * n, n))
    assert v.finite is True and v.cases[0] == "I"


def test_222_is_infinite():
    v = is_finite_type(T((2,), (2,), (2,), 3))
    assert v.finite is False and v.cases == [] and v.excluded_by == "2.15"


def test_overlapping_cases_reported_in_order():
    v = is_finite_type(T((1,), (2,), (1, 1), 2))
    assert v.finite is True and v.cases == ["II", "IV"]
    assert is_finite_type(T((1,), (1,), (1,), 1)).cases == ["I", "II", "III"]


def test_two_long_flags_excluded():
    v = is_finite_type(T((1, 1), (1, 1), (1,), 2))
    assert v.finite is False and v.excluded_by == "1.2"


def test_long_third_flag_with_beta_n():
    v = is_finite_type(T((1,), (3,), (1, 1, 1), 3))
    assert v.finite is True
    v = is_finite_type(T((2,), (3,), (1, 1, 1), 3))
    assert v.finite is False and v.excluded_by == "2.19"


def test_condition_C():
    t = T((1,), (1,), (1,), 3)
    assert is_finite_type(t, True).finite is True
    v = is_finite_type(t, False)
    assert v.finite is False and v.excluded_by == "1.4"
    assert is_finite_type(t, None).finite == "conditional"
    # a triple reaching n is unaffected by the field
    assert is_finite_type(T((3,), (3,), (1, 1, 1), 3), False).finite is True


def test_classify_multiple():
    assert classify_multiple([(1,), (1,)], 2)["finite"] is True
    assert classify_multiple([(1,)] * 4, 2) == {"finite": False, "reason": "1.1"}
    assert classify_multiple([(2,), (2,), (2,)], 3)["finite"] is False


def test_flag_dim_examples():
    for n in range(1, 6):
        assert flag_dim((n,), n) == n * (n + 1) // 2
        assert flag_dim((1,) * n, n) == n * n
    assert flag_dim((2,), 2) == 3
    assert flag_dim((1,), 2) == 3


def test_flag_dim_matches_isotropic_counts():
    # dim = degree of the point count as a polynomial in q
    from isoflag.orbit_oracle import isotropic_flag_count
    from isoflag.split_form import FlagType
    for n in range(1, 5):
        for a in compositions(n):
            c3 = isotropic_flag_count(n, FlagType(a), 101)
            assert round(math.log(c3, 101)) == flag_dim(a, n)


def test_catalogue_examples():
    cat = {str(t) for t in equality_catalogue(7)}
    assert "(1)(1)(1)" in {str(t) for t in equality_catalogue(1)}
    n2 = {str(t) for t in equality_catalogue(2) if t.n == 2}
    assert {"(1)(2)(11)", "(2)(2)(11)"} <= n2
    assert "(5)(7)(33)" in cat


def test_catalogue_dimension_equality():
    for t in equality_catalogue(5):
        assert sum(flag_dim(x, t.n) for x in t.types()) == group_dim(t.n) == t.n * (2 * t.n + 1)


@pytest.mark.parametrize("n", range(1, 9))
def test_finite_implies_dim_bound(n):
    for t in normalized_triples(n):
        v = is_finite_type(t)
        if v.finite is True:
            assert v.dimT <= v.dimG


@st.composite
def triples(draw):
    n = draw(st.integers(1, 5))
    comp = st.sampled_from(compositions(n))
    return T(draw(comp), draw(comp), draw(comp), n)


@given(triples())
def test_verdict_invariant_under_reordering(t):
    base = is_finite_type(t).finite
    for perm in itertools.permutations(t.types()):
        assert is_finite_type(TripleType(*perm, t.n)).finite == base


@given(triples())
def test_normalize_shape(t):
    nt, order = normalize(t)
    assert sorted(order) == [0, 1, 2]
    lens = [len(x.parts) for x in nt.types()]
    assert lens == sorted(lens)
    if lens[0] == lens[1] == 1:
        assert nt.a.parts[0] <= nt.b.parts[0]


@pytest.mark.parametrize("n", [1, 2])
def test_oracle_field_independence(n):
    for t in normalized_triples(n):
        counts = {triple_orbit_count(n, t.a.parts, t.b.parts, t.c.parts, p)[0] for p in (3, 5, 7)}
        assert (len(counts) == 1) == (is_finite_type(t).finite is True)


def test_parse_composition():
    assert parse_composition("1,2", 3).parts == (1, 2)
    assert parse_composition("n", 4).parts == (4,)
    assert parse_composition("1^n", 3).parts == (1, 1, 1)
    assert parse_composition("1^2,1", 3).parts == (1, 1, 1)
    for bad in ("", "0", "2,x", "3,1"):
        with pytest.raises(InvalidComposition):
            parse_composition(bad, 3)
