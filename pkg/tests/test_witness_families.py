import pytest

from isoflag.exact_linalg import Field, span
from isoflag.split_form import dim_of, is_isotropic
from isoflag.witness_families import (
    FAMILIES, INF, FamilyError, build_family, get_family, stabilizer_rigidity, verify_separation,
)

F3 = Field(3)


def e(i, N, F=F3):
    return tuple(F.one if j == i - 1 else F.zero for j in range(N))


def test_o3_example():
    flags = build_family("O3-Wλ", 1, 1, 3)
    assert flags[-1].spaces[0] == span(F3, [(1, 1, 1)])


def test_o6_u3_at_zero():
    # f_i -> e_i (i <= 3) and f_i -> e_(i+1) (i >= 4) at n = 3
    U = build_family("O6-U3λ", 3, 0, 3)[-1].spaces[0]
    first = tuple(a + b + c for a, b, c in zip(e(1, 7), e(3, 7), e(6, 7)))
    second = tuple(F3.red(-a + b) for a, b in zip(e(5, 7), e(7, 7)))
    assert U == span(F3, [first, second])


def test_p14_example():
    Up, Um, V = (fl.spaces[0] for fl in build_family("P14-λ", 3, 1, 3))
    v = tuple(F3.red(x) for x in (0, 1, 1, 0, 1, -1, 0))
    assert V == span(F3, [v])
    assert Up == span(F3, [e(2, 7)]) and Um == span(F3, [e(6, 7)])


@pytest.mark.parametrize("p", [3, 5, 7])
@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_built_flags_valid(name, p):
    fam = get_family(name)
    for n in (fam.min_n, fam.min_n + 1):
        for lam in fam.domain(Field(p)):
            for fl in build_family(name, n, lam, p):
                assert is_isotropic(fl.spaces[-1])
                assert [S.dim for S in fl.spaces] == fl.type.dims()
                assert fl.spaces[0].ambient == dim_of(n)


def test_domain_and_size_errors():
    with pytest.raises(FamilyError):
        build_family("O3-Wλ", 1, 0, 3)
    with pytest.raises(FamilyError):
        build_family("P14-λ", 3, 0, 3)
    with pytest.raises(FamilyError):
        build_family("O6-U3λ", 2, 1, 3)
    with pytest.raises(FamilyError):
        build_family("P14-λ", 2, 1, 3, a=2)
    with pytest.raises(FamilyError):
        build_family("O6-U4λ", 3, INF, 3)
    build_family("O5-fix", 2, INF, 3)


@pytest.mark.parametrize("name,p", [("O3-Wλ", 3), ("O3-Wλ", 5), ("O5-fix", 3),
                                    ("O6-U4λ", 3), ("O7-fix", 3), ("P14-λ", 5)])
def test_separation_small(name, p):
    r = verify_separation(name, p)
    assert r["predicate_match"] and r["routes_agree"] and r["route_b_equivalence"]


def test_p14_square_classes_gf5():
    r = verify_separation("P14-λ", 5)
    assert sorted(map(sorted, r["classes"])) == [[1, 4], [2, 3]]


def test_o6_u3_necessity_gf5():
    r = verify_separation("O6-U3λ", 5)
    assert r["necessity"] and r["routes_agree"]
    # 2 ~ 4 = 1 - 2; the pair {0, 1} stays apart
    assert sorted(map(sorted, r["classes"])) == [[0], [1], [2, 4], [3]]


@pytest.mark.parametrize("name", ["O3-Wλ", "O5-fix", "O7-fix"])
def test_rigidity_gf3(name):
    r = stabilizer_rigidity(name, 3)
    assert r["plus_minus_identity"] and r["order"] == 2
