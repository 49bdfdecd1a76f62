from math import prod

import numpy as np
import pytest

from isoflag.exact_linalg import Field, enumerate_subspaces
from isoflag.invariants import PairShape, all_shapes
from isoflag.orbit_oracle import (
    borel_generators, count_R_orbits, count_flag_orbits, double_coset_count,
    enumerate_max_isotropic, grassmann_finiteness_check, hashimoto_generators,
    orbit_partition, projection_lemma_check,
)
from isoflag.split_form import OrthElement, is_isotropic
from isoflag.stabilizer_gens import gl_generators, r_generators

F3 = Field(3)


@pytest.mark.parametrize("n,p,count", [(1, 3, 4), (2, 3, 40), (1, 5, 6), (3, 3, 1120)])
def test_max_isotropic_counts(n, p, count):
    Vs = enumerate_max_isotropic(n, p)
    assert len(Vs) == len(set(Vs)) == count == prod(p ** i + 1 for i in range(1, n + 1))


def test_max_isotropic_against_brute_force():
    brute = {S for S in enumerate_subspaces(5, 2, 3) if is_isotropic(S)}
    assert brute == set(enumerate_max_isotropic(2, 3))


def test_identity_gives_singletons():
    Vs = enumerate_max_isotropic(1, 3)
    part = orbit_partition(Vs, [OrthElement.identity(F3, 1)])
    assert part.sizes == [1, 1, 1, 1]


@pytest.mark.parametrize("kw,sizes", [({"a0": 1}, [1, 3]), ({"a1": 1}, [1, 1, 2])])
def test_small_partitions(kw, sizes):
    sh = PairShape.make(1, **kw)
    part = orbit_partition(enumerate_max_isotropic(1, 3), r_generators(sh, 3))
    assert sorted(part.sizes) == sizes


def test_partition_is_deterministic():
    sh = PairShape.make(2, ap=1, am=1)
    Vs = enumerate_max_isotropic(2, 3)
    a = orbit_partition(Vs, r_generators(sh, 3))
    b = orbit_partition(list(reversed(Vs)), r_generators(sh, 3))
    assert sorted(a.sizes) == sorted(b.sizes)
    for i, V in enumerate(Vs):
        for W in Vs[i:i + 5]:
            assert a.same_orbit(V, W) == b.same_orbit(V, W)


def test_count_R_orbits_examples():
    r, _ = count_R_orbits(1, 1, 1, PairShape.make(1, a0=1), 3)
    assert r["orbit_count"] == r["expected"] == 2
    for p in (3, 5, 7):
        r, _ = count_R_orbits(1, 1, 1, PairShape.make(1, a1=1), p)
        assert r["orbit_count"] == r["expected"] == 3
    r, _ = count_R_orbits(2, 1, 1, PairShape.make(2, ap=1, am=1), 3)
    assert r["match"]


@pytest.mark.parametrize("n", [1, 2])
def test_invariants_constant_on_orbits(n):
    for sh in all_shapes(n):
        r, _ = count_R_orbits(n, sh.alpha, sh.beta, sh, 3, check_constancy=True)
        assert r["match"] and not r["problems"]


def test_full_group_transitive_on_gl_flags():
    assert count_flag_orbits((1, 1, 1), gl_generators(F3, 3), 3, 3, ambient="gl") == 1


def test_parabolic_double_cosets():
    for a in [(1, 1, 1), (1, 2), (2, 1), (3,), (2, 2), (1, 3), (1, 1, 2)]:
        r = double_coset_count(None, a, sum(a), 3)
        assert r["match"] and r["n_H"] == 1


def test_hashimoto_instance():
    r = double_coset_count(hashimoto_generators(2, 3), (1, 2), 3, 3)
    assert r["n_H"] == 3 and r["orbit_count"] == 9 == r["formula"]


def test_trivial_H():
    r = double_coset_count([np.eye(2, dtype=np.int64)], (2, 1), 3, 3, j=0)
    # n_H = number of full flags of GF(3)^2 = 4
    assert r["n_H"] == 4 and r["orbit_count"] == 12


def test_grassmann_gl_signatures():
    r = grassmann_finiteness_check(2, 2, 2, gl_generators(F3, 2), 3)
    assert r["g1g2_orbits"] == r["signatures"] and r["match"]


def test_grassmann_projective_space():
    r = grassmann_finiteness_check(2, 2, 1, [np.eye(2, dtype=np.int64)], 3)
    assert r["match"]


def test_grassmann_borel_stable_in_p():
    counts = [grassmann_finiteness_check(2, 2, 2, borel_generators(2, p), p)["h1b2_orbits"]
              for p in (3, 5)]
    assert counts[0] == counts[1]


def test_projection_lemma_small():
    assert projection_lemma_check(2, 2, 1, 3)["match"]
