"""Verification suites shared by the command line and the acceptance tests.

Every suite returns a JSON-ready report with a boolean "pass" key.
"""
from __future__ import annotations

import itertools
import random

import numpy as np

from .canonical import StageFailure, canonicalize, representative
from .classifier import equality_catalogue
from .exact_linalg import Field
from .invariants import PairShape, all_shapes, compute_b, enumerate_tuples
from .orbit_oracle import (
    borel_generators, count_R_orbits, double_coset_count, enumerate_max_isotropic,
    grassmann_finiteness_check, hashimoto_generators, moving_flag_orbits,
    projection_lemma_check, section5_check, triple_orbit_count,
)
from .stabilizer_gens import gl_generators
from .witness_families import ALIASES, FAMILIES, stabilizer_rigidity, verify_separation

# dim T = dim G triples of finite type as listed in the literature, keyed by rank:
# (n)(n)(1^n) for every n, the two small cases and the case IV list (n = beta)
_IV = (((1,), (2,), (1, 1)), ((2,), (2,), (1, 1)), ((2,), (3,), (1, 1)), ((2,), (3,), (1, 2)),
       ((2,), (3,), (2, 1)), ((3,), (4,), (2, 2)), ((3,), (4,), (1, 2)), ((3,), (4,), (2, 1)),
       ((3,), (5,), (2, 2)), ((4,), (5,), (2, 2)), ((4,), (6,), (2, 3)), ((4,), (6,), (3, 2)),
       ((5,), (7,), (3, 3)))
LISTED_EQUALITY_TRIPLES = (
    [("I", n, (n,), (n,), (1,) * n) for n in range(1, 8)]
    + [("II", 2, (1,), (2,), (1, 1)), ("III", 1, (1,), (1,), (1,))]
    + [("IV", t[1][0], *t) for t in _IV]
)


def listed_triples(n_max):
    return sorted({x[1:] for x in LISTED_EQUALITY_TRIPLES if x[1] <= n_max})


SECTION_CONFIGS = (
    ("b4", 2, 1, 0), ("b4", 2, 1, 1), ("b4", 3, 2, 1),
    ("b11", 2, 1, 0), ("b11", 2, 1, 1), ("b11", 3, 2, 0), ("b11", 3, 2, 1),
    ("b15", 1, 1, 0), ("b15", 2, 2, 0), ("b15", 2, 2, 1), ("b15", 3, 3, 1),
    ("b8", 2, 2, 0), ("b8", 3, 2, 0), ("b8", 3, 3, 1),
    ("b13", 2, 1, 0), ("b13", 3, 2, 0), ("b13", 3, 2, 1),
)

GRASSMANN_CASES = (
    (2, 2, 2, "borel"), (2, 2, 1, "trivial"), (2, 2, 2, "gl"),
    (3, 2, 2, "borel"), (2, 3, 2, "hashimoto"),
)


def th310(n, p):
    """Orbit count of R on maximal isotropics equals the tuple count, per shape."""
    rows = []
    for sh in all_shapes(n):
        r, _ = count_R_orbits(n, sh.alpha, sh.beta, sh, p)
        rows.append({"shape": sh.as_dict(), "orbits": r["orbit_count"],
                     "tuples": r["expected"], "match": r["match"], "problems": r["problems"]})
    return {"suite": "th310", "n": n, "p": p, "shapes": rows,
            "pass": all(r["match"] for r in rows)}


def roundtrip(n, p):
    F = Field(p)
    bad, total = [], 0
    for sh in all_shapes(n):
        Up, Um = sh.model_pair(F)
        for t in enumerate_tuples(sh):
            total += 1
            if compute_b(Up, Um, representative(sh, t, F), n, sh) != t:
                bad.append({"shape": sh.as_dict(), "tuple": t.to_json()})
    return {"suite": "roundtrip", "n": n, "p": p, "tuples": total, "failures": bad,
            "pass": not bad}


def _canon_check(Up, Um, V, n, sh, F):
    g, t, trace = canonicalize(Up, Um, V, n, sh)
    ok = (g.image(Up) == Up and g.image(Um) == Um
          and g.image(V) == representative(sh, t, F))
    return ok, t, trace


def canonicalize_all(n, p, sample=None, seed=None):
    """canonicalize on every maximal isotropic (or a seeded sample) for every shape."""
    F = Field(p)
    Vs = enumerate_max_isotropic(n, p)
    if sample is not None:
        Vs = random.Random(seed).sample(list(Vs), min(sample, len(Vs)))
    bad, total = [], 0
    for sh in all_shapes(n):
        Up, Um = sh.model_pair(F)
        for V in Vs:
            total += 1
            try:
                ok, t, trace = _canon_check(Up, Um, V, n, sh, F)
            except StageFailure as e:
                bad.append({"shape": sh.as_dict(), "V": [list(b) for b in V.basis],
                            "stage": e.label})
                continue
            if not ok:
                bad.append({"shape": sh.as_dict(), "V": [list(b) for b in V.basis]})
    return {"suite": "canonicalize", "n": n, "p": p, "checked": total, "failures": bad,
            "pass": not bad}


def catalogue(n_max=7):
    found = sorted((t.n, t.a.parts, t.b.parts, t.c.parts) for t in equality_catalogue(n_max))
    listed = listed_triples(n_max)
    missing = [x for x in listed if x not in found]
    extra = [x for x in found if x not in listed]
    return {"suite": "catalogue", "n_max": n_max, "found": found, "missing": missing,
            "extra": extra, "pass": not missing and not extra}


def cor93(n, p):
    """Hashimoto instance in GL_n plus every parabolic with n_gl <= n."""
    if n < 2:
        raise ValueError("needs n >= 2")
    main = double_coset_count(hashimoto_generators(n - 1, p), (1, n - 1), n, p)
    pars = []
    for k in range(1, n + 1):
        for a in (c for r in range(1, k + 1) for c in itertools.product(range(1, k + 1), repeat=r)
                  if sum(c) == k):
            pars.append(double_coset_count(None, a, k, p))
    return {"suite": "cor93", "n": n, "p": p, "hashimoto": main,
            "parabolic_failures": [r for r in pars if not r["match"]],
            "parabolics_checked": len(pars),
            "pass": main["match"] and all(r["match"] for r in pars)}


def section_counts(p=3, n_max=3):
    rows = []
    for case, n, alpha, b3 in SECTION_CONFIGS:
        if n > n_max:
            continue
        r = section5_check(case, n, alpha, b3, p)
        rows.append({"case": case, "n": n, "alpha": alpha, "b3": b3,
                     "expected": r["expected"],
                     "orbit_counts": [c["orbit_count"] for c in r["configs"]],
                     "relation": r.get("relation"), "match": r["match"]})
    return {"suite": "section-counts", "p": p, "configs": rows,
            "pass": all(r["match"] for r in rows)}


def _h1(kind, m, p):
    if kind == "borel":
        return borel_generators(m, p)
    if kind == "hashimoto":
        return hashimoto_generators(m, p)
    if kind == "gl":
        return gl_generators(Field(p), m)
    return [np.eye(m, dtype=np.int64)]


def grassmann(p=3):
    rows = []
    for m, nd, s, kind in GRASSMANN_CASES:
        r = grassmann_finiteness_check(m, nd, s, _h1(kind, m, p), p)
        r["H1"] = kind
        rows.append(r)
    proj = [projection_lemma_check(2, 2, s, p) for s in (1, 2)]
    return {"suite": "grassmann", "p": p, "cases": rows,
            "projection": [{"s": r["s"], "match": r["match"]} for r in proj],
            "pass": all(r["match"] for r in rows) and all(r["match"] for r in proj)}


def dichotomy(primes=(3, 5, 7)):
    """A finite-type triple has p-independent counts; an infinite one grows."""
    finite = {p: triple_orbit_count(2, (2,), (2,), (1, 1), p)[0] for p in primes}
    generic = PairShape.make(3, a1=2)
    growing = {p: moving_flag_orbits(generic, p, (2,)).orbit_count for p in primes}
    vals = [growing[p] for p in primes]
    return {"suite": "dichotomy",
            "finite_counts": {str(p): c for p, c in finite.items()},
            "infinite_counts": {str(p): c for p, c in growing.items()},
            "pass": len(set(finite.values())) == 1 and all(a < b for a, b in zip(vals, vals[1:]))}


def family(name, p, n=None):
    r = verify_separation(name, p, n)
    r["suite"] = f"family-{name}"
    r["pass"] = r["predicate_match"]
    return r


def rigidity(name, p):
    r = stabilizer_rigidity(name, p)
    r["suite"] = f"rigidity-{name}"
    r["pass"] = r["plus_minus_identity"]
    return r


NUMBERED_FAMILY_SUITES = {"family-lem29": "O6-U3λ", "family-lem212": "O6-U4λ", "family-prop14": "P14-λ"}
RIGID = ("O3-Wλ", "O5-fix", "O7-fix")


def family_suite_names():
    ascii_names = {v: k for k, v in ALIASES.items()}
    names = {f"family-{ascii_names.get(f, f)}": f for f in FAMILIES}
    names.update(NUMBERED_FAMILY_SUITES)
    names.update({f"rigidity-{ascii_names.get(f, f)}": f for f in RIGID})
    return names


SUITES = ("th310", "roundtrip", "canonicalize", "canon-sample", "catalogue", "cor93",
          "section-counts", "grassmann", "dichotomy", *sorted(family_suite_names()))
