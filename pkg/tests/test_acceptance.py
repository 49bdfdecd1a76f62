"""Acceptance criteria 1-9; each test prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s``; the lines are also
collected into the terminal summary.
"""
import itertools
import time

import pytest

from isoflag import suites
from isoflag.orbit_oracle import double_coset_count
from isoflag.witness_families import verify_separation, stabilizer_rigidity

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow


def record(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES[k] = line
    print(line)
    return ok


def test_criterion_1_orbits_equal_tuples():
    t0 = time.perf_counter()
    bad = []
    shapes = 0
    for n, p in itertools.product((1, 2, 3), (3, 5)):
        r = suites.th310(n, p)
        shapes += len(r["shapes"])
        bad += [(n, p, s["shape"]) for s in r["shapes"] if not s["match"]]
    ok = record(1, not bad, f"{shapes} shape/prime cases, {len(bad)} mismatches, "
                            f"{time.perf_counter() - t0:.0f}s")
    assert ok, bad


def test_criterion_2_round_trip():
    reports = [suites.roundtrip(n, 3) for n in (1, 2, 3)]
    total = sum(r["tuples"] for r in reports)
    fails = [f for r in reports for f in r["failures"]]
    assert record(2, not fails, f"{total} tuples, {len(fails)} failures"), fails


def test_criterion_3_canonicalize_sound():
    reports = [suites.canonicalize_all(n, 3) for n in (1, 2)]
    total = sum(r["checked"] for r in reports)
    fails = [f for r in reports for f in r["failures"]]
    assert record(3, not fails, f"{total} (shape, V) pairs, {len(fails)} failures"), fails


def test_criterion_4_catalogue():
    r = suites.catalogue(7)
    ok = not r["missing"] and not r["extra"]
    record(4, ok, f"found {len(r['found'])}, missing {r['missing']}, extra {r['extra']}")
    assert not r["missing"], r["missing"]
    assert not r["extra"], r["extra"]


def test_criterion_5_double_cosets():
    r = suites.cor93(3, 3)
    pars = [double_coset_count(None, a, sum(a), 3)
            for k in range(1, 5) for a in suites_compositions(k)]
    bad = [x for x in pars if not x["match"]]
    h = r["hashimoto"]
    ok = r["pass"] and not bad and h["orbit_count"] == 9
    assert record(5, ok, f"Hashimoto {h['orbit_count']} = {h['formula']}, "
                         f"{len(pars)} parabolics, {len(bad)} mismatches")


def suites_compositions(k):
    from isoflag.classifier import compositions
    return [c for c in compositions(k) if sum(c) == k]


def test_criterion_6_section_counts():
    r = suites.section_counts(3, 3)
    bad = [c for c in r["configs"] if not c["match"]]
    rel = [c for c in r["configs"] if c["relation"] is not None]
    ok = r["pass"] and bool(rel) and all(c["relation"] for c in rel)
    assert record(6, ok, f"{len(r['configs'])} configurations, {len(bad)} mismatches, "
                         f"{len(rel)} H vs H~ relations"), bad


def test_criterion_7_separation_laws():
    rows, bad = [], []
    for name in ("O6-U3λ", "O6-U4λ", "P14-λ"):
        for p in (3, 5, 7):
            r = verify_separation(name, p)
            rows.append(r)
            if not r["predicate_match"]:
                bad.append(f"{name}@{p}: classes {r['classes']}")
    rig = [stabilizer_rigidity(name, 3) for name in ("O3-Wλ", "O5-fix", "O7-fix")]
    bad += [f"rigidity {r['family']}" for r in rig if not r["plus_minus_identity"]]
    assert record(7, not bad, f"{len(rows)} incidence tables, {len(rig)} rigidity checks; "
                              f"failing: {bad or 'none'}"), bad


def test_criterion_8_dichotomy():
    r = suites.dichotomy((3, 5, 7))
    assert record(8, r["pass"], f"finite {r['finite_counts']}, infinite {r['infinite_counts']}")


def test_criterion_9_grassmann():
    r = suites.grassmann(3)
    assert record(9, r["pass"], f"{len(r['cases'])} H1 x B2 cases, "
                                f"{len(r['projection'])} projection checks")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
