"""Command line: classify, canonicalize, verify.  JSON goes to stdout with sorted keys."""
from __future__ import annotations

import json
import sys
import time

import click

from . import suites
from .canonical import StageFailure, canonicalize
from .classifier import InvalidComposition, TripleType, is_finite_type, parse_composition
from .exact_linalg import BudgetExceeded, Field, Subspace, parse_matrices
from .invariants import NotNormalized, is_normalized, pair_shape
from .split_form import dim_of
from .witness_families import FamilyError

EXIT_OK, EXIT_INPUT, EXIT_STAGE, EXIT_MISMATCH, EXIT_BUDGET = 0, 2, 3, 4, 5


def _plain(x):
    """Turn numpy scalars, tuples and sets into plain JSON values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set)):
        return [_plain(v) for v in x]
    if hasattr(x, "item"):
        return x.item()
    return x


def emit(obj):
    click.echo(json.dumps(_plain(obj), sort_keys=True))


def fail(msg, code):
    click.echo(msg, err=True)
    sys.exit(code)


@click.group()
def main():
    """Orbit classification on triple flag varieties of O(2n+1)."""


@main.command()
@click.option("--a", "a_", required=True, help="first composition, e.g. 2 or 1,1 or 1^n")
@click.option("--b", "b_", required=True)
@click.option("--c", "c_", required=True)
@click.option("--n", type=click.IntRange(min=1), required=True)
@click.option("--square-classes", type=click.Choice(["finite", "infinite", "unknown"]),
              default="finite", show_default=True)
def classify(a_, b_, c_, n, square_classes):
    """Finite-type verdict with dimensions."""
    try:
        t = TripleType(*(parse_composition(x, n) for x in (a_, b_, c_)), n)
    except (InvalidComposition, ValueError) as e:
        fail(f"invalid composition: {e}", EXIT_INPUT)
    sq = {"finite": True, "infinite": False, "unknown": None}[square_classes]
    emit(is_finite_type(t, sq).to_json())


def _read_spaces(path, count=None):
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines()
                 if ln.strip() and not ln.lstrip().startswith("#")]
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError("header must be 'n p'")
    n, p = int(head[0]), int(head[1])
    mats = parse_matrices("\n".join(lines[1:]), count)
    F = Field(p)
    out = []
    for M in mats:
        if M.field != F or M.ncols != dim_of(n):
            raise ValueError("matrix does not live in F^(2n+1)")
        out.append(Subspace.span(F, M.rows, M.ncols))
    return n, p, out


@main.command(name="canonicalize")
@click.option("--n", type=click.IntRange(min=1), required=True)
@click.option("--p", type=int, required=True)
@click.option("--pair", "pair_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="'n p' header, then the matrices of U+ and U-")
@click.option("--v", "v_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="'n p' header, then the matrix of V")
def canonicalize_cmd(n, p, pair_path, v_path):
    """Move V to its representative with g fixing the normalized pair."""
    try:
        n1, p1, (Up, Um) = _read_spaces(pair_path, 2)
        n2, p2, (V,) = _read_spaces(v_path, 1)
        if (n1, p1) != (n, p) or (n2, p2) != (n, p):
            raise ValueError("file headers do not match --n/--p")
        shape = pair_shape(Up, Um, n)
        if not is_normalized(Up, Um, shape):
            raise ValueError("pair is not in model position")
        t0 = time.perf_counter()
        g, t, trace = canonicalize(Up, Um, V, n, shape)
    except StageFailure as e:
        emit({"error": str(e), "stage": e.label})
        sys.exit(EXIT_STAGE)
    except (ValueError, NotNormalized, IndexError) as e:
        fail(f"input error: {e}", EXIT_INPUT)
    click.echo(f"canonicalize: {time.perf_counter() - t0:.3f}s", err=True)
    emit({"tuple": t.to_json(), "g": [list(r) for r in g.mat.rows],
          "trace": trace.labels()})


def _run_suite(name, n, p, seed):
    fams = suites.family_suite_names()
    if name == "th310":
        return suites.th310(n, p)
    if name == "roundtrip":
        return suites.roundtrip(n, p)
    if name == "canonicalize":
        return suites.canonicalize_all(n, p)
    if name == "canon-sample":
        if seed is None:
            raise click.UsageError("canon-sample needs --seed")
        r = suites.canonicalize_all(n, p, sample=50, seed=seed)
        r["seed"] = seed
        return r
    if name == "catalogue":
        return suites.catalogue(n)
    if name == "cor93":
        return suites.cor93(n, p)
    if name == "section-counts":
        return suites.section_counts(p, n)
    if name == "grassmann":
        return suites.grassmann(p)
    if name == "dichotomy":
        return suites.dichotomy()
    if name.startswith("rigidity-"):
        return suites.rigidity(fams[name], p)
    return suites.family(fams[name], p)


@main.command()
@click.option("--suite", required=True, type=click.Choice(suites.SUITES))
@click.option("--n", type=click.IntRange(min=1), default=None,
              help="rank (or GL size for cor93); defaults per suite")
@click.option("--p", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=None, help="required by sampled suites")
def verify(suite, n, p, seed):
    """Run a verification suite; exit 0 on pass, 4 on mismatch."""
    defaults = {"catalogue": 7, "section-counts": 3}
    n = n if n is not None else defaults.get(suite, 2 if suite != "cor93" else 3)
    try:
        Field(p)
    except ValueError as e:
        fail(f"input error: {e}", EXIT_INPUT)
    t0 = time.perf_counter()
    try:
        report = _run_suite(suite, n, p, seed)
    except BudgetExceeded as e:
        emit({"suite": suite, "error": str(e), "pass": False})
        sys.exit(EXIT_BUDGET)
    except (FamilyError, ValueError) as e:
        fail(f"input error: {e}", EXIT_INPUT)
    click.echo(f"{suite}: {time.perf_counter() - t0:.2f}s", err=True)
    emit(report)
    sys.exit(EXIT_OK if report["pass"] else EXIT_MISMATCH)


if __name__ == "__main__":
    main()
