"""Finite-type decision for triple flag varieties of O_{2n+1}, with dimension counts."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .split_form import FlagType

CASES = ("I", "II", "III", "IV")


class InvalidComposition(ValueError):
    pass


def parse_composition(text, n):
    """Parse "1,2", "n", "1^n" or "1^3,2"; "n" stands for the rank."""
    parts = []
    for tok in str(text).replace(" ", "").split(","):
        if not tok:
            raise InvalidComposition(f"empty part in {text!r}")
        m = re.fullmatch(r"(\d+|n)(?:\^(\d+|n))?", tok)
        if not m:
            raise InvalidComposition(f"cannot parse {tok!r}")
        val = n if m.group(1) == "n" else int(m.group(1))
        rep = 1 if m.group(2) is None else (n if m.group(2) == "n" else int(m.group(2)))
        parts += [val] * rep
    if not parts or any(x <= 0 for x in parts):
        raise InvalidComposition(f"parts must be positive in {text!r}")
    if sum(parts) > n:
        raise InvalidComposition(f"{text!r} sums to {sum(parts)} > n = {n}")
    return FlagType(tuple(parts))


def fmt_type(a):
    return "(" + "".join(str(x) for x in a.parts) + ")"


@dataclass(frozen=True)
class TripleType:
    a: FlagType
    b: FlagType
    c: FlagType
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("rank must be positive")
        for t in (self.a, self.b, self.c):
            if not t.parts or t.total > self.n:
                raise ValueError(f"composition {t.parts} does not fit rank {self.n}")

    @classmethod
    def of(cls, a, b, c, n):
        return cls(FlagType(tuple(a)), FlagType(tuple(b)), FlagType(tuple(c)), n)

    def types(self):
        return (self.a, self.b, self.c)

    def __str__(self):
        return "".join(fmt_type(t) for t in self.types())


@dataclass
class Verdict:
    finite: object                 # True, False or "conditional"
    cases: list
    excluded_by: str = None        # proposition label when infinite
    normalized: TripleType = None
    permutation: tuple = ()
    dimT: int = 0
    dimG: int = 0
    notes: list = field(default_factory=list)

    def to_json(self):
        t = self.normalized
        return {
            "finite": self.finite,
            "cases": list(self.cases),
            "excluded_by": self.excluded_by,
            "normalized": [list(x.parts) for x in t.types()] if t else None,
            "permutation": list(self.permutation),
            "dimT": self.dimT,
            "dimG": self.dimG,
        }


def flag_dim(a, n):
    """Dimension of the isotropic flag variety of type a in O_{2n+1}."""
    parts = a.parts if isinstance(a, FlagType) else tuple(a)
    rest = n - sum(parts)
    if rest < 0:
        raise ValueError("type does not fit the rank")
    return n * n - sum(x * (x - 1) // 2 for x in parts) - rest * rest


def group_dim(n):
    return n * (2 * n + 1)


def normalize(t):
    """Reorder so that p <= q <= r, alpha_1 <= beta_1, and sort all three when r = 1.

    Returns (normalized triple, permutation of the original positions).
    """
    types = t.types()
    order = sorted(range(3), key=lambda i: len(types[i].parts))
    lens = [len(types[i].parts) for i in order]
    if lens[0] == lens[1] == 1:
        if lens[2] == 1:
            order = sorted(range(3), key=lambda i: (types[i].parts[0], i))
        else:
            first = sorted(order[:2], key=lambda i: (types[i].parts[0], i))
            order = first + [order[2]]
    a, b, c = (types[i] for i in order)
    return TripleType(a, b, c, t.n), tuple(order)


def matched_cases(t):
    """Cases I-IV met by an already normalized triple with p = q = 1."""
    n = t.n
    al, be = t.a.parts[0], t.b.parts[0]
    r = len(t.c.parts)
    out = []
    if al == be == n:
        out.append("I")
    if al == 1:
        out.append("II")
    if r == 1 and t.c.parts[0] == n:
        out.append("III")
    if r == 2 and be == n:
        out.append("IV")
    return out


def _exclusion(t):
    al, be = t.a.parts[0], t.b.parts[0]
    r = len(t.c.parts)
    if r == 1:
        return "2.15"
    if r >= 3 and be == t.n and al < t.n:
        return "2.19"
    return "2.15"


def is_finite_type(t, square_classes_finite=True):
    """Decide finite type.

    square_classes_finite: True over finite fields (and R, algebraically
    closed fields), False for fields such as Q, None when unknown.
    """
    nt, perm = normalize(t)
    dimT = sum(flag_dim(x, t.n) for x in t.types())
    v = Verdict(False, [], None, nt, perm, dimT, group_dim(t.n))
    if len(nt.b.parts) >= 2:
        v.excluded_by = "1.2"
        return v
    cases = matched_cases(nt)
    if not cases:
        v.excluded_by = _exclusion(nt)
        return v
    v.cases = cases
    gamma1 = nt.c.parts[0]
    tight = max(nt.a.parts[0], nt.b.parts[0], gamma1) < t.n
    if tight and square_classes_finite is False:
        v.excluded_by = "1.4"
        v.cases = []
        return v
    if tight and square_classes_finite is None:
        v.finite = "conditional"
        v.notes.append("finite iff the field has finitely many square classes")
        return v
    v.finite = True
    return v


def classify_multiple(types, n, square_classes_finite=True):
    """Finite type for a product of k flag varieties."""
    k = len(types)
    types = [x if isinstance(x, FlagType) else FlagType(tuple(x)) for x in types]
    if k <= 2:
        return {"finite": True, "reason": "Bruhat decomposition"}
    if k >= 4:
        return {"finite": False, "reason": "1.1"}
    v = is_finite_type(TripleType(*types, n), square_classes_finite)
    return {"finite": v.finite, "reason": v.cases or v.excluded_by}


def compositions(total_max):
    """All compositions with sum between 1 and total_max."""
    out = []

    def rec(prefix, left):
        if prefix:
            out.append(tuple(prefix))
        for x in range(1, left + 1):
            rec(prefix + [x], left - x)

    rec([], total_max)
    return out


def normalized_triples(n):
    """Every triple in normal position with p = q = 1."""
    comps = compositions(n)
    for al in range(1, n + 1):
        for be in range(al, n + 1):
            for c in comps:
                if len(c) == 1 and c[0] < be:
                    continue
                yield TripleType.of((al,), (be,), c, n)


def equality_catalogue(n_max, square_classes_finite=True):
    """Finite-type triples with dim T = dim G, for every rank up to n_max."""
    out = []
    for n in range(1, n_max + 1):
        for t in normalized_triples(n):
            v = is_finite_type(t, square_classes_finite)
            if v.finite is True and v.dimT == v.dimG:
                out.append(t)
    return out
