"""Parametric flag families that separate orbits, checked over GF(p).

Each family is a tuple of isotropic flags depending on a parameter λ.
The leading flags are the same for every λ and the last one moves.
Same-orbit questions are decided two ways:

* route A: the orbit of the moving flag under the stabilizer of the fixed
  flags.  When the fixed part is a pair of subspaces the stabilizer is
  generated by r_generators after moving the pair to its model; otherwise
  the (small) joint stabilizer is enumerated outright.
* route B: a direct search for g in O_{2n+1}(p) with g t_λ = t_μ.

Both must agree, and the resulting incidence is compared with the
family's separation predicate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .canonical import normalize_pair
from .exact_linalg import Field, Subspace
from .orbit_oracle import (
    PointSet, act, closure_points, orthogonal_maps, point_array, stabilizer_elements,
)
from .split_form import IsotropicFlag, dim_of, is_isotropic
from .stabilizer_gens import r_generators

INF = "inf"


class FamilyError(ValueError):
    pass


def _vec(F, N, coeffs):
    """Vector from {1-based index: coefficient}."""
    v = [F.zero] * N
    for i, c in coeffs.items():
        if not 1 <= i <= N:
            raise FamilyError(f"index e_{i} outside F^{N}")
        v[i - 1] = F.red(v[i - 1] + F(c))
    return tuple(v)


def _U(k):
    """Coordinates of U_[k] = span(e_1..e_k), 1-based."""
    return [{i: 1} for i in range(1, k + 1)]


def _span(F, N, vecs):
    return Subspace.span(F, [_vec(F, N, c) for c in vecs], N)


def _flag(F, N, *members):
    """Nested flag from coefficient lists; each member lists its own vectors."""
    spaces = [_span(F, N, m) for m in members]
    return IsotropicFlag.from_subspaces(spaces)


def _iota(shift):
    """Isometric inclusion f_i -> e_{i+shift} on coefficient dicts."""
    return lambda c: {i + shift: x for i, x in c.items()}


def _need(cond, msg):
    if not cond:
        raise FamilyError(msg)


# -- the families -------------------------------------------------------------

def _o3(F, n, lam, ell=(1, 1, 1, 1)):
    N = dim_of(n)
    _need(all(1 <= x <= n for x in ell), "each part must lie in 1..n")
    _need(F(lam) != 0, "λ must be nonzero")

    def W(l):
        l = F(l)
        return {n: l, n + 1: 1, n + 2: F.red(-F.inv(F.red(2 * l)))}

    return (
        _flag(F, N, [{n: 1}] + _U(ell[0] - 1)),
        _flag(F, N, [{n + 2: 1}] + _U(ell[1] - 1)),
        _flag(F, N, [W(1)] + _U(ell[2] - 1)),
        _flag(F, N, [W(lam)] + _U(ell[3] - 1)),
    )


def _o5(F, n, lam, b=(1, 1), c=(1, 1)):
    # lines W of U = span(f_4, f_5): f_4 + λ f_5, and f_5 for λ = inf
    N = dim_of(n)
    _need(n >= 2, "needs n >= 2")
    _need(b[0] + b[1] <= n and c[0] + c[1] <= n, "composition too large")
    io = _iota(n - 2)
    Up = {1: 1, 3: 1, 5: -F.half}
    W = {5: 1} if lam == INF else {4: 1, 5: lam}
    return (
        _flag(F, N, [io(Up)]),
        _flag(F, N, [{n - 1: 1, n: 1}] + _U(b[0] - 1),
              [{n - 1: 1}, {n: 1}] + _U(b[0] + b[1] - 2)),
        _flag(F, N, [io(W)] + _U(c[0] - 1),
              [{n + 2: 1}, {n + 3: 1}] + _U(c[0] + c[1] - 2)),
    )


def _u3(lam):
    return [{1: 1, 3: 1, 5: 1}, {2: lam, 4: -1, 6: 1 - lam}]


def _o6_fixed(F, n, a, b):
    _need(n >= 3, "needs n >= 3")
    _need(2 <= a <= n - 1 and 2 <= b <= n - 1, "needs 2 <= α1, β1 <= n - 1")
    N = dim_of(n)
    return (
        _flag(F, N, [{n - 2: 1}, {n - 1: 1}] + _U(a - 2)),
        _flag(F, N, [{n + 3: 1}, {n + 4: 1}] + _U(b - 2)),
    )


def _embed6(n):
    # f1..f3 -> e_{n-2}..e_n and f4..f6 -> e_{n+2}..e_{n+4}
    def f(c):
        return {(i + n - 3 if i <= 3 else i + n - 2): x for i, x in c.items()}
    return f


def _o6_u3(F, n, lam, a=2, b=2, g=2):
    _need(2 <= g <= n, "needs 2 <= γ1 <= n")
    _need(max(a - 2, b - 2, g - 2) <= n - 3, "U_[k] overlaps the embedded block")
    fixed = _o6_fixed(F, n, a, b)
    io = _embed6(n)
    N = dim_of(n)
    return fixed + (_flag(F, N, [io(c) for c in _u3(F(lam))] + _U(g - 2)),)


def _o6_u4(F, n, lam, a=2, b=2):
    _need(max(a - 2, b - 2) <= n - 3, "U_[k] overlaps the embedded block")
    fixed = _o6_fixed(F, n, a, b)
    io = _embed6(n)
    N = dim_of(n)
    lam = F(lam)
    u4 = {1: lam, 3: -1, 5: 1 - lam}
    u5 = [{1: 1, 5: -1}, {1: 1, 3: -1}, {2: 1, 4: 1, 6: 1}]
    return fixed + (_flag(F, N, [io(u4)], [io(c) for c in u5] + _U(n - 3)),)


def _o7(F, n, lam, a=2, b=None, c=(1, 1, 1)):
    # W runs over maximal isotropics containing span(f_1, f_2):
    # f_3 + λ f_4 - λ²/2 f_5, and f_5 for λ = inf
    _need(n >= 3, "needs n >= 3")
    b = n if b is None else b
    _need(2 <= a and 3 <= b <= n and sum(c) <= n, "composition out of range")
    _need(max(a - 2, b - 3, sum(c) - 3) <= n - 3, "U_[k] overlaps the embedded block")
    N = dim_of(n)
    io = _iota(n - 3)
    h = F.half
    U = [{2: 1, 3: 1}, {1: 1, 4: 1, 7: -h}, {5: 1, 6: -1}]
    if lam == INF:
        w = {5: 1}
    else:
        lam = F(lam)
        w = {3: 1, 4: lam, 5: F.red(-lam * lam * h)}
    g1, g12 = c[0], c[0] + c[1]
    return (
        _flag(F, N, [{n + 3: 1}, {n + 4: 1}] + _U(a - 2)),
        _flag(F, N, [io(u) for u in U] + _U(b - 3)),
        _flag(F, N,
              [{n - 2: 1, n - 1: 1}] + _U(g1 - 1),
              [{n - 2: 1}, {n - 1: 1}] + _U(g12 - 2),
              [io({1: 1}), io({2: 1}), io(w)] + _U(sum(c) - 3)),
    )


def _p14(F, n, lam, a=1, b=1, g=1):
    _need(max(a, b, g) < n, "needs max(α1, β1, γ1) < n")
    _need(F(lam) != 0, "λ must be nonzero")
    N = dim_of(n)
    lam = F(lam)
    v = {n - 1: 1, n: 1, n + 2: lam, n + 3: F.red(-lam)}
    return (
        _flag(F, N, _U(a - 1) + [{n - 1: 1}]),
        _flag(F, N, _U(b - 1) + [{n + 3: 1}]),
        _flag(F, N, _U(g - 1) + [v]),
    )


def _is_square_ratio(F, lam, mu):
    return F.sqrt(F.div(F(lam), F(mu))) is not None


@dataclass(frozen=True)
class Family:
    name: str
    min_n: int
    builder: object
    domain: object          # F -> list of parameters
    predicate: object       # (F, λ, μ) -> bool, the separation law
    rigid_n: int = None     # rank of the rigidity configuration, if any


def _nonzero(F):
    return list(F.units())


def _all(F):
    return list(F.elements())


def _projective(F):
    return list(F.elements()) + [INF]


FAMILIES = {
    "O3-Wλ": Family("O3-Wλ", 1, _o3, _nonzero, lambda F, l, m: l == m, rigid_n=1),
    "O5-fix": Family("O5-fix", 2, _o5, _projective, lambda F, l, m: l == m, rigid_n=2),
    "O6-U3λ": Family("O6-U3λ", 3, _o6_u3, _all,
                     lambda F, l, m: m in (l, F.red(1 - l))),
    "O6-U4λ": Family("O6-U4λ", 3, _o6_u4, _all, lambda F, l, m: l == m),
    "O7-fix": Family("O7-fix", 3, _o7, _projective, lambda F, l, m: l == m, rigid_n=3),
    "P14-λ": Family("P14-λ", 2, _p14, _nonzero, _is_square_ratio),
}

ALIASES = {"O3-W": "O3-Wλ", "O6-U3": "O6-U3λ", "O6-U4": "O6-U4λ", "P14": "P14-λ"}


def get_family(name):
    name = ALIASES.get(name, name)
    if name not in FAMILIES:
        raise FamilyError(f"unknown family {name!r}; known: {sorted(FAMILIES)}")
    return FAMILIES[name]


def build_family(name, n, lam, p, **dims):
    """The tuple of flags t_λ; keyword arguments set the composition parts."""
    fam = get_family(name)
    if n < fam.min_n:
        raise FamilyError(f"{fam.name} needs n >= {fam.min_n}")
    F = Field(p)
    if lam != INF:
        lam = F(lam)
    if lam not in fam.domain(F):
        raise FamilyError(f"λ = {lam} is outside the domain of {fam.name}")
    flags = fam.builder(F, n, lam, **dims)
    for fl in flags:
        if not is_isotropic(fl.spaces[-1], n):
            raise AssertionError("family member is not isotropic")
    return flags


# -- separation ---------------------------------------------------------------

def _split(flags_by_lam):
    """Positions of the subspaces shared by every t_λ, and of the varying ones."""
    flat = {l: [S for fl in t for S in fl.spaces] for l, t in flags_by_lam.items()}
    rows = list(flat.values())
    fixed = [i for i in range(len(rows[0])) if all(r[i] == rows[0][i] for r in rows)]
    moving = [i for i in range(len(rows[0])) if i not in fixed]
    return flat, fixed, moving


def _label_orbits(moved, orbit_of, p):
    """Union the parameters whose moving parts share an orbit."""
    labels = {}
    for l in moved:
        if l in labels:
            continue
        orb = orbit_of(moved[l])
        for m in moved:
            if m not in labels and orb.index(point_array([moved[m]], p)[0])[0] >= 0:
                labels[m] = l
    return labels


def _route_pair(flat, fixed, moving, n, p):
    """Stabilizer of two subspaces: generated by r_generators once they are in model position."""
    first = next(iter(flat.values()))
    g, shape = normalize_pair(first[fixed[0]], first[fixed[1]], n)
    gens = r_generators(shape, p)
    moved = {l: tuple(g.image(r[i]) for i in moving) for l, r in flat.items()}
    _, dims, _ = point_array(list(moved.values()), p)

    def orbit_of(pt):
        return closure_points(point_array([pt], p)[0], gens, dims, p)

    return _label_orbits(moved, orbit_of, p)


def _route_stabilizer(flat, fixed, moving, n, p):
    """Any other fixed part: act by the enumerated joint stabilizer."""
    first = next(iter(flat.values()))
    stab = np.array(stabilizer_elements(n, p, [first[i] for i in fixed]), dtype=np.int64)
    moved = {l: tuple(r[i] for i in moving) for l, r in flat.items()}

    def orbit_of(pt):
        arr, dims, N = point_array([pt], p)
        return PointSet(p, N, dims, np.concatenate([act(arr, g, dims, p) for g in stab]))

    return _label_orbits(moved, orbit_of, p), len(stab)


def _transporter(flat_a, flat_b, moving, n, p):
    # moving subspaces first: they pin the search down fastest
    order = list(moving) + [i for i in range(len(flat_a)) if i not in moving]
    return bool(orthogonal_maps(n, p, [(flat_a[i], flat_b[i]) for i in order], limit=1))


def _classes(labels, domain):
    groups = {}
    for l in domain:
        groups.setdefault(labels[l], []).append(l)
    return [groups[k] for k in sorted(groups, key=domain.index)]


def _is_equivalence(rel, domain):
    refl = all(rel[(l, l)] for l in domain)
    sym = all(rel[(l, m)] == rel[(m, l)] for l in domain for m in domain)
    trans = all(rel[(l, k)] or not (rel[(l, m)] and rel[(m, k)])
                for l in domain for m in domain for k in domain)
    return refl and sym and trans


def verify_separation(name, p, n=None, route_b=True, **dims):
    """Incidence table of t_λ ~ t_μ over GF(p), against the separation law.

    ``necessity`` records that every same-orbit pair satisfies the law;
    ``predicate_match`` that the incidence is exactly the law.
    """
    fam = get_family(name)
    n = fam.min_n if n is None else n
    F = Field(p)
    domain = fam.domain(F)
    flags = {l: build_family(fam.name, n, l, p, **dims) for l in domain}
    flat, fixed, moving = _split(flags)
    report = {"family": fam.name, "p": p, "n": n}
    if len(fixed) == 2 and all(len(fl.spaces) == 1 for fl in flags[domain[0]][:2]):
        labels = _route_pair(flat, fixed, moving, n, p)
        report["route_a"] = "pair stabilizer generators"
    else:
        labels, order = _route_stabilizer(flat, fixed, moving, n, p)
        report["route_a"] = "enumerated joint stabilizer"
        report["joint_stabilizer_order"] = order
    same = {(l, m): labels[l] == labels[m] for l in domain for m in domain}
    law = {(l, m): bool(fam.predicate(F, l, m)) if INF not in (l, m) else l == m
           for l in domain for m in domain}
    mismatches = [{"lambda": l, "mu": m, "same_orbit": s, "predicate": law[(l, m)]}
                  for (l, m), s in same.items() if s != law[(l, m)]]
    if route_b:
        rel = {(l, m): _transporter(flat[l], flat[m], moving, n, p)
               for l in domain for m in domain}
        report["route_b_disagreements"] = [[l, m] for (l, m), s in rel.items() if s != same[(l, m)]]
        report["route_b_equivalence"] = _is_equivalence(rel, domain)
    report["classes"] = _classes(labels, domain)
    report["class_count"] = len(report["classes"])
    report["mismatches"] = mismatches
    report["necessity"] = all(law[k] for k, s in same.items() if s)
    report["routes_agree"] = not report.get("route_b_disagreements")
    report["predicate_match"] = not mismatches and report["routes_agree"]
    return report


# -- rigidity -----------------------------------------------------------------

def rigidity_configuration(name, p):
    """The subspaces whose joint stabilizer should be {±id}."""
    fam = get_family(name)
    if fam.rigid_n is None:
        raise FamilyError(f"{fam.name} has no rigidity configuration")
    F = Field(p)
    n = fam.rigid_n
    N = dim_of(n)
    if fam.name == "O3-Wλ":
        flags = _o3(F, 1, 1)[:3]
    elif fam.name == "O5-fix":
        h = F.half
        flags = (_flag(F, N, [{1: 1, 2: 1}], [{1: 1}, {2: 1}]),
                 _flag(F, N, [{4: 1}, {5: 1}]),
                 _flag(F, N, [{1: 1, 3: 1, 5: -h}]))
    else:
        h = F.half
        flags = (_flag(F, N, [{1: 1, 2: 1}]),
                 _flag(F, N, [{1: 1}, {2: 1}]),
                 _flag(F, N, [{6: 1}, {7: 1}]),
                 _flag(F, N, [{2: 1, 3: 1}, {1: 1, 4: 1, 7: -h}, {5: 1, 6: -1}]))
    return n, [S for fl in flags for S in fl.spaces]


def stabilizer_rigidity(name, p):
    """Enumerate the stabilizer of the configuration and compare with {±id}."""
    n, spaces = rigidity_configuration(name, p)
    N = dim_of(n)
    stab = stabilizer_elements(n, p, spaces)
    got = sorted(tuple(int(x) for x in np.asarray(g).ravel()) for g in stab)
    I = np.eye(N, dtype=np.int64)
    want = sorted(tuple(int(x) for x in (s * I % p).ravel()) for s in (1, p - 1))
    return {"family": get_family(name).name, "p": p, "n": n, "order": len(stab),
            "plus_minus_identity": got == want}
