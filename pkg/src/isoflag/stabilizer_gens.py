"""Generating sets for R = Stab(U+) ∩ Stab(U-) and for elements of R_V.

Every element is checked when it is added: it must preserve the form (by
OrthElement construction) and stabilize the subspaces of its context.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .canonical import layout, representative, z
from .exact_linalg import Field, Mat, Subspace, unit
from .split_form import (
    OrthElement, bar, dim_of, dual_pair_map, embed, sign_permutation,
    to_internal, unipotent_XZ,
)


class NotInContext(AssertionError):
    pass


@dataclass
class GeneratorSet:
    n: int
    p: int
    context: str
    fixed: tuple                      # subspaces every element must stabilize
    elements: list = field(default_factory=list)
    tags: list = field(default_factory=list)
    _seen: set = field(default_factory=set, repr=False)

    @property
    def field(self):
        return Field(self.p)

    def add(self, g, tag):
        for S in self.fixed:
            if g.image(S) != S:
                raise NotInContext(f"{tag}: element does not stabilize {self.context}")
        if g.is_identity() or g.mat.rows in self._seen:
            return
        self._seen.add(g.mat.rows)
        self.elements.append(g)
        self.tags.append(tag)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def to_json(self):
        return [{"tag": t, "matrix": g.mat.tolist()} for g, t in zip(self.elements, self.tags)]


# -- small building blocks ------------------------------------------------------

def gl_generators(F, k):
    """Elementary transvections E + e_ab and a primitive-root diagonal entry."""
    out = []
    if k == 0:
        return out
    for a in range(k):
        for b in range(k):
            if a != b:
                rows = [[F.one if i == j else F.zero for j in range(k)] for i in range(k)]
                rows[a][b] = F.one
                out.append(Mat(F, tuple(tuple(r) for r in rows), k))
    w = F.primitive_root() if F.finite else F(2)
    rows = [[F.one if i == j else F.zero for j in range(k)] for i in range(k)]
    rows[0][0] = F(w)
    out.append(Mat(F, tuple(tuple(r) for r in rows), k))
    return out


REFLECTION_LIMIT = 400


def orthogonal_generators(F, k, kind="auto"):
    """Generators of O_{2k+1} acting on F^{2k+1} with the split form.

    ``structured``: Levi GL_k, elementary unipotents, one bar swap and the
    reflection in the middle vector (parabolic plus Weyl representatives).
    ``reflections``: reflections in every anisotropic vector, finite fields
    only.  ``auto`` picks reflections while there are at most
    REFLECTION_LIMIT of them.
    """
    N = 2 * k + 1
    if kind == "auto":
        kind = "reflections" if F.finite and F.p ** N <= REFLECTION_LIMIT * (F.p - 1) else "structured"
    if kind == "reflections":
        return _reflections(F, k)
    out = []
    for A in gl_generators(F, k):
        out.append(dual_pair_map(A, list(range(k)), k))
    if k:
        # g(X, Z) relative to span(e_1..e_k): single X entries and single free Z entries
        m = 1
        for i in range(k):
            X = Mat(F, tuple(tuple(F.one if r == i else F.zero for _ in range(m)) for r in range(k)), m)
            out.append(unipotent_XZ(X, {}, k, k))
        for i in range(k):
            for j in range(k):
                if i + j + 2 <= k:
                    out.append(unipotent_XZ(Mat.zeros(F, k, m), {(i, j): 1}, k, k))
        perm = list(range(N))
        perm[0], perm[N - 1] = N - 1, 0
        out.append(sign_permutation(perm, k, F))
    minus = [[F.one if i == j else F.zero for j in range(N)] for i in range(N)]
    minus[k][k] = F(-1)
    out.append(OrthElement(k, Mat(F, tuple(tuple(r) for r in minus), N)))
    return out


def _reflections(F, k):
    from itertools import product
    from .split_form import form
    N = 2 * k + 1
    out = []
    seen = set()
    for v in product(range(F.p), repeat=N):
        q = form(F, v, v)
        if not q:
            continue
        # normalize the line so each reflection appears once
        lead = next(x for x in v if x)
        inv = F.inv(lead)
        key = tuple(F.red(x * inv) for x in v)
        if key in seen:
            continue
        seen.add(key)
        # s_v(x) = x - 2 (x, v)/(v, v) v
        c = F.red(2 * F.inv(q))
        cols = []
        for j in range(N):
            e = unit(F, N, j)
            t = F.red(c * form(F, e, v))
            cols.append(tuple(F.red(a - t * b) for a, b in zip(e, v)))
        out.append(OrthElement(k, Mat.from_columns(F, cols, N)))
    return out


def g_generators(F, n, kind="structured"):
    """Generators of the whole group O_{2n+1}."""
    return orthogonal_generators(F, n, kind)


# -- R = P_{U+} ∩ P_{U-} -----------------------------------------------------------

def r_generators(shape, p, o_kind="auto"):
    F = Field(p)
    n = shape.n
    N = dim_of(n)
    Up, Um = shape.model_pair(F)
    gs = GeneratorSet(n, p, "R", (Up, Um))
    d, a0, ap, am, a1 = shape.d, shape.a0, shape.ap, shape.am, shape.a1
    # L_W ∩ R: block upper triangular [[A, Y1, Y2], [0, B, 0], [0, 0, C]] on W
    for name, blk in (("A", list(shape.W0)), ("B", list(shape.Wp)), ("C", list(shape.Wm))):
        for M in gl_generators(F, len(blk)):
            gs.add(dual_pair_map(M, blk, n), f"LW-{name}")
    for name, cols in (("Y1", list(shape.Wp)), ("Y2", list(shape.Wm))):
        for r in shape.W0:
            for c in cols:
                rows = [[F.one if i == j else F.zero for j in range(d)] for i in range(d)]
                rows[r][c] = F.one
                gs.add(dual_pair_map(Mat(F, tuple(tuple(x) for x in rows), d), list(range(d)), n),
                       f"LW-{name}")
    # L_U ∩ R: GL(a1) on U(+) with its dual on U(-), and O(Z0)
    for M in gl_generators(F, a1):
        gs.add(dual_pair_map(M, list(shape.Up), n), "LU-D")
    for h in orthogonal_generators(F, shape.a2, o_kind):
        gs.add(embed(h.mat, list(shape.Z0), n), "LU-O")
    # N_W ∩ R: single admissible X entries and single free Z entries
    m = shape.m
    if d:
        for i in range(d):
            for j in range(m):
                if i in shape.Wm and j < a1:
                    continue
                if i in shape.Wp and j >= m - a1:
                    continue
                X = [[F.zero] * m for _ in range(d)]
                X[i][j] = F.one
                gs.add(unipotent_XZ(Mat(F, tuple(tuple(r) for r in X), m), {}, d, n), "NW-X")
        for i in range(d):
            for j in range(d):
                if i + j + 2 <= d:
                    gs.add(unipotent_XZ(Mat.zeros(F, d, m), {(i, j): 1}, d, n), "NW-Z")
    return gs


# -- elements of R_V for V = V(b, eps) ----------------------------------------------

# block labels: 1..15 and the barred index sets of U+
B6, B8, B12 = "6b", "8b", "12b"
_ORDER = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, B12, B8, B6]

# phi: W_<k> -> W_<i> for adjacent blocks, as {role of k: {role of i: coeff}}
_BASE = {
    (1, 2): {"x": {"x": 1}},
    (1, 3): {"x": {"x": 1}},
    (2, 7): {"x": {"x": 1}, "eta": {"x": -1}},
    (3, 7): {"x": {"x": 1}, "eta": {}},
    (7, 8): {"x": {"x": 1}, "eta": {"eta": 1}},
    (8, 10): {"x": {"x": 1}},
    (3, 5): {"x": {"x": 1}},
    (5, 9): {"x": {"x": 1}, "eta": {}},
    (7, 9): {"x": {"x": 1}, "eta": {"eta": 1}},
    (9, 12): {"x": {"x": 1}, "kappa": {"eta": 1}, "lambda": {"eta": 1}},
    (8, 12): {"x": {"x": 1}, "kappa": {"eta": 1}, "lambda": {"x": -1}},
    (12, 13): {"x": {"x": 1}, "eta": {"kappa": 1}},
    (10, 13): {"x": {"x": 1}, "eta": {"x": -1}},
    (13, B12): {"x": {"x": 1}, "lb": {"eta": 1}, "b": {}},
    (B12, B8): {"x": {"x": 1}, "b": {"b": 1, "lb": -1}},
    (B8, B6): {"x": {"x": 1}},
}


def _edges():
    out = {}
    for (j, jp) in _BASE:
        out.setdefault(j, []).append(jp)
    return out


def block_paths(j, jp):
    """All chains j <- ... <- jp through adjacent blocks, avoiding 15."""
    E = _edges()
    out = []

    def walk(cur, path):
        if cur == jp:
            out.append(path)
            return
        for nxt in E.get(cur, []):
            walk(nxt, path + [nxt])
    walk(j, [j])
    return out


def _rank(label):
    return _ORDER.index(label)


def chosen_path(j, jp):
    """The lexicographically smallest chain (by block order) from j up to jp."""
    paths = block_paths(j, jp)
    if not paths:
        return None
    return min(paths, key=lambda pth: [_rank(x) for x in pth])


def _compose(outer, inner):
    """outer ∘ inner on role dictionaries."""
    res = {}
    for rk, img in inner.items():
        acc = {}
        for mid, c in img.items():
            for ri, c2 in outer.get(mid, {}).items():
                acc[ri] = acc.get(ri, 0) + c * c2
        res[rk] = {r: c for r, c in acc.items() if c}
    return res


def role_map(j, jp):
    path = chosen_path(j, jp)
    if path is None:
        return None
    phi = None
    for a, b in zip(path, path[1:]):
        step = _BASE[(a, b)]
        phi = step if phi is None else _compose(phi, step)
    return phi


def block_indices(L, label):
    """1-based indices of the index set I_(label) inside U+ (or I_(j))."""
    if label == B6:
        return sorted(L.bar(i) for i in L.I[6])
    if label == B8:
        return sorted(L.bar(L.eta[8][i]) for i in L.I[8])
    if label == B12:
        return sorted(L.bar(L.kappa[i]) for i in L.I[12])
    if label == 9:
        # the U+ half of each summand of type 9 is eta_9(i), not i
        return sorted(L.eta[9][i] for i in L.I[9])
    return list(L.I[label])


def roles(L, label, i):
    """role -> 1-based index for the summand W_<i>, i in I_(label)."""
    if label == 9:
        ip = next(k for k in L.I[9] if L.eta[9][k] == i)
        return {"x": i, "eta": ip}
    if label in (7, 8, 13):
        return {"x": i, "eta": L.eta[label][i]}
    if label == 12:
        return {"x": i, "kappa": L.kappa[i], "lambda": L.lam[i]}
    if label == B8:
        ip = next(k for k in L.I[8] if L.bar(L.eta[8][k]) == i)
        return {"x": i, "b": L.bar(ip)}
    if label == B12:
        ip = next(k for k in L.I[12] if L.bar(L.kappa[k]) == i)
        return {"x": i, "b": L.bar(ip), "lb": L.bar(L.lam[ip])}
    return {"x": i}


def _phi_matrix(F, L, phi_roles, rk, ri):
    """phi as {index of W_<k>: {index of W_<i>: coeff}} (1-based)."""
    out = {}
    for role, idx in rk.items():
        img = phi_roles.get(role, {})
        out[idx] = {ri[r]: F(c) for r, c in img.items()}
    return out


def _adjoint(F, L, phi, Ik, Ii):
    """phi^*: W̄_<i> -> W̄_<k> with (phi x, y) = (x, phi^* y)."""
    out = {}
    for m in (L.bar(i) for i in Ii):
        acc = {}
        for l in Ik:
            c = phi.get(l, {}).get(L.bar(m), 0)
            if c:
                acc[L.bar(l)] = F.red(acc.get(L.bar(l), 0) + c)
        out[m] = acc
    return out


def _g_from_phi(F, L, n, phi, Ik, Ii, mu, quadratic=False):
    N = dim_of(n)
    cols = [list(unit(F, N, j)) for j in range(N)]
    mu = F(mu)
    phis = _adjoint(F, L, phi, Ik, Ii)
    for l in Ik:
        for t, c in phi.get(l, {}).items():
            cols[l - 1][t - 1] = F.red(cols[l - 1][t - 1] + mu * c)
    for m, img in phis.items():
        for t, c in img.items():
            cols[m - 1][t - 1] = F.red(cols[m - 1][t - 1] - mu * c)
        if quadratic:
            # - mu^2/2 phi phi^*(e_m)
            h = F.half
            for t, c in img.items():
                for t2, c2 in phi.get(t, {}).items():
                    cols[m - 1][t2 - 1] = F.red(cols[m - 1][t2 - 1] - mu * mu * h * c * c2)
    return OrthElement(n, Mat.from_columns(F, [tuple(c) for c in cols], N))


def _I_of(L, label, i):
    return list(roles(L, label, i).values())


def _phi15(F, L, eps, i, k):
    """phi_{i,k}: W_<k> -> W_<i> for i in I_(12), k in I_(15), by explicit indices."""
    b15 = len(L.I[15])
    c = L.c
    et = L.eta[15]
    kap, lam = L.kappa[i], L.lam[i]
    bb = L.bar
    n1 = L.n + 1
    plus = set(L.I15plus)
    etab = {kk: bb(et[kk]) for kk in L.I[15]}
    cbar_partner = etab[c]           # eta-bar(c)
    delta = lambda kk: 1 if kk in plus else -1
    if b15 % 2 == 0 and eps == 1 and k in (c, cbar_partner):
        Ik = [c, et[c], bb(c), etab[c], n1]
        if k == c:
            phi = {c: {i: F.one}, et[c]: {kap: F.one}, bb(c): {kap: F.half}, etab[c]: {}, n1: {lam: F(-1)}}
        else:
            phi = {etab[c]: {i: F.one}, bb(c): {kap: F(-1)}, c: {}, et[c]: {}, n1: {}}
        return phi, Ik
    if b15 % 2 == 1 and k == c:
        Ik = [c, bb(c), n1]
        phi = {c: {i: F.one}, bb(c): {kap: F.half}, n1: {lam: F(-1)}}
        return phi, Ik
    Ik = [k, et[k], bb(k), etab[k]]
    phi = {k: {i: F.one}, et[k]: {kap: F(delta(k))}, bb(k): {}, etab[k]: {}}
    if b15 % 2 == 0 and k in (c, cbar_partner):
        Ik.append(n1)
        phi[n1] = {}
    return phi, Ik


def rv_generators(shape, t, p, mus=None, extended=False):
    """Elements of R_V built from the explicit constructions, V = V(b, eps).

    The constructions reach R_V through its action on U+.  With
    ``extended`` the set also gets every coordinate root element and torus
    generator that happens to stabilize (U+, U-, V), plus -1; at small sizes
    this generates all of R_V (see the oracle's generation reports).
    """
    F = Field(p)
    n = shape.n
    L = layout(shape, t)
    V = representative(shape, t, F)
    Up, Um = shape.model_pair(F)
    gs = GeneratorSet(n, p, f"R_V{t.b},{t.eps}", (Up, Um, V))
    if mus is None:
        mus = sorted({1, F.primitive_root()}) if F.finite else [1]
    # block GL actions h_(j)(A)
    for j in range(1, 15):
        idx = L.I[j]
        if not idx:
            continue
        if j in (7, 8, 9, 13):
            cols = idx + [L.eta[j][i] for i in idx]
            reps = 2
        elif j == 12:
            cols = idx + [L.kappa[i] for i in idx] + [L.lam[i] for i in idx]
            reps = 3
        else:
            cols, reps = idx, 1
        k = len(idx)
        for A in gl_generators(F, k):
            big = [[F.zero] * (k * reps) for _ in range(k * reps)]
            for r in range(reps):
                for a in range(k):
                    for b in range(k):
                        big[r * k + a][r * k + b] = A[a, b]
            M = Mat(F, tuple(tuple(x) for x in big), k * reps)
            gs.add(dual_pair_map(M, z(cols), n), f"h({j})")
    labels = [x for x in _ORDER if x != 15]
    # transvection-type elements along the block order
    for j in labels:
        for jp in labels:
            if j == jp:
                continue
            phr = role_map(j, jp)
            if phr is None:
                continue
            for i in block_indices(L, j):
                ri = roles(L, j, i)
                for k in block_indices(L, jp):
                    rk = roles(L, jp, k)
                    Ii, Ik = list(ri.values()), list(rk.values())
                    if sorted(Ii) == sorted(L.bar(x) for x in Ik):
                        continue
                    phi = _phi_matrix(F, L, phr, rk, ri)
                    for mu in mus:
                        gs.add(_g_from_phi(F, L, n, phi, Ik, Ii, mu), f"g[{j},{jp}]")
    # the pair-internal elements for I_(12) and I_(8)
    for i in L.I[12]:
        for mu in mus:
            gs.add(_pair_twist(F, n, L, i, L.kappa[i], mu), "g[12,12b-own]")
    for i in L.I[8]:
        for mu in mus:
            gs.add(_pair_twist(F, n, L, i, L.eta[8][i], mu), "g[8,8b-own]")
    # elements reaching into the b15 block
    if L.I[15]:
        for j in (1, 2, 3, 5, 7, 8, 9, 12):
            for i in block_indices(L, j):
                ri = roles(L, j, i)
                Ii = list(ri.values())
                for k in L.I[15]:
                    for mu in mus:
                        gs.add(_g15(F, n, L, t.eps, j, i, k, mu), f"g'[{j},15]")
        for i in L.I[15]:
            for k in (L.bar(x) for x in L.I[6]):
                for mu in mus:
                    N = dim_of(n)
                    cols = [list(unit(F, N, x)) for x in range(N)]
                    cols[k - 1][i - 1] = F(mu)
                    cols[L.bar(i) - 1][L.bar(k) - 1] = F(-mu)
                    gs.add(OrthElement(n, Mat.from_columns(F, [tuple(c) for c in cols], N)), "g[15,6b]")
    if extended:
        cands = [unit(F, dim_of(n), i) for i in range(dim_of(n))]
        for S in gs.fixed:
            cands += [v for v in S.basis if v not in cands]
        for g, tag in eichler_elements(F, n, cands):
            if all(g.image(S) == S for S in gs.fixed):
                gs.add(g, tag)
        w = F.primitive_root() if F.finite else F(2)
        for i in range(n):
            rows = [list(unit(F, dim_of(n), r)) for r in range(dim_of(n))]
            rows[i][i] = F(w)
            rows[dim_of(n) - 1 - i][dim_of(n) - 1 - i] = F.inv(w)
            g = OrthElement(n, Mat(F, tuple(tuple(r) for r in rows), dim_of(n)))
            if all(g.image(S) == S for S in gs.fixed):
                gs.add(g, "torus")
        gs.add(OrthElement(n, Mat.identity(F, dim_of(n)).scale(F(-1))), "minus-id")
    return gs


def eichler_elements(F, n, vectors):
    """Siegel transformations x -> x + (x,u)v - (x,v)u - 1/2 (v,v)(x,u)u.

    u runs over the isotropic vectors in the list and v over the vectors
    orthogonal to u and not proportional to it; coordinate root elements
    are the case of two unit vectors.
    """
    from .split_form import form
    N = dim_of(n)
    out = []
    for u in vectors:
        if form(F, u, u):
            continue
        for v in vectors:
            if form(F, u, v) or Subspace.span(F, [u, v], N).dim < 2:
                continue
            c = F.red(F.half * form(F, v, v))
            cols = []
            for j in range(N):
                x = unit(F, N, j)
                xu, xv = form(F, x, u), form(F, x, v)
                cols.append(tuple(F.red(x[r] + xu * v[r] - xv * u[r] - c * xu * u[r]) for r in range(N)))
            out.append((OrthElement(n, Mat.from_columns(F, cols, N)), "eichler"))
    return out


def _pair_twist(F, n, L, i, partner, mu):
    """g e_{bar partner} = e_{bar partner} + mu e_i, g e_{bar i} = e_{bar i} - mu e_partner."""
    N = dim_of(n)
    cols = [list(unit(F, N, x)) for x in range(N)]
    cols[L.bar(partner) - 1][i - 1] = F(mu)
    cols[L.bar(i) - 1][partner - 1] = F(-mu)
    return OrthElement(n, Mat.from_columns(F, [tuple(c) for c in cols], N))


def _g15(F, n, L, eps, j, i, k, mu):
    # phi_{i,k} = phi_{i,l} ∘ phi_{l,k} with l a (virtual) member of I_(12)
    if j == 12:
        phi, Ik = _phi15(F, L, eps, i, k)
        Ii = _I_of(L, 12, i)
    else:
        phr = role_map(j, 12)
        ri = roles(L, j, i)
        Ii = list(ri.values())
        # run phi_{l,k} in role coordinates of block 12
        virt = {"x": -1, "kappa": -2, "lambda": -3}
        Lv = _VirtualTwelve(L, virt)
        inner, Ik = _phi15(F, Lv, eps, -1, k)
        phi = {}
        back = {v: r for r, v in virt.items()}
        for idx, img in inner.items():
            acc = {}
            for tgt, c in img.items():
                for r2, c2 in phr.get(back[tgt], {}).items():
                    acc[ri[r2]] = F.red(acc.get(ri[r2], 0) + c * F(c2))
            phi[idx] = {a: b for a, b in acc.items() if b}
    return _g_from_phi(F, L, n, phi, Ik, Ii, mu, quadratic=True)


class _VirtualTwelve:
    """A layout view whose kappa/lambda send the virtual index -1 to role tags."""

    def __init__(self, L, virt):
        self._L = L
        self.kappa = {virt["x"]: virt["kappa"]}
        self.lam = {virt["x"]: virt["lambda"]}

    def __getattr__(self, name):
        return getattr(self._L, name)


# -- closures -------------------------------------------------------------------

def group_closure(gens, budget=None):
    """All products of the generators (finite fields), as a set of row tuples."""
    from .exact_linalg import point_budget, BudgetExceeded
    budget = point_budget(budget)
    gens = list(gens)
    if not gens:
        return set()
    F = gens[0].field
    N = gens[0].mat.ncols
    ident = Mat.identity(F, N).rows
    seen = {ident}
    frontier = [ident]
    gm = [g.mat for g in gens]
    while frontier:
        nxt = []
        for r in frontier:
            M = Mat(F, r, N)
            for G in gm:
                P = (G @ M).rows
                if P not in seen:
                    seen.add(P)
                    nxt.append(P)
                    if len(seen) > budget:
                        raise BudgetExceeded("group closure", len(seen), budget)
        frontier = nxt
    return seen


def restricted_stabilizer(V_sub, gens, budget=None):
    """Closure of {g restricted to V_sub} in the RREF basis of V_sub."""
    from .exact_linalg import point_budget, BudgetExceeded, solve, vcomb
    budget = point_budget(budget)
    F = V_sub.field
    B = V_sub.basis
    k = len(B)
    rows_B = [tuple(b[x] for b in B) for x in range(V_sub.ambient)]
    mats = []
    for g in gens:
        cols = []
        for b in B:
            w = g.apply(b)
            c = solve(F, rows_B, k, w)
            if c is None:
                raise NotInContext("generator does not preserve the subspace")
            cols.append(tuple(c))
        mats.append(Mat.from_columns(F, cols, k))
    ident = Mat.identity(F, k).rows
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for r in frontier:
            M = Mat(F, r, k)
            for G in mats:
                P = (G @ M).rows
                if P not in seen:
                    seen.add(P)
                    nxt.append(P)
                    if len(seen) > budget:
                        raise BudgetExceeded("restricted closure", len(seen), budget)
        frontier = nxt
    return seen
