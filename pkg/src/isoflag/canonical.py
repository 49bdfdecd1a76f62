"""Canonical representatives of R-orbits on maximal isotropic subspaces.

``representative`` writes down the coordinate subspace indexed by an
invariant tuple; ``canonicalize`` moves an arbitrary V onto it with an
element of R = Stab(U+) ∩ Stab(U-), in nine audited stages.  Index sets in
``IndexLayout`` are 1-based, matching the formulas they come from; the
stage code converts once through ``z``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .exact_linalg import Mat, Subspace, solve, unit, vcomb
from .invariants import (
    InvariantTuple, PairShape, compute_b, identities_hold, invariant_spaces,
    is_normalized, pair_shape,
)
from .split_form import (
    OrthElement, bar, dim_of, dual_pair_map, element_from_isotropic_vectors,
    embed, form, is_isotropic, isotropic_to_coordinate, perp, to_internal,
    unipotent_XZ, unipotent_YZ,
)


class StageFailure(AssertionError):
    def __init__(self, label, msg):
        super().__init__(f"stage ({label}): {msg}")
        self.label = label


def z(indices):
    return [to_internal(i) for i in indices]


def _rng(a, b):
    """1-based closed range a..b (empty when b < a)."""
    return list(range(a, b + 1))


@dataclass(frozen=True)
class IndexLayout:
    n: int
    d: int
    dp: int
    I: dict              # j -> list of 1-based indices
    eta: dict            # j in {7,8,9,13,15} -> {i: eta_j(i)}
    kappa: dict
    lam: dict
    c: int | None
    I15plus: list

    def bar(self, i):
        return 2 * self.n + 2 - i

    def tilde(self, j):
        """The indices of the summand U_(j)."""
        s = list(self.I[j])
        if j in (7, 8, 9, 13):
            s += [self.eta[j][i] for i in self.I[j]]
        elif j == 12:
            s += [self.kappa[i] for i in self.I[12]] + [self.lam[i] for i in self.I[12]]
        return sorted(s + [self.bar(i) for i in s])

    def cells(self):
        out = {}
        for j in range(1, 15):
            out[j] = self.tilde(j)
        out[15] = sorted(self.I[15] + [self.bar(i) for i in self.I[15]] + [self.n + 1])
        return out

    def check(self):
        seen = []
        for cell in self.cells().values():
            seen += cell
        if sorted(seen) != list(range(1, 2 * self.n + 2)):
            raise ValueError("index cells do not partition 1..2n+1")
        return self


def layout(shape, t):
    if not identities_hold(shape, t):
        raise ValueError(f"tuple {t.b},{t.eps} is inconsistent with the pair shape")
    b = {j: t[j] for j in range(1, 16)}
    a0, ap, a1, d, dp = shape.a0, shape.ap, shape.a1, shape.d, shape.dp
    I = {
        1: _rng(1, b[1]),
        2: _rng(b[1] + 1, a0),
        3: _rng(a0 + 1, a0 + b[3]),
        4: _rng(a0 + ap + 1, a0 + ap + b[4]),
        5: _rng(d + 1, d + b[5]),
        6: _rng(dp + 1, dp + b[6]),
        10: _rng(a0 + ap - b[10] + 1, a0 + ap),
        11: _rng(d - b[11] + 1, d),
        14: _rng(d + a1 + 1, d + a1 + b[14]),
    }
    eta = {}
    s7 = a0 + b[3]
    I[7] = _rng(s7 + 1, s7 + b[7])
    eta[7] = {s7 + k: a0 + ap + b[4] + k for k in range(1, b[7] + 1)}
    s8 = a0 + b[3] + b[7]
    I[8] = _rng(s8 + 1, s8 + b[8])
    eta[8] = {s8 + k: dp + b[6] + k for k in range(1, b[8] + 1)}
    s9 = a0 + ap + b[4] + b[7]
    I[9] = _rng(s9 + 1, s9 + b[9])
    eta[9] = {s9 + k: d + b[5] + k for k in range(1, b[9] + 1)}
    s13 = d + b[5] + b[9] + b[12] + b[15]
    I[13] = _rng(s13 + 1, s13 + b[13])
    eta[13] = {s13 + k: d + a1 + b[14] + b[12] + k for k in range(1, b[13] + 1)}
    s12 = d + b[5] + b[9]
    I[12] = _rng(s12 + 1, s12 + b[12])
    kappa = {s12 + k: dp + b[6] + b[8] + k for k in range(1, b[12] + 1)}
    lam = {s12 + k: d + a1 + b[14] + k for k in range(1, b[12] + 1)}
    s15 = d + b[5] + b[9] + b[12]
    I[15] = _rng(s15 + 1, s15 + b[15])
    eta[15] = {s15 + k: dp + b[6] + b[8] + b[12] + b[13] + k for k in range(1, b[15] + 1)}
    if b[15]:
        c = s15 + (b[15] + 1) // 2
        plus = _rng(s15 + 1, c)
    else:
        c, plus = None, []
    return IndexLayout(shape.n, d, dp, I, eta, kappa, lam, c, plus).check()


def _e(F, N, i1):
    return unit(F, N, i1 - 1)


def _lin(F, N, terms):
    """Sum of coefficient * e_i over (coefficient, 1-based index) pairs."""
    v = [F.zero] * N
    for cf, i in terms:
        v[i - 1] = F.red(v[i - 1] + F(cf))
    return tuple(v)


def representative_vectors(shape, t, F):
    """Spanning vectors of V(b, eps), grouped by the block they belong to."""
    L = layout(shape, t)
    n = shape.n
    N = dim_of(n)
    bb = L.bar
    half = F.half
    blocks = {}
    for j in (1, 3, 4, 5, 6, 14):
        blocks[j] = [_e(F, N, i) for i in L.I[j]]
    for j in (2, 10, 11):
        blocks[j] = [_e(F, N, bb(i)) for i in L.I[j]]
    for j in (7, 8, 9, 13):
        et = L.eta[j]
        blocks[j] = ([_lin(F, N, [(1, i), (1, et[i])]) for i in L.I[j]]
                     + [_lin(F, N, [(1, bb(i)), (-1, bb(et[i]))]) for i in L.I[j]])
    kp, lm = L.kappa, L.lam
    blocks[12] = ([_lin(F, N, [(1, i), (1, kp[i])]) for i in L.I[12]]
                  + [_lin(F, N, [(1, i), (1, lm[i])]) for i in L.I[12]]
                  + [_lin(F, N, [(1, bb(i)), (-1, bb(kp[i])), (-1, bb(lm[i]))]) for i in L.I[12]])
    v15 = []
    b15 = t[15]
    et = L.eta[15]
    for i in L.I15plus:
        if i == L.c:
            continue
        v15 += [_lin(F, N, [(1, i), (1, et[i])]), _lin(F, N, [(1, bb(i)), (-1, bb(et[i]))])]
    if b15:
        c = L.c
        center = _lin(F, N, [(1, n + 1)])
        if b15 % 2 == 0:
            v15.append(_lin(F, N, [(1, c), (1, et[c])]))
            w = _lin(F, N, [(1, bb(c)), (-1, bb(et[c]))])
            if t.eps == 1:
                w = tuple(F.red(x - half * y + z0) for x, y, z0 in zip(w, _e(F, N, c), center))
            v15.append(w)
        else:
            w = tuple(F.red(x - half * y + z0) for x, y, z0 in zip(_e(F, N, bb(c)), _e(F, N, c), center))
            v15.append(w)
    blocks[15] = v15
    return L, blocks


def representative(shape, t, F):
    _, blocks = representative_vectors(shape, t, F)
    vecs = [v for j in sorted(blocks) for v in blocks[j]]
    V = Subspace.span(F, vecs, dim_of(shape.n)) if vecs else Subspace.zero(F, dim_of(shape.n))
    assert V.dim == shape.n and len(vecs) == shape.n and is_isotropic(V)
    return V


# -- pair normalization -------------------------------------------------------

def _basis_change(F, cols):
    """Inverse of the matrix whose columns are ``cols``: sends cols[k] to e_k."""
    k = len(cols)
    return Mat.from_columns(F, cols, k).inverse()


def _local(v, idx):
    return tuple(v[i] for i in idx)


def _global(F, N, local, idx):
    out = [F.zero] * N
    for x, i in zip(local, idx):
        out[i] = x
    return tuple(out)


def _extend(F, vecs, space_vecs, dim):
    """vecs followed by vectors of space_vecs completing them to a basis."""
    cur = Subspace._raw(F, list(vecs), dim)
    out = list(vecs)
    for w in space_vecs:
        if w not in cur:
            out.append(w)
            cur = Subspace._raw(F, out, dim)
    return out


def _subspace_local(S, idx):
    """Coordinates of S on idx (S must be supported on idx)."""
    F = S.field
    vecs = [_local(b, idx) for b in S.basis]
    return Subspace._raw(F, vecs, len(idx))


def normalize_pair(Up, Um, n):
    """g in G moving (U+, U-) onto the coordinate model; returns (g, shape)."""
    F = Up.field
    N = dim_of(n)
    shape = pair_shape(Up, Um, n)
    d, a0, ap, a1 = shape.d, shape.a0, shape.ap, shape.a1
    Wp = Up & perp(Um)
    Wm = Um & perp(Up)
    g = OrthElement.identity(F, n)
    # straighten W+ + W- onto span(e_1..e_d)
    g1 = isotropic_to_coordinate(Wp + Wm, n)
    g = g1 @ g
    Up1, Um1 = g.image(Up), g.image(Um)
    Wp1, Wm1 = g.image(Wp), g.image(Wm)
    # position W0, W+ and W- inside W
    Widx = list(range(d))
    Wloc = [_local(b, Widx) for b in (Wp1 & Wm1).basis]
    Wploc = [_local(b, Widx) for b in Wp1.basis]
    Wmloc = [_local(b, Widx) for b in Wm1.basis]
    cols = _extend(F, Wloc, Wploc, d)
    cols = _extend(F, cols, Wmloc, d)
    assert len(cols) == d
    if d:
        g2 = dual_pair_map(_basis_change(F, cols), Widx, n)
        g = g2 @ g
    Up2, Um2 = g.image(Up), g.image(Um)
    # on U = W^perp / W the images form a nondegenerate pair
    Uidx = list(range(d, N - d))
    m = len(Uidx)
    nn = (m - 1) // 2
    Pp = Subspace._raw(F, [_local(b, Uidx) for b in Up2.basis], m)
    Pm = Subspace._raw(F, [_local(b, Uidx) for b in Um2.basis], m)
    assert Pp.dim == a1 and Pm.dim == a1
    h1 = isotropic_to_coordinate(Pp, nn)
    Pm1 = h1.image(Pm)
    if a1:
        tail = list(range(m - a1, m))
        # rows of Pm1 normalized so the last a1 coordinates form the identity
        rows = [list(r) for r in Pm1.basis]
        vs = []
        for k in range(a1):
            target = [F.zero] * a1
            target[k] = F.one
            coeffs = solve(F, [tuple(r[c] for r in rows) for c in tail], len(rows), target)
            vs.append(vcomb(F, coeffs, [tuple(r) for r in rows], m))
        Y = Mat(F, tuple(tuple(vs[k][a1 + i] for k in range(a1)) for i in range(m - 2 * a1)), a1)
        Zm = Mat(F, tuple(tuple(vs[k][i] for k in range(a1)) for i in range(a1)), a1)
        h = unipotent_YZ(Y, Zm, a1, nn).inverse()
        hsmall = (h @ h1).mat
    else:
        hsmall = h1.mat
    g3 = embed(hsmall, Uidx, n)
    g = g3 @ g
    Up3, Um3 = g.image(Up), g.image(Um)
    # unipotent correction of the W-components
    if d and a1:
        X = [[F.zero] * m for _ in range(d)]
        Wpm = list(range(a0, a0 + ap))
        Wmm = list(range(a0 + ap, d))
        Upc, Umc = list(shape.Up), list(shape.Um)
        for j in range(a1):
            col = d + j
            v = _pivot_vector(Up3, Upc + list(range(a0 + ap)), col)
            for i in Wmm:
                X[i][j] = v[i]
            col2 = shape.dp + j
            v2 = _pivot_vector(Um3, Umc + list(range(a0)) + Wmm, col2)
            for i in Wpm:
                X[i][col2 - d] = v2[i]
        g4 = unipotent_XZ(Mat(F, tuple(tuple(r) for r in X), m), {}, d, n)
        g = g4.inverse() @ g
    if (g.image(Up), g.image(Um)) != shape.model_pair(F):
        raise AssertionError("pair normalization failed")
    return g, shape


def _pivot_vector(S, cols, col):
    """A vector of S with coordinate 1 at col and 0 at the other cols."""
    F, B = S.field, S.basis
    rows = [tuple(b[x] for b in B) for x in cols]
    coeffs = solve(F, rows, len(B), [F.one if x == col else F.zero for x in cols])
    if coeffs is None:
        raise ValueError("no vector with the requested coordinates")
    return vcomb(F, coeffs, B, S.ambient)


def vectors_with_pivots(S, cols):
    """For each c in cols, the unique-up-to-kernel vector of S with coordinate
    1 at c and 0 at the other members of cols."""
    F, N = S.field, S.ambient
    B = S.basis
    out = []
    for c in cols:
        rhs = [F.one if x == c else F.zero for x in cols]
        rows = [tuple(b[x] for b in B) for x in cols]
        coeffs = solve(F, rows, len(B), rhs)
        if coeffs is None:
            raise ValueError("coordinates are not independent on the subspace")
        out.append(vcomb(F, coeffs, B, N))
    return out


# -- the nine stages ------------------------------------------------------------

@dataclass
class NormalizationTrace:
    stages: list = field(default_factory=list)

    def add(self, label, g, V, parts=None):
        self.stages.append({"label": label, "g": g, "V": V, "parts": parts or []})

    def labels(self):
        return [s["label"] for s in self.stages]

    def total(self, F, n):
        g = OrthElement.identity(F, n)
        for s in self.stages:
            g = s["g"] @ g
        return g


class _Run:
    """Mutable state threaded through the stages of one canonicalization."""

    def __init__(self, Up, Um, V, shape, t):
        self.F = V.field
        self.n = shape.n
        self.N = dim_of(shape.n)
        self.Up, self.Um = Up, Um
        self.V = V
        self.shape = shape
        self.t = t
        self.L = layout(shape, t)
        self.rep_L, self.blocks = representative_vectors(shape, t, self.F)
        self.done = set()          # processed 0-based indices
        self.trace = NormalizationTrace()
        self.g = OrthElement.identity(self.F, self.n)

    @property
    def rem(self):
        return [i for i in range(self.N) if i not in self.done]

    def rem_space(self):
        return Subspace.coordinate(self.F, self.N, self.rem)

    def Vrem(self):
        return self.V & self.rem_space()

    def in_R(self, g):
        return g.image(self.Up) == self.Up and g.image(self.Um) == self.Um

    def apply(self, label, g, blocks, parts=None):
        F = self.F
        if not self.in_R(g):
            raise StageFailure(label, "element does not stabilize the pair")
        for i in self.done:
            if g.apply(unit(F, self.N, i)) != unit(F, self.N, i):
                raise StageFailure(label, "element moves an already processed block")
        V = g.image(self.V)
        for j in blocks:
            for v in self.blocks[j]:
                if v not in V:
                    raise StageFailure(label, f"block {j} not reached")
        self.V = V
        self.g = g @ self.g
        for j in blocks:
            if j == 15:
                self.done |= set(z(self.L.cells()[15]))
            else:
                self.done |= set(z(self.L.tilde(j)))
        # the processed blocks must split off as a direct summand
        Vr = self.Vrem()
        nb = sum(len(self.blocks[j]) for j in self.processed_blocks() )
        if Vr.dim + nb != self.n:
            raise StageFailure(label, "intermediate decomposition does not split")
        self.trace.add(label, g, V, parts)

    def processed_blocks(self):
        out = []
        for j in range(1, 16):
            cell = z(self.L.cells()[j]) if j == 15 else z(self.L.tilde(j))
            if cell and set(cell) <= self.done:
                out.append(j)
        return out

    def ident(self):
        return OrthElement.identity(self.F, self.n)


def _gl_to_front(F, sub_local, dim):
    """Matrix A sending a basis of sub_local (then a completion) to e_1, e_2, ..."""
    std = [unit(F, dim, k) for k in range(dim)]
    cols = _extend(F, list(sub_local.basis), std, dim)
    return _basis_change(F, cols)


def _stage_i(run):
    F, n, sh = run.F, run.n, run.shape
    idx = list(sh.W0)
    sp = invariant_spaces(run.Up, run.Um, run.V, n)
    g = run.ident()
    if idx:
        A = _gl_to_front(F, _subspace_local(sp["W0"] & run.V, idx), len(idx))
        g = dual_pair_map(A, idx, n)
    run.apply("i", g, [1])


def _stage_ii(run):
    F, n, L = run.F, run.n, run.L
    K = [bar(i, n) for i in z(L.I[2])]
    g = run.ident()
    if K:
        vs = vectors_with_pivots(run.Vrem(), K)
        g = element_from_isotropic_vectors(K, vs, n, F).inverse()
    run.apply("ii", g, [2])


def _stage_iii(run):
    F, n, sh = run.F, run.n, run.shape
    g = run.ident()
    Vr = run.Vrem()
    for idx in (list(sh.Wp), list(sh.Wm)):
        if idx:
            S = Vr & Subspace.coordinate(F, run.N, idx)
            A = _gl_to_front(F, _subspace_local(S, idx), len(idx))
            g = dual_pair_map(A, idx, n) @ g
    run.apply("iii", g, [3, 4])


def _stage_iv(run):
    F, n, N, sh, L = run.F, run.n, run.N, run.shape, run.L
    d, a1 = sh.d, sh.a1
    b5, b6 = run.t[5], run.t[6]
    g = run.ident()
    if a1:
        Uidx = list(sh.Up)
        Vr = run.Vrem()
        P = _subspace_local(Vr & run.Up, Uidx)          # W-parts drop out
        Q = Subspace._raw(F, [_local(b, list(sh.Um)) for b in (Vr & run.Um).basis], a1)
        assert P.dim == b5 and Q.dim == b6
        # Q^perp inside U(+): the U(-) coordinate k pairs with U(+) coordinate a1-1-k
        Qperp = Subspace._raw(F, [], a1)
        ker_rows = [tuple(reversed(q)) for q in Q.basis]
        from .exact_linalg import nullspace
        Qperp = Subspace._raw(F, nullspace(F, ker_rows, a1) if ker_rows else
                              [unit(F, a1, k) for k in range(a1)], a1)
        std = [unit(F, a1, k) for k in range(a1)]
        cols = _extend(F, list(P.basis), list(Qperp.basis), a1)
        cols = _extend(F, cols, std, a1)
        g3 = dual_pair_map(_basis_change(F, cols), Uidx, n)
        g = g3
        V3 = g3.image(run.V) & run.rem_space()
        m = N - 2 * d
        X = [[F.zero] * m for _ in range(d)]
        Wprest = [i for i in sh.Wp if i not in run.done]
        Wmrest = [i for i in sh.Wm if i not in run.done]
        for k, col in enumerate(z(L.I[5])):
            v = _pivot_vector(V3 & run.Up, [col] + [c for c in Uidx if c != col], col)
            for i in Wprest:
                X[i][col - d] = v[i]
        for k, col in enumerate(z(L.I[6])):
            Umidx = list(sh.Um)
            v = _pivot_vector(V3 & run.Um, [col] + [c for c in Umidx if c != col], col)
            for i in Wmrest:
                X[i][col - d] = v[i]
        if d:
            g4 = unipotent_XZ(Mat(F, tuple(tuple(r) for r in X), m), {}, d, n)
            g = g4.inverse() @ g
    run.apply("iv", g, [5, 6])


def _split_step(run, j, eta, upart):
    """The v_j^+ / v_j^- construction shared by stages (v)-(vii).

    ``upart`` lists the coordinates collected into u_j besides -e_{bar eta(j)}.
    Returns the unipotent element g; the caller applies g^{-1}.
    """
    F, n, L = run.F, run.n, run.L
    Ij = z(L.I[j])
    etas = [to_internal(eta[i]) for i in L.I[j]]
    # pivots: bars of every remaining W index except the eta-images
    piv = sorted(set(bar(i, n) for i in run.rem if i < run.shape.d) - set(bar(e, n) for e in etas))
    vs = vectors_with_pivots(run.Vrem(), piv)
    vj = {k: vs[piv.index(bar(k, n))] for k in Ij}
    for k, e in zip(Ij, etas):
        if vj[k][bar(e, n)] != F(-1):
            raise StageFailure(run._label, "unexpected W-bar projection")
    skip = {bar(e, n) for e in etas}
    us = {}
    for k, e in zip(Ij, etas):
        u = [F.zero] * run.N
        u[bar(e, n)] = F(-1)
        for i in upart:
            if i not in skip:
                u[i] = vj[k][i]
        us[k] = tuple(u)
    vplus, vminus = {}, {}
    for k in Ij:
        u = list(us[k])
        for i in Ij:
            c = form(F, us[k], vj[i])
            if c:
                u[i] = F.red(u[i] - c)
        vplus[k] = tuple(u)
        vminus[k] = tuple(F.red(a - b) for a, b in zip(vj[k], u))
    K = [bar(k, n) for k in Ij] + [bar(e, n) for e in etas]
    vecs = [vminus[k] for k in Ij] + [tuple(F.red(-x) for x in vplus[k]) for k in Ij]
    return element_from_isotropic_vectors(K, vecs, n, F)


def _stage_v(run):
    F, n, N, sh, L = run.F, run.n, run.N, run.shape, run.L
    run._label = "v"
    g = run.ident()
    if run.t[7]:
        Vr = run.Vrem()
        Wpr = [i for i in sh.Wp if i not in run.done]
        Wmr = [i for i in sh.Wm if i not in run.done]
        S = Vr & Subspace.coordinate(F, N, Wpr + Wmr)
        # S is the graph of an isomorphism between its two projections
        pp = [_local(b, Wpr) for b in S.basis]
        pm = [_local(b, Wmr) for b in S.basis]
        A = _basis_change(F, _extend(F, pp, [unit(F, len(Wpr), k) for k in range(len(Wpr))], len(Wpr)))
        B = _basis_change(F, _extend(F, pm, [unit(F, len(Wmr), k) for k in range(len(Wmr))], len(Wmr)))
        g5 = dual_pair_map(B, Wmr, n) @ dual_pair_map(A, Wpr, n)
        run_V = g5.image(run.V)
        saved = run.V
        run.V = run_V
        g6 = _split_step(run, 7, L.eta[7], [i for i in sh.Up if i not in run.done])
        run.V = saved
        g = g6.inverse() @ g5
    run.apply("v", g, [7])


def _stage_vi_vii(run, label, j):
    F, n, N, sh, L = run.F, run.n, run.N, run.shape, run.L
    run._label = label
    g = run.ident()
    if run.t[j]:
        Vr = run.Vrem()
        if j == 8:
            wside = [i for i in sh.Wp if i not in run.done]
            uside = [i for i in sh.Um if i not in run.done]
            other_w = [i for i in sh.Wm if i not in run.done]
            big = Subspace.coordinate(F, N, wside + other_w + uside + list(sh.W0))
        else:
            wside = [i for i in sh.Wm if i not in run.done]
            uside = [i for i in sh.Up if i not in run.done]
            other_w = [i for i in sh.Wp if i not in run.done]
            big = Subspace.coordinate(F, N, wside + other_w + uside + list(sh.W0))
        S = Vr & big
        xs = list(S.basis)
        wp = [_local(x, wside) for x in xs]
        up = [_local(x, uside) for x in xs]
        A = _basis_change(F, _extend(F, wp, [unit(F, len(wside), k) for k in range(len(wside))], len(wside)))
        ga = dual_pair_map(A, wside, n)
        etas = [to_internal(L.eta[j][i]) for i in L.I[j]]
        # targets for the U-parts sit at the front of the remaining U-block
        assert etas == uside[:len(etas)], (etas, uside)
        C = _basis_change(F, _extend(F, up, [unit(F, len(uside), k) for k in range(len(uside))], len(uside)))
        gc = dual_pair_map(C, uside, n)
        g78 = gc @ ga
        xs2 = [g78.apply(x) for x in xs]
        d = sh.d
        m = N - 2 * d
        X = [[F.zero] * m for _ in range(d)]
        for x, e in zip(xs2, etas):
            for i in other_w:
                X[i][e - d] = x[i]
        g9 = unipotent_XZ(Mat(F, tuple(tuple(r) for r in X), m), {}, d, n)
        gpre = g9.inverse() @ g78
        saved = run.V
        run.V = gpre.image(saved)
        upart = [i for i in (sh.Up if j == 8 else sh.Um) if i not in run.done]
        g10 = _split_step(run, j, L.eta[j], upart)
        run.V = saved
        g = g10.inverse() @ gpre
    run.apply(label, g, [j])


def _stage_viii(run):
    F, n, N, sh, L = run.F, run.n, run.N, run.shape, run.L
    d = sh.d
    m = N - 2 * d
    U9 = run.rem_space()
    sp = invariant_spaces(run.Up, run.Um, run.V, n)
    Y = U9 & sp["Xp"]
    Wpr = [i for i in sh.Wp if i not in run.done]
    Wmr = [i for i in sh.Wm if i not in run.done]
    Upr = [i for i in sh.Up if i not in run.done]
    Umr = [i for i in sh.Um if i not in run.done]
    X = [[F.zero] * m for _ in range(d)]
    for uside, wside in ((Upr, Wpr), (Umr, Wmr)):
        if not uside or not wside:
            continue
        ys = [y for y in Y.basis if any(y[i] for i in uside + wside)]
        pis = [_local(y, uside) for y in ys]
        phis = [_local(y, wside) for y in ys]
        if Subspace._raw(F, pis, len(uside)).dim != len(pis):
            raise StageFailure("viii", "projection to U is not injective")
        cols = _extend(F, pis, [unit(F, len(uside), k) for k in range(len(uside))], len(uside))
        Binv = _basis_change(F, cols)
        # phi~ on the basis: pis -> phis, completion -> 0
        imgs = phis + [(F.zero,) * len(wside)] * (len(cols) - len(pis))
        Phi = Mat.from_columns(F, imgs, len(wside)) @ Binv
        for a, u in enumerate(uside):
            for b_, w in enumerate(wside):
                X[w][u - d] = Phi[b_, a]
    h = unipotent_XZ(Mat(F, tuple(tuple(r) for r in X), m), {}, d, n) if d else run.ident()
    V1 = h.inverse().image(run.V)
    K = [bar(i, n) for i in z(L.I[10]) + z(L.I[11])]
    g = h.inverse()
    if K:
        Vr = V1 & U9
        Zr = Subspace.coordinate(F, N, [i for i in run.rem if i < d or i in sh.Z0])
        vecs = []
        basis = list(Vr.basis) + list(Zr.basis)
        rows = [tuple(b[r] for b in basis) for r in range(N)]
        for k in K:
            x = solve(F, rows, len(basis), unit(F, N, k))
            if x is None:
                raise StageFailure("viii", "e_i not in V + Z")
            v = vcomb(F, x[:Vr.dim], Vr.basis, N)
            vecs.append(v)
        h2 = element_from_isotropic_vectors(K, vecs, n, F)
        g = h2.inverse() @ g
    run.apply("viii", g, [10, 11])


def _symplectic_basis(F, G, vecs):
    """Order vecs into pairs (x_k, y_k) with G(x_k, y_k) = 1 for an alternating G.

    ``vecs`` spans the space; G(u, v) is a callable.  Returns the ordered basis.
    """
    pool = list(vecs)
    out_x, out_y = [], []
    while pool:
        x = pool.pop(0)
        j = next((k for k, y in enumerate(pool) if G(x, y)), None)
        if j is None:
            raise ValueError("alternating form is degenerate on the given span")
        y = pool.pop(j)
        s = F.inv(G(x, y))
        y = tuple(F.red(s * c) for c in y)
        # make the rest orthogonal to x and y
        new = []
        for w in pool:
            a, b = G(w, y), G(x, w)
            w = tuple(F.red(c + a * xc - b * yc) for c, xc, yc in zip(w, x, y))
            new.append(w)
        pool = [w for w in new if any(w)]
        out_x.append(x)
        out_y.append(y)
    return [v for pair in zip(out_x, out_y) for v in pair]


def _block_data(F, n, Lb, I15, eps):
    """Canonical basis of P* = span(e_bar(I15)) attached to a b15-block L."""
    N = dim_of(n)
    P = z(I15)
    Ps = [bar(i, n) for i in P]
    U0 = Subspace.coordinate(F, N, P + Ps)
    Yp = U0 & perp(Lb)
    ys = vectors_with_pivots(Yp, Ps)
    b = len(P)
    fvec = [_local(y, P) for y in ys]        # f(e_q) in P coordinates

    def beta(u, v):
        # u, v in P* local coordinates; (f(u), v) with f linear
        fu = vcomb(F, u, fvec, b)
        return F.red(sum(fu[k] * v[k] for k in range(b)))

    std = [unit(F, b, k) for k in range(b)]
    if eps == 0:
        basis = _symplectic_basis(F, beta, std)
        return basis, beta, None
    mid = n
    w = next(v for v in Lb.basis if v[mid])
    w = tuple(F.red(x * F.inv(w[mid])) for x in w)
    y0 = _local(w, Ps)
    sigma = lambda u, v: F.red(beta(u, v) + beta(v, u))
    from .exact_linalg import nullspace
    Smat = [tuple(sigma(unit(F, b, i), unit(F, b, j)) for j in range(b)) for i in range(b)]
    K = nullspace(F, Smat, b)
    assert len(K) == b - 1
    q = beta(y0, y0)
    if q != F.half:
        s = F.sqrt(F.half * F.inv(q))
        if s is None:
            raise ValueError("block does not admit the normal form")
        y0 = tuple(F.red(s * x) for x in y0)
    if b % 2:
        # shift y0 by K so that it is beta-orthogonal to K
        if K:
            M = [tuple(beta(kk, kj) for kk in K) for kj in K]
            rhs = [F.red(-beta(y0, kj)) for kj in K]
            x = solve(F, M, len(K), rhs)
            y0 = tuple(F.red(a + c) for a, c in zip(y0, vcomb(F, x, K, b)))
        basis = [y0] + (_symplectic_basis(F, beta, K) if K else [])
    else:
        # k0 spans the radical of beta restricted to K
        M = [tuple(beta(kj, kk) for kk in K) for kj in K]
        rad = nullspace(F, [tuple(M[r][c] for r in range(len(K))) for c in range(len(K))], len(K))
        assert len(rad) == 1
        k0 = vcomb(F, rad[0], K, b)
        s = F.red(-F.inv(beta(y0, k0)))
        k0 = tuple(F.red(s * x) for x in k0)
        Kp = [k for k in nullspace(F, [tuple(beta(y0, kk) for kk in K)], len(K))]
        Kp = [vcomb(F, c, K, b) for c in Kp]
        basis = [y0, k0] + (_symplectic_basis(F, beta, Kp) if Kp else [])
    return basis, beta, y0


def b15_block_normalize(block, lay, eps, n, target=None):
    """ell_6: a GL(b15)-type element moving the b15-block onto its normal form."""
    F = block.field
    N = dim_of(n)
    I15 = lay.I[15]
    if not I15:
        return OrthElement.identity(F, n)
    if target is None:
        t_vecs = _normal_block(F, n, lay, eps)
        target = Subspace.span(F, t_vecs, N)
    P = z(I15)
    Ps = [bar(i, n) for i in P]
    cb, _, _ = _block_data(F, n, block, I15, eps)
    tb, _, _ = _block_data(F, n, target, I15, eps)
    b = len(P)
    M = Mat.from_columns(F, tb, b) @ Mat.from_columns(F, cb, b).inverse()
    g = dual_pair_map(M, Ps, n)
    if g.image(block) != target:
        flip = dual_pair_map(Mat.identity(F, b).scale(-1), Ps, n)
        g = flip @ g
    if g.image(block) != target:
        raise ValueError("b15 block is not of the expected shape")
    return g


def _normal_block(F, n, lay, eps):
    """Spanning vectors of the b15 normal form (restricted to its cell)."""
    N = dim_of(n)
    bb = lay.bar
    et = lay.eta[15]
    half = F.half
    out = []
    b15 = len(lay.I[15])
    for i in lay.I15plus:
        if i == lay.c:
            continue
        out += [_lin(F, N, [(1, i), (1, et[i])]), _lin(F, N, [(1, bb(i)), (-1, bb(et[i]))])]
    c = lay.c
    if b15 % 2 == 0:
        out.append(_lin(F, N, [(1, c), (1, et[c])]))
        if eps:
            out.append(_lin(F, N, [(1, bb(c)), (-1, bb(et[c])), (-half, c), (1, n + 1)]))
        else:
            out.append(_lin(F, N, [(1, bb(c)), (-1, bb(et[c]))]))
    else:
        out.append(_lin(F, N, [(1, bb(c)), (-half, c), (1, n + 1)]))
    return out


def _stage_ix(run):
    F, n, N, sh, L, t = run.F, run.n, run.N, run.shape, run.L, run.t
    parts = []
    g = run.ident()
    Upr = [i for i in sh.Up if i not in run.done]
    Umr = [bar(i, n) for i in Upr]
    U11 = run.rem_space()
    a1p = len(Upr)

    def spaces():
        sp = invariant_spaces(run.Up, run.Um, run.V, n)
        return U11 & sp["Xp"], U11 & sp["X1"]

    def step(name, h):
        nonlocal g
        if not run.in_R(h):
            raise StageFailure("ix", f"{name} leaves R")
        run.V = h.image(run.V)
        g = h @ g
        parts.append(name)

    saved = run.V
    if a1p:
        # l1: align pi+(Y1), pi+(Y') and the annihilator of pi-(Y')
        Yp, Y1 = spaces()
        P1 = Subspace._raw(F, [_local(y, Upr) for y in Y1.basis], a1p)
        PY = Subspace._raw(F, [_local(y, Upr) for y in Yp.basis], a1p)
        PM = [_local(y, Umr) for y in Yp.basis]
        # u in U(+) pairs with U(-) local coordinate k through position k (Umr = bars)
        from .exact_linalg import nullspace
        T = Subspace._raw(F, nullspace(F, PM, a1p) if PM else [unit(F, a1p, k) for k in range(a1p)], a1p)
        std = [unit(F, a1p, k) for k in range(a1p)]
        cols = list(P1.basis)
        cols = _extend(F, cols, list(PY.basis), a1p)
        cols = _extend(F, cols, list(T.basis), a1p)
        cols = _extend(F, cols, std, a1p)
        b12, b13, b15 = t[12], t[13], t[15]
        assert P1.dim == b12 and PY.dim == b12 + b15 and T.dim == b12 + b13
        step("l1", dual_pair_map(_basis_change(F, cols), Upr, n))
        # l2: bring f on U12^{-2} to the identity
        if b12:
            Yp, Y1 = spaces()
            kap = [to_internal(L.kappa[i]) for i in L.I[12]]
            I15b = [bar(i, n) for i in z(L.I[15])]
            ys = vectors_with_pivots(Yp, kap + I15b)
            A = [[F.zero] * a1p for _ in range(a1p)]
            for k in range(a1p):
                A[k][k] = F.one
            for col, y in enumerate(ys[:b12]):
                for r in range(b12):
                    A[r][col] = y[Upr[r]]
            step("l2", dual_pair_map(Mat(F, tuple(tuple(r) for r in A), a1p), Upr, n).inverse())
        # l3: clear the I12-components of f(U15^-)
        if b12 and b15:
            Yp, _ = spaces()
            kap = [to_internal(L.kappa[i]) for i in L.I[12]]
            I15b = [bar(i, n) for i in z(L.I[15])]
            ys = vectors_with_pivots(Yp, kap + I15b)[b12:]
            img = Subspace._raw(F, [_local(y, Upr) for y in ys], a1p)
            vi = vectors_with_pivots(img, list(range(b12, b12 + b15)))
            C = [[F.zero] * a1p for _ in range(a1p)]
            for k in range(a1p):
                C[k][k] = F.one
            for col, v in enumerate(vi):
                for r in range(b12):
                    C[r][b12 + col] = v[r]
            step("l3", dual_pair_map(Mat(F, tuple(tuple(r) for r in C), a1p), Upr, n).inverse())
    # l4 + l5: one Witt step on Z0
    h45 = _witt_step(run, Upr, Umr, U11)
    if h45 is not None:
        step("l4l5", h45)
    # l6: the b15 block
    if t[15]:
        cell = z(L.cells()[15])
        block = run.V & Subspace.coordinate(F, N, cell)
        step("l6", b15_block_normalize(block, L, t.eps, n))
    V_end = run.V
    run.V = saved
    assert g.image(saved) == V_end
    run.apply("ix", g, [12, 13, 14, 15], parts)


def _witt_step(run, Upr, Umr, U11):
    F, n, N, sh, L, t = run.F, run.n, run.N, run.shape, run.L, run.t
    Z0 = list(sh.Z0)
    if not Z0:
        return None
    V11 = run.V & U11
    Zs = Subspace.coordinate(F, N, Z0)
    ZV = V11 & Zs
    zs = list(ZV.basis)
    assert len(zs) == t[14]
    # hyperbolic partners z'_k inside Z0
    ws = []
    for k in range(len(zs)):
        rows = [tuple(reversed(zj)) for zj in zs]
        rows = [tuple(r[i] for i in Z0) for r in rows]
        rhs = [F.one if j == k else F.zero for j in range(len(zs))]
        x = solve(F, rows, len(Z0), rhs)
        ws.append(_global(F, N, x, Z0))
    zp = []
    half = F.half
    for k, wk in enumerate(ws):
        v = list(wk)
        for j, zj in enumerate(zs):
            c = F.red(half * form(F, wk, ws[j]))
            v = [F.red(a - c * b) for a, b in zip(v, zj)]
        zp.append(tuple(v))
    pm = Upr + Umr

    def zpart(u):
        """Z0-part v with u + v in V, normalized against the z'_k."""
        basis = list(V11.basis)
        rows = [tuple(b[i] for b in basis) for i in pm]
        x = solve(F, rows, len(basis), _local(u, pm))
        if x is None:
            raise StageFailure("ix", "vector not in the projection of V")
        full = vcomb(F, x, basis, N)
        v = _global(F, N, _local(full, Z0), Z0)
        for zk, zpk in zip(zs, zp):
            c = form(F, v, zpk)
            if c:
                v = tuple(F.red(a - c * b) for a, b in zip(v, zk))
        return v

    src, tgt = [], []
    for k, (zk, zpk) in enumerate(zip(zs, zp)):
        i = to_internal(L.I[14][k])
        src += [zk, zpk]
        tgt += [unit(F, N, i), unit(F, N, bar(i, n))]
    e = lambda i1: unit(F, N, to_internal(i1))
    for i in L.I[12]:
        ub = tuple(F.red(a - b) for a, b in zip(e(L.bar(i)), e(L.bar(L.kappa[i]))))
        src += [zpart(e(i)), zpart(ub)]
        tgt += [e(L.lam[i]), tuple(F.red(-x) for x in e(L.bar(L.lam[i])))]
    for i in L.I[13]:
        src += [zpart(e(i)), zpart(e(L.bar(i)))]
        tgt += [e(L.eta[13][i]), tuple(F.red(-x) for x in e(L.bar(L.eta[13][i])))]
    mid = unit(F, N, n)
    if t.eps == 1:
        # u0: a vector of V with nonzero Z0-part orthogonal to everything chosen
        u0v = _u0_vector(run, V11, src, Z0, pm)
        src.append(u0v)
        tgt.append(mid)
    else:
        # the line orthogonal to all sources inside Z0
        rows = [tuple(reversed(s)) for s in src]
        rows = [tuple(r[i] for i in Z0) for r in rows]
        from .exact_linalg import nullspace
        ker = nullspace(F, rows, len(Z0)) if rows else [unit(F, len(Z0), k) for k in range(len(Z0))]
        assert len(ker) == 1
        w = _global(F, N, ker[0], Z0)
        q = form(F, w, w)
        s = F.sqrt(q)
        if s is None:
            raise StageFailure("ix", "leftover line has non-square norm")
        src.append(tuple(F.red(x * F.inv(s)) for x in w))
        tgt.append(mid)
    S = Mat.from_columns(F, [_local(v, Z0) for v in src], len(Z0))
    T = Mat.from_columns(F, [_local(v, Z0) for v in tgt], len(Z0))
    B = T @ S.inverse()
    return embed(B, Z0, n)


def _u0_vector(run, V11, src, Z0, pm):
    """Z0-part of the V-vector over u0, scaled so its norm is 1."""
    F, n, N = run.F, run.n, run.N
    # vectors of V whose Z0-part is orthogonal to every source so far
    basis = list(V11.basis)
    rows = []
    for s in src:
        rows.append(tuple(form(F, _global(F, N, _local(b, Z0), Z0), s) for b in basis))
    from .exact_linalg import nullspace
    cand = nullspace(F, rows, len(basis)) if rows else [unit(F, len(basis), k) for k in range(len(basis))]
    for c in cand:
        v = vcomb(F, c, basis, N)
        zpart = _global(F, N, _local(v, Z0), Z0)
        q = form(F, zpart, zpart)
        if q:
            s = F.sqrt(q)
            if s is None:
                raise StageFailure("ix", "distinguished vector has non-square norm")
            return tuple(F.red(x * F.inv(s)) for x in zpart)
    raise StageFailure("ix", "no distinguished vector found")


def canonicalize(Up, Um, V, n, shape=None):
    """Return (g, tuple, trace) with g in R and g V = representative(tuple)."""
    F = V.field
    shape = shape or pair_shape(Up, Um, n)
    if not is_normalized(Up, Um, shape):
        raise ValueError("pair (U+, U-) is not normalized")
    t = compute_b(Up, Um, V, n, shape)
    run = _Run(Up, Um, V, shape, t)
    _stage_i(run)
    _stage_ii(run)
    _stage_iii(run)
    _stage_iv(run)
    _stage_v(run)
    _stage_vi_vii(run, "vi", 8)
    _stage_vi_vii(run, "vii", 9)
    _stage_viii(run)
    _stage_ix(run)
    rep = representative(shape, t, F)
    if run.g.image(V) != rep:
        raise StageFailure("ix", "final subspace differs from the representative")
    return run.g, t, run.trace
