"""Relative-position invariants of a maximal isotropic V against a pair (U+, U-).

The pair must already sit in the coordinate model: with d = a0 + a+ + a-,
U+ = span(e_1..e_{a0+a+}, e_{d+1}..e_{d+a1}) and
U- = span(e_1..e_{a0}, e_{a0+a+ +1}..e_d, e_{d'+1}..e_{d'+a1}).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, fields
from itertools import product

from .exact_linalg import Subspace, nullspace, solve, vcomb
from .split_form import dim_of, form, is_isotropic, perp


class NotNormalized(ValueError):
    pass


@dataclass(frozen=True)
class PairShape:
    n: int
    alpha: int
    beta: int
    a0: int
    ap: int
    am: int
    a1: int
    a2: int
    d: int
    m: int
    dp: int

    @classmethod
    def make(cls, n, a0=0, ap=0, am=0, a1=0):
        d = a0 + ap + am
        a2 = n - d - a1
        if min(a0, ap, am, a1) < 0 or a2 < 0:
            raise ValueError("counts do not fit in rank n")
        return cls(n, a0 + ap + a1, a0 + am + a1, a0, ap, am, a1, a2, d,
                   2 * n + 1 - 2 * d, 2 * n + 1 - d - a1)

    def check(self):
        ok = (self.alpha == self.a0 + self.ap + self.a1
              and self.beta == self.a0 + self.am + self.a1
              and self.d == self.a0 + self.ap + self.am
              and self.m == 2 * self.n + 1 - 2 * self.d
              and self.a2 == self.n - self.d - self.a1
              and self.dp == 2 * self.n + 1 - self.d - self.a1
              and self.alpha <= self.n and self.beta <= self.n
              and min(self.a0, self.ap, self.am, self.a1, self.a2) >= 0)
        if not ok:
            raise ValueError(f"inconsistent pair shape {self}")
        return self

    # 0-based coordinate ranges of the model blocks
    @property
    def W0(self):
        return range(0, self.a0)

    @property
    def Wp(self):
        return range(self.a0, self.a0 + self.ap)

    @property
    def Wm(self):
        return range(self.a0 + self.ap, self.d)

    @property
    def Up(self):
        return range(self.d, self.d + self.a1)

    @property
    def Um(self):
        return range(self.dp, self.dp + self.a1)

    @property
    def Z0(self):
        return range(self.d + self.a1, self.dp)

    def model_pair(self, F):
        N = dim_of(self.n)
        Up = Subspace.coordinate(F, N, [*self.W0, *self.Wp, *self.Up])
        Um = Subspace.coordinate(F, N, [*self.W0, *self.Wm, *self.Um])
        return Up, Um

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def all_shapes(n, alpha=None, beta=None):
    out = []
    for a0, ap, am, a1 in product(range(n + 1), repeat=4):
        if a0 + ap + am + a1 > n:
            continue
        s = PairShape.make(n, a0, ap, am, a1)
        if (alpha is None or s.alpha == alpha) and (beta is None or s.beta == beta):
            out.append(s)
    return out


@dataclass(frozen=True, order=True)
class InvariantTuple:
    b: tuple
    eps: int

    def __post_init__(self):
        if len(self.b) != 15 or any(x < 0 for x in self.b) or self.eps not in (0, 1):
            raise ValueError(f"malformed invariant tuple {self.b}, {self.eps}")

    @classmethod
    def of(cls, eps=0, **bs):
        b = [0] * 15
        for k, v in bs.items():
            b[int(k[1:]) - 1] = v
        return cls(tuple(b), eps)

    def __getitem__(self, j):
        """b_j with 1-based j."""
        return self.b[j - 1]

    def to_json(self):
        return {"b": list(self.b), "eps": self.eps}

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(obj["b"]), obj["eps"])


def identities_hold(shape, t):
    b = t.b
    b1, b2, b3, b4, b5, b6, b7, b8, b9, b10, b11, b12, b13, b14, b15 = b
    if not (shape.a0 == b1 + b2
            and shape.ap == b3 + b7 + b8 + b10
            and shape.am == b4 + b7 + b9 + b11
            and shape.a1 == b5 + b6 + b8 + b9 + 2 * b12 + b13 + b15
            and shape.a2 == b12 + b13 + b14):
        return False
    if b15 == 0:
        return t.eps == 0
    if b15 % 2:
        return t.eps == 1
    return True


def pair_shape(Up, Um, n):
    if not (is_isotropic(Up) and is_isotropic(Um)):
        raise ValueError("U+ and U- must be isotropic")
    a0 = (Up & Um).dim
    ap = (Up & perp(Um)).dim - a0
    am = (Um & perp(Up)).dim - a0
    a1 = Up.dim - a0 - ap
    assert a1 == Um.dim - a0 - am
    return PairShape.make(n, a0, ap, am, a1).check()


def is_normalized(Up, Um, shape):
    return (Up, Um) == shape.model_pair(Up.field)


def _proj_plus(F, A, C, v, N):
    """Component of v in A along C, where v lies in A + C (a direct sum)."""
    cols = list(A) + list(C)
    rows = [tuple(c[i] for c in cols) for i in range(N)]
    x = solve(F, rows, len(cols), v)
    assert x is not None
    return vcomb(F, x[:len(A)], A, N)


def invariant_spaces(Up, Um, V, n):
    """All the auxiliary subspaces behind the invariants, keyed by name."""
    F = V.field
    N = dim_of(n)
    W0 = Up & Um
    Wp = Up & perp(Um)
    Wm = Um & perp(Up)
    W = Wp + Wm
    S = Up + Um
    Vp = perp(V)
    X = S & V
    Xp = S & Vp
    X0 = ((Up + Wm) & V) + ((Wp + Um) & V)
    A = Up + Wm
    B = Wp + Um
    C = (A & B).complement_basis(B)
    xs = Xp.basis
    plus = [_proj_plus(F, A.basis, C, x, N) for x in xs]
    # (v+, X') = 0 for v = sum c_i x_i  <=>  sum_i c_i (x_i+, x_j) = 0 for all j
    M = [tuple(form(F, plus[i], xs[j]) for i in range(len(xs))) for j in range(len(xs))]
    ker = nullspace(F, M, len(xs)) if xs else []
    X1 = Subspace._raw(F, [vcomb(F, c, xs, N) for c in ker], N)
    Z = perp(S)
    return dict(W0=W0, Wp=Wp, Wm=Wm, W=W, S=S, X=X, Xp=Xp, X0=X0, X1=X1, Z=Z, Vperp=Vp)


def compute_b(Up, Um, V, n, shape=None):
    if V.dim != n or not is_isotropic(V):
        raise ValueError("V must be maximal isotropic")
    shape = shape or pair_shape(Up, Um, n)
    if not is_normalized(Up, Um, shape):
        raise NotNormalized("normalize the pair (U+, U-) first")
    sp = invariant_spaces(Up, Um, V, n)
    W0, Wp, Wm, W = sp["W0"], sp["Wp"], sp["Wm"], sp["W"]
    a0, ap, am, a1, a2 = shape.a0, shape.ap, shape.am, shape.a1, shape.a2
    WV = (W & V).dim
    b1 = (W0 & V).dim
    b2 = a0 - b1
    b3 = (Wp & V).dim - b1
    b4 = (Wm & V).dim - b1
    b5 = (Up & V).dim - b1 - b3
    b6 = (Um & V).dim - b1 - b4
    b7 = WV - b1 - b3 - b4
    b8 = ((Wp + Um) & V).dim - WV - b6
    b9 = ((Up + Wm) & V).dim - WV - b5
    b10 = ap - b3 - b7 - b8
    b11 = am - b4 - b7 - b9
    X, Xp, X0, X1 = sp["X"], sp["Xp"], sp["X0"], sp["X1"]
    b12 = X1.dim - X0.dim
    b15 = Xp.dim - X1.dim
    eps = Xp.dim - X.dim
    pi_Xp = (Xp + W).dim - W.dim
    b13 = a1 - pi_Xp - b12
    b14 = a2 - b12 - b13
    t = InvariantTuple((b1, b2, b3, b4, b5, b6, b7, b8, b9, b10, b11, b12, b13, b14, b15), eps)
    assert identities_hold(shape, t), (shape, t)
    return t


def projection_balance(Up, Um, V, n):
    """(a1 - dim pi(X'), a2 - dim pi(Z∩V)); the two entries always agree."""
    shape = pair_shape(Up, Um, n)
    sp = invariant_spaces(Up, Um, V, n)
    W = sp["W"]
    pX = (sp["Xp"] + W).dim - W.dim
    pZ = ((sp["Z"] & V) + W).dim - W.dim
    return shape.a1 - pX, shape.a2 - pZ


def _compositions(total, k):
    if k == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, k - 1):
            yield (first,) + rest


def enumerate_tuples(shape):
    out = set()
    for b1 in range(shape.a0 + 1):
        b2 = shape.a0 - b1
        for b3, b7, b8, b10 in _compositions(shape.ap, 4):
            for b4, b9, b11 in _compositions(shape.am - b7, 3) if shape.am >= b7 else ():
                rest = shape.a1 - b8 - b9
                if rest < 0:
                    continue
                for b12 in range(min(rest // 2, shape.a2) + 1):
                    for b5, b6, b13, b15 in _compositions(rest - 2 * b12, 4):
                        b14 = shape.a2 - b12 - b13
                        if b14 < 0:
                            continue
                        b = (b1, b2, b3, b4, b5, b6, b7, b8, b9, b10, b11, b12, b13, b14, b15)
                        if b15 == 0:
                            epss = (0,)
                        elif b15 % 2:
                            epss = (1,)
                        else:
                            epss = (0, 1)
                        for e in epss:
                            out.add(InvariantTuple(b, e))
    return sorted(out)
