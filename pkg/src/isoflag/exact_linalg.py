"""Exact arithmetic over GF(p) (p odd) and Q, plus canonical subspace algebra.

Field values are stored raw: ints in range(p) for GF(p), Fractions for Q.
A ``Field`` descriptor travels with every matrix and subspace, so mixing
fields is caught early.  Subspaces are kept in reduced row echelon form,
which makes equality and hashing structural.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product

from sympy.ntheory import primitive_root as _primitive_root
from sympy.ntheory import sqrt_mod as _sqrt_mod

DEFAULT_BUDGET = 10**6


class FieldMismatch(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    """Raised instead of silently truncating an enumeration."""

    def __init__(self, what, count, budget):
        super().__init__(f"{what}: {count} items exceed the budget of {budget}")
        self.what = what
        self.count = count
        self.budget = budget


def point_budget(budget=None):
    if budget is not None:
        return budget
    env = os.environ.get("ISOFLAG_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


def _is_prime(p):
    if p < 2:
        return False
    for q in range(2, math.isqrt(p) + 1):
        if p % q == 0:
            return False
    return True


@dataclass(frozen=True)
class Field:
    """GF(p) for an odd prime p, or the rationals when p == 0."""

    p: int = 0

    def __post_init__(self):
        if self.p == 2:
            raise ValueError("characteristic 2 is not supported")
        if self.p != 0 and not _is_prime(self.p):
            raise ValueError(f"{self.p} is not a prime")

    @property
    def finite(self):
        return self.p != 0

    def __str__(self):
        return f"GF({self.p})" if self.p else "QQ"

    def __call__(self, x):
        if isinstance(x, FieldElem):
            if x.field != self:
                raise FieldMismatch(f"{x.field} element used over {self}")
            return x.value
        if isinstance(x, str):
            x = Fraction(x)
        if self.p:
            if isinstance(x, Fraction):
                return x.numerator * pow(x.denominator, -1, self.p) % self.p
            return int(x) % self.p
        return Fraction(x)

    @property
    def zero(self):
        return 0 if self.p else Fraction(0)

    @property
    def one(self):
        return 1 if self.p else Fraction(1)

    def red(self, x):
        return x % self.p if self.p else x

    def inv(self, x):
        if x == 0:
            raise ZeroDivisionError("inverse of zero")
        return pow(x, -1, self.p) if self.p else 1 / Fraction(x)

    def div(self, a, b):
        return self.red(a * self.inv(b))

    @property
    def half(self):
        return self.inv(self(2))

    def sqrt(self, x):
        """A square root of x, or None when x is not a square."""
        x = self(x)
        if self.p:
            if x == 0:
                return 0
            r = _sqrt_mod(x, self.p)
            return None if r is None else r % self.p
        if x < 0:
            return None
        a, b = math.isqrt(x.numerator), math.isqrt(x.denominator)
        if a * a == x.numerator and b * b == x.denominator:
            return Fraction(a, b)
        return None

    def elements(self):
        if not self.p:
            raise ValueError("the rationals cannot be enumerated")
        return range(self.p)

    def units(self):
        return range(1, self.p)

    def primitive_root(self):
        return _primitive_root(self.p)

    def fmt(self, x):
        if self.p:
            return str(x)
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"

    def elem(self, x):
        return FieldElem(self(x), self)


@dataclass(frozen=True)
class FieldElem:
    """A field value bundled with its field; used at API boundaries."""

    value: object
    field: Field

    def _other(self, o):
        if isinstance(o, FieldElem) and o.field != self.field:
            raise FieldMismatch(f"{self.field} vs {o.field}")
        return self.field(o)

    def __add__(self, o):
        return FieldElem(self.field.red(self.value + self._other(o)), self.field)

    __radd__ = __add__

    def __sub__(self, o):
        return FieldElem(self.field.red(self.value - self._other(o)), self.field)

    def __mul__(self, o):
        return FieldElem(self.field.red(self.value * self._other(o)), self.field)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElem(self.field.red(-self.value), self.field)

    def __truediv__(self, o):
        return FieldElem(self.field.div(self.value, self._other(o)), self.field)

    def __eq__(self, o):
        try:
            return self.value == self._other(o)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash((self.value, self.field))

    def __repr__(self):
        return f"{self.field.fmt(self.value)} in {self.field}"


# -- plain vector helpers (tuples of raw values) -------------------------------

def vec(F, entries):
    return tuple(F(x) for x in entries)


def unit(F, N, i):
    """The i-th standard basis vector of F^N (0-based)."""
    v = [F.zero] * N
    v[i] = F.one
    return tuple(v)


def vadd(F, u, v):
    return tuple(F.red(a + b) for a, b in zip(u, v))


def vsub(F, u, v):
    return tuple(F.red(a - b) for a, b in zip(u, v))


def vscale(F, c, v):
    return tuple(F.red(c * a) for a in v)


def vcomb(F, coeffs, vectors, N):
    out = [F.zero] * N
    for c, v in zip(coeffs, vectors):
        if c:
            for i, a in enumerate(v):
                if a:
                    out[i] += c * a
    return tuple(F.red(x) for x in out)


def is_zero(v):
    return not any(v)


# -- matrices ------------------------------------------------------------------

def _rref_rows(F, rows, ncols):
    """RREF of a list of rows; returns (nonzero rows, pivot columns)."""
    A = [list(r) for r in rows]
    red = F.red
    pivots = []
    r = 0
    for c in range(ncols):
        if r == len(A):
            break
        k = next((i for i in range(r, len(A)) if A[i][c]), None)
        if k is None:
            continue
        A[r], A[k] = A[k], A[r]
        inv = F.inv(A[r][c])
        A[r] = [red(x * inv) for x in A[r]]
        pr = A[r]
        for i in range(len(A)):
            if i != r and A[i][c]:
                f = A[i][c]
                A[i] = [red(x - f * y) for x, y in zip(A[i], pr)]
        pivots.append(c)
        r += 1
    return [tuple(x) for x in A[:r]], tuple(pivots)


@dataclass(frozen=True)
class Mat:
    """A dense matrix over one field; ``rows`` holds raw canonical values."""

    field: Field
    rows: tuple
    ncols: int

    @classmethod
    def of(cls, F, rows, ncols=None):
        rows = tuple(tuple(F(x) for x in r) for r in rows)
        if ncols is None:
            ncols = len(rows[0]) if rows else 0
        if any(len(r) != ncols for r in rows):
            raise ValueError("ragged matrix")
        return cls(F, rows, ncols)

    @classmethod
    def identity(cls, F, n):
        return cls(F, tuple(unit(F, n, i) for i in range(n)), n)

    @classmethod
    def zeros(cls, F, r, c):
        return cls(F, tuple((F.zero,) * c for _ in range(r)), c)

    @classmethod
    def from_columns(cls, F, cols, nrows):
        return cls(F, tuple(tuple(col[i] for col in cols) for i in range(nrows)), len(cols))

    @property
    def nrows(self):
        return len(self.rows)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def column(self, j):
        return tuple(r[j] for r in self.rows)

    def columns(self):
        return [self.column(j) for j in range(self.ncols)]

    @property
    def T(self):
        return Mat(self.field, tuple(zip(*self.rows)) if self.rows else (), self.nrows)

    def _check(self, other):
        if other.field != self.field:
            raise FieldMismatch(f"{self.field} vs {other.field}")

    def __matmul__(self, other):
        F = self.field
        if isinstance(other, Mat):
            self._check(other)
            if self.ncols != other.nrows:
                raise ValueError("shape mismatch")
            cols = other.T.rows
            return Mat(F, tuple(tuple(F.red(sum(a * b for a, b in zip(r, c))) for c in cols)
                                for r in self.rows), other.ncols)
        v = other
        if len(v) != self.ncols:
            raise ValueError("shape mismatch")
        return tuple(F.red(sum(a * b for a, b in zip(r, v))) for r in self.rows)

    def __add__(self, other):
        self._check(other)
        F = self.field
        return Mat(F, tuple(vadd(F, a, b) for a, b in zip(self.rows, other.rows)), self.ncols)

    def __sub__(self, other):
        self._check(other)
        F = self.field
        return Mat(F, tuple(vsub(F, a, b) for a, b in zip(self.rows, other.rows)), self.ncols)

    def scale(self, c):
        F = self.field
        return Mat(F, tuple(vscale(F, F(c), r) for r in self.rows), self.ncols)

    def inverse(self):
        F = self.field
        n = self.nrows
        if n != self.ncols:
            raise ValueError("not square")
        aug = [r + unit(F, n, i) for i, r in enumerate(self.rows)]
        red, piv = _rref_rows(F, aug, 2 * n)
        if piv[:n] != tuple(range(n)) or len(red) < n:
            raise ZeroDivisionError("singular matrix")
        return Mat(F, tuple(r[n:] for r in red), n)

    def is_identity(self):
        return self == Mat.identity(self.field, self.nrows)

    def to_text(self):
        F = self.field
        lines = [f"{self.nrows} {self.ncols} {F.p}"]
        lines += [" ".join(F.fmt(x) for x in r) for r in self.rows]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        return parse_matrices(text, 1)[0]

    def tolist(self):
        return [[self.field.fmt(x) for x in r] for r in self.rows]


def parse_matrices(text, count=None):
    """Parse consecutive matrix blocks ("rows cols p" header, then rows)."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    out = []
    pos = 0
    while pos < len(lines) and (count is None or len(out) < count):
        head = lines[pos]
        if len(head) != 3:
            raise ValueError(f"bad matrix header: {' '.join(head)}")
        r, c, p = (int(x) for x in head)
        F = Field(p)
        body = lines[pos + 1:pos + 1 + r]
        if len(body) != r or any(len(row) != c for row in body):
            raise ValueError("matrix body does not match its header")
        out.append(Mat.of(F, body, c))
        pos += 1 + r
    if count is not None and len(out) != count:
        raise ValueError(f"expected {count} matrices, found {len(out)}")
    return out


def rref(m):
    """Return (rref matrix with zero rows kept, pivot columns, rank)."""
    rows, piv = _rref_rows(m.field, m.rows, m.ncols)
    zero = (m.field.zero,) * m.ncols
    full = tuple(rows) + (zero,) * (m.nrows - len(rows))
    return Mat(m.field, full, m.ncols), piv, len(rows)


def nullspace(F, rows, ncols):
    """Basis of {x : A x = 0} for A given by its rows."""
    red, piv = _rref_rows(F, rows, ncols)
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for f in free:
        x = [F.zero] * ncols
        x[f] = F.one
        for r, c in zip(red, piv):
            x[c] = F.red(-r[f])
        basis.append(tuple(x))
    return basis


def solve(F, rows, ncols, rhs):
    """One solution x of A x = rhs, or None."""
    aug = [tuple(r) + (b,) for r, b in zip(rows, rhs)]
    red, piv = _rref_rows(F, aug, ncols + 1)
    if ncols in piv:
        return None
    x = [F.zero] * ncols
    for r, c in zip(red, piv):
        x[c] = r[ncols]
    return tuple(x)


# -- subspaces -----------------------------------------------------------------

@dataclass(frozen=True)
class Subspace:
    """A subspace of F^N stored by its RREF basis."""

    field: Field
    ambient: int
    basis: tuple

    @classmethod
    def span(cls, F, vectors, ambient=None):
        vectors = [tuple(F(x) for x in v) for v in vectors]
        if ambient is None:
            if not vectors:
                raise ValueError("ambient dimension needed for an empty span")
            ambient = len(vectors[0])
        if any(len(v) != ambient for v in vectors):
            raise ValueError("ambient mismatch")
        rows, _ = _rref_rows(F, vectors, ambient)
        return cls(F, ambient, tuple(rows))

    @classmethod
    def _raw(cls, F, vectors, ambient):
        rows, _ = _rref_rows(F, vectors, ambient)
        return cls(F, ambient, tuple(rows))

    @classmethod
    def zero(cls, F, N):
        return cls(F, N, ())

    @classmethod
    def whole(cls, F, N):
        return cls(F, N, tuple(unit(F, N, i) for i in range(N)))

    @classmethod
    def coordinate(cls, F, N, indices):
        """span(e_i : i in indices), indices 0-based."""
        return cls(F, N, tuple(unit(F, N, i) for i in sorted(set(indices))))

    @property
    def dim(self):
        return len(self.basis)

    @property
    def pivots(self):
        return tuple(next(j for j, x in enumerate(r) if x) for r in self.basis)

    def _check(self, other):
        if other.field != self.field:
            raise FieldMismatch(f"{self.field} vs {other.field}")
        if other.ambient != self.ambient:
            raise ValueError("ambient mismatch")

    def __add__(self, other):
        self._check(other)
        return Subspace._raw(self.field, self.basis + other.basis, self.ambient)

    def __and__(self, other):
        self._check(other)
        F = self.field
        if not self.basis or not other.basis:
            return Subspace.zero(F, self.ambient)
        stacked = self.basis + other.basis
        # left kernel of the stacked basis gives the common vectors
        cols = list(zip(*stacked))
        ker = nullspace(F, cols, len(stacked))
        k = len(self.basis)
        vecs = [vcomb(F, c[:k], self.basis, self.ambient) for c in ker]
        return Subspace._raw(F, vecs, self.ambient)

    def reduce(self, v):
        """v minus its component along the pivots (zero iff v is inside)."""
        F = self.field
        v = list(v)
        for r, c in zip(self.basis, self.pivots):
            f = v[c]
            if f:
                v = [F.red(a - f * b) for a, b in zip(v, r)]
        return tuple(v)

    def __contains__(self, v):
        return is_zero(self.reduce(tuple(self.field(x) for x in v)))

    def __le__(self, other):
        self._check(other)
        return all(is_zero(other.reduce(b)) for b in self.basis)

    def coords(self, v):
        """Coefficients of v in the RREF basis; raises if v is outside."""
        if not is_zero(self.reduce(v)):
            raise ValueError("vector not in subspace")
        return tuple(v[c] for c in self.pivots)

    def image(self, g):
        """g . S for a square matrix g (acting on column vectors)."""
        M = g.mat if hasattr(g, "mat") else g
        if M.field != self.field:
            raise FieldMismatch(f"{M.field} vs {self.field}")
        return Subspace._raw(self.field, [M @ b for b in self.basis], self.ambient)

    def complement_basis(self, inside=None):
        """Vectors completing this subspace's basis to a basis of ``inside``."""
        F = self.field
        inside = inside or Subspace.whole(F, self.ambient)
        if not self <= inside:
            raise ValueError("not a subspace of the given space")
        cur = self
        extra = []
        for b in inside.basis:
            if not is_zero(cur.reduce(b)):
                extra.append(b)
                cur = Subspace._raw(F, cur.basis + (b,), self.ambient)
        return extra

    def to_mat(self):
        return Mat(self.field, self.basis, self.ambient)

    def key(self):
        return self.basis

    def __repr__(self):
        F = self.field
        body = "; ".join(" ".join(F.fmt(x) for x in r) for r in self.basis)
        return f"Subspace({F}, N={self.ambient}, [{body}])"


def span(F, vectors, ambient=None):
    return Subspace.span(F, vectors, ambient)


def subspace_sum(S, T):
    return S + T


def intersect(S, T):
    return S & T


def gaussian_binomial(N, k, q):
    if k < 0 or k > N:
        return 0
    num = den = 1
    for i in range(k):
        num *= q ** (N - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


def _pivot_patterns(N, k):
    for piv in combinations(range(N), k):
        free = [(r, c) for r, pc in enumerate(piv) for c in range(pc + 1, N) if c not in piv]
        yield piv, free


def enumerate_subspaces(N, k, p, budget=None):
    """All k-dimensional subspaces of GF(p)^N, in canonical form."""
    F = Field(p)
    if not F.finite:
        raise ValueError("enumeration needs a finite field")
    count = gaussian_binomial(N, k, p)
    budget = point_budget(budget)
    if count > budget:
        raise BudgetExceeded(f"subspaces of dim {k} in GF({p})^{N}", count, budget)
    out = []
    for piv, free in _pivot_patterns(N, k):
        for vals in product(range(p), repeat=len(free)):
            rows = [[0] * N for _ in range(k)]
            for r, c in enumerate(piv):
                rows[r][c] = 1
            for (r, c), x in zip(free, vals):
                rows[r][c] = x
            out.append(Subspace(F, N, tuple(tuple(r) for r in rows)))
    return out
