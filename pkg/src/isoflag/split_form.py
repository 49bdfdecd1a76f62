"""The split symmetric form on F^(2n+1) and the orthogonal group it defines.

The form pairs e_i with e_(2n+2-i) (1-based).  Internally everything is
0-based, so the partner of index i is ``2n - i``; ``to_internal`` is the one
place where the external 1-based convention is translated.
"""
from __future__ import annotations

from dataclasses import dataclass

from .exact_linalg import (
    Field, FieldElem, Mat, Subspace, nullspace, parse_matrices, unit, vcomb,
)


def dim_of(n):
    return 2 * n + 1


def to_internal(i):
    """1-based index (as written in formulas) to 0-based storage index."""
    if i < 1:
        raise ValueError(f"index {i} is not 1-based")
    return i - 1


def to_external(i):
    return i + 1


def bar(i, n):
    """Partner of a 0-based index under the form."""
    return 2 * n - i


def bar1(i, n):
    """Partner of a 1-based index: 2n+2-i."""
    return 2 * n + 2 - i


def form(F, u, v):
    N = len(u)
    return F.red(sum(u[i] * v[N - 1 - i] for i in range(N) if u[i]))


def form_value(u, v, n, F=None):
    F = F or Field(0)
    if len(u) != dim_of(n) or len(v) != dim_of(n):
        raise ValueError("vector length must be 2n+1")
    return F.elem(form(F, [F(x) for x in u], [F(x) for x in v]))


def gram_J(F, N):
    return Mat(F, tuple(unit(F, N, N - 1 - i) for i in range(N)), N)


def perp(S, n=None):
    """Orthogonal complement of S under the split form."""
    F, N = S.field, S.ambient
    if n is not None and N != dim_of(n):
        raise ValueError("ambient dimension must be 2n+1")
    if not S.basis:
        return Subspace.whole(F, N)
    rows = [tuple(reversed(b)) for b in S.basis]
    return Subspace._raw(F, nullspace(F, rows, N), N)


def is_isotropic(S, n=None):
    F = S.field
    return all(form(F, u, v) == 0 for u in S.basis for v in S.basis)


def is_orthogonal(mat, n=None):
    F, N = mat.field, mat.nrows
    if mat.ncols != N or (n is not None and N != dim_of(n)):
        return False
    cols = mat.T.rows
    for i in range(N):
        for j in range(i, N):
            want = F.one if i + j == N - 1 else F.zero
            if form(F, cols[i], cols[j]) != want:
                return False
    return True


class NotOrthogonal(ValueError):
    pass


@dataclass(frozen=True)
class OrthElement:
    """A matrix preserving the split form; checked when constructed."""

    n: int
    mat: Mat

    def __post_init__(self):
        if not is_orthogonal(self.mat, self.n):
            raise NotOrthogonal("matrix does not preserve the split form")

    @property
    def field(self):
        return self.mat.field

    @classmethod
    def identity(cls, F, n):
        return cls(n, Mat.identity(F, dim_of(n)))

    def __matmul__(self, other):
        if isinstance(other, OrthElement):
            return OrthElement._trusted(self.n, self.mat @ other.mat)
        return self.mat @ other

    @classmethod
    def _trusted(cls, n, mat):
        # products and inverses of checked elements stay orthogonal
        obj = object.__new__(cls)
        object.__setattr__(obj, "n", n)
        object.__setattr__(obj, "mat", mat)
        return obj

    def inverse(self):
        F = self.field
        N = self.mat.nrows
        J = gram_J(F, N)
        return OrthElement._trusted(self.n, J @ self.mat.T @ J)

    def apply(self, v):
        return self.mat @ tuple(v)

    def image(self, S):
        return S.image(self.mat)

    def is_identity(self):
        return self.mat.is_identity()

    def __eq__(self, other):
        return isinstance(other, OrthElement) and self.mat == other.mat

    def __hash__(self):
        return hash(self.mat.rows)


def compose(*gs):
    out = gs[0]
    for g in gs[1:]:
        out = out @ g
    return out


# -- flags ---------------------------------------------------------------------

@dataclass(frozen=True)
class FlagType:
    parts: tuple

    def __post_init__(self):
        if any(int(a) <= 0 for a in self.parts):
            raise ValueError("flag type parts must be positive")

    @property
    def total(self):
        return sum(self.parts)

    def dims(self):
        out, s = [], 0
        for a in self.parts:
            s += a
            out.append(s)
        return out

    def __str__(self):
        return "(" + "".join(str(a) for a in self.parts) + ")"


@dataclass(frozen=True)
class IsotropicFlag:
    type: FlagType
    spaces: tuple

    def __post_init__(self):
        dims = self.type.dims()
        if len(dims) != len(self.spaces):
            raise ValueError("flag length does not match its type")
        for dm, S in zip(dims, self.spaces):
            if S.dim != dm:
                raise ValueError("flag member has the wrong dimension")
        for A, B in zip(self.spaces, self.spaces[1:]):
            if not A <= B:
                raise ValueError("flag members are not nested")
        if self.spaces and not is_isotropic(self.spaces[-1]):
            raise ValueError("flag is not isotropic")

    @classmethod
    def from_subspaces(cls, spaces):
        dims = [S.dim for S in spaces]
        parts = tuple(b - a for a, b in zip([0] + dims, dims))
        return cls(FlagType(parts), tuple(spaces))

    def image(self, g):
        return IsotropicFlag(self.type, tuple(g.image(S) for S in self.spaces))

    def key(self):
        return tuple(S.basis for S in self.spaces)


def standard_flag(F, n, ftype):
    N = dim_of(n)
    return IsotropicFlag(ftype, tuple(Subspace.coordinate(F, N, range(k)) for k in ftype.dims()))


def parabolic_contains(g, flag):
    return all(g.image(S) == S for S in flag.spaces)


def parse_flag_file(text):
    """Header "n p", then one matrix block per flag member."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError("empty flag file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError("flag file header must be 'n p'")
    n, p = int(head[0]), int(head[1])
    mats = parse_matrices("\n".join(lines[1:]))
    F = Field(p)
    spaces = []
    for M in mats:
        if M.field != F or M.ncols != dim_of(n):
            raise ValueError("flag member does not live in F^(2n+1)")
        spaces.append(Subspace.span(F, M.rows, M.ncols))
    return n, F, IsotropicFlag.from_subspaces(spaces)


def flag_to_text(n, flag):
    F = flag.spaces[0].field if flag.spaces else Field(0)
    out = f"{n} {F.p}\n"
    for S in flag.spaces:
        out += S.to_mat().to_text()
    return out


# -- group element constructors -------------------------------------------------

def embed(h, idx, n):
    """Act by the small matrix h on span(e_i : i in idx), trivially elsewhere.

    ``idx`` must be sorted and closed under bar, so it spans a smaller split
    space with the inherited form.
    """
    F = h.field
    N = dim_of(n)
    rows = [list(unit(F, N, i)) for i in range(N)]
    for a, ia in enumerate(idx):
        for b, ib in enumerate(idx):
            rows[ia][ib] = h[a, b]
    return OrthElement(n, Mat(F, tuple(tuple(r) for r in rows), N))


def dual_pair_map(A, idx, n):
    """A on span(e_idx) (columns), the inverse transpose on the partner span."""
    F = A.field
    N = dim_of(n)
    k = len(idx)
    B = A.inverse().T
    rows = [list(unit(F, N, i)) for i in range(N)]
    bars = [bar(i, n) for i in idx]
    for a in range(k):
        for b in range(k):
            rows[idx[a]][idx[b]] = A[a, b]
            rows[bars[a]][bars[b]] = B[a, b]
    return OrthElement(n, Mat(F, tuple(tuple(r) for r in rows), N))


def levi_W(A, n):
    """ell(A) for A in GL_d acting on e_1..e_d."""
    return dual_pair_map(A, list(range(A.nrows)), n)


def levi_U(B, d, n):
    """ell_0(B) for B in O_m acting on the middle block."""
    return embed(B, list(range(d, 2 * n + 1 - d)), n)


def complete_Z(F, X, z_free, d, m):
    """Solve Z + J ᵗZ J = -X J ᵗX J given the entries with i+j <= d (1-based)."""
    Jm = gram_J(F, m)
    Jd = gram_J(F, d)
    M = (X @ Jm @ X.T @ Jd).scale(-1) if d and m else Mat.zeros(F, d, d)
    Z = [[F.zero] * d for _ in range(d)]
    z_free = dict(z_free or {})
    for i in range(d):
        for j in range(d):
            s = i + j  # 0-based; free iff (i+1)+(j+1) <= d
            if s + 2 <= d:
                Z[i][j] = F(z_free.pop((i, j), 0))
    if z_free:
        raise ValueError(f"entries {sorted(z_free)} are not free")
    half = F.half
    for i in range(d):
        for j in range(d):
            if i + j + 2 == d + 1:
                Z[i][j] = F.red(M[i, j] * half)
            elif i + j + 2 > d + 1:
                pi, pj = d - 1 - j, d - 1 - i
                Z[i][j] = F.red(M[i, j] - Z[pi][pj])
    return Mat(F, tuple(tuple(r) for r in Z), d)


def unipotent_XZ(X, z_free, d, n):
    """g(X,Z) in the unipotent radical of the stabilizer of span(e_1..e_d)."""
    F = X.field
    N = dim_of(n)
    m = N - 2 * d
    if d > n or X.shape != (d, m):
        raise ValueError("X must be d x (2n+1-2d) with d <= n")
    Z = complete_Z(F, X, z_free, d, m)
    Y = (gram_J(F, m) @ X.T @ gram_J(F, d)).scale(-1) if d and m else Mat.zeros(F, m, d)
    rows = [list(unit(F, N, i)) for i in range(N)]
    for i in range(d):
        for j in range(m):
            rows[i][d + j] = X[i, j]
        for j in range(d):
            rows[i][d + m + j] = Z[i, j]
    for i in range(m):
        for j in range(d):
            rows[d + i][d + m + j] = Y[i, j]
    return OrthElement(n, Mat(F, tuple(tuple(r) for r in rows), N))


def unipotent_YZ(Y, Z, d, n):
    """g'(Y,Z); Z is given in full and must satisfy the isotropy relation."""
    F = Y.field
    N = dim_of(n)
    m = N - 2 * d
    X = (gram_J(F, d) @ Y.T @ gram_J(F, m)).scale(-1) if d and m else Mat.zeros(F, d, m)
    rows = [list(unit(F, N, i)) for i in range(N)]
    for i in range(d):
        for j in range(m):
            rows[i][d + j] = X[i, j]
        for j in range(d):
            rows[i][d + m + j] = Z[i, j]
    for i in range(m):
        for j in range(d):
            rows[d + i][d + m + j] = Y[i, j]
    return OrthElement(n, Mat(F, tuple(tuple(r) for r in rows), N))


def element_from_isotropic_vectors(K, vectors, n, F=None):
    """Orthogonal g with g e_k = v_k on K, identity on the partners of K.

    K is a list of 0-based indices, ``vectors`` the matching v_k.  Each v_k
    must have coefficient 1 at k and 0 at the other members of K, and the
    v_k must be mutually orthogonal and isotropic.
    """
    N = dim_of(n)
    K = list(K)
    F = F or Field(0)
    vectors = [tuple(F(x) for x in v) for v in vectors]
    Kbar = [bar(k, n) for k in K]
    if set(K) & set(Kbar) or len(set(K)) != len(K):
        raise ValueError("K must be disjoint from its partner set")
    for k, v in zip(K, vectors):
        if len(v) != N:
            raise ValueError("vector length must be 2n+1")
        if v[k] != F.one or any(v[j] for j in K if j != k):
            raise ValueError("v_k must be e_k plus terms outside K")
    for a in range(len(K)):
        for b in range(a, len(K)):
            if form(F, vectors[a], vectors[b]):
                raise ValueError("the vectors v_k are not mutually isotropic")
    cols = [unit(F, N, j) for j in range(N)]
    Kset = set(K)
    Kbset = set(Kbar)
    coeff = {k: v for k, v in zip(K, vectors)}
    for j in range(N):
        if j in Kset:
            cols[j] = coeff[j]
        elif j not in Kbset:
            col = list(cols[j])
            jb = bar(j, n)
            for i in Kbar:
                # e_j - sum over i in Kbar of c_{jbar, ibar} e_i
                c = coeff[bar(i, n)][jb]
                if c:
                    col[i] = F.red(col[i] - c)
            cols[j] = tuple(col)
    return OrthElement(n, Mat.from_columns(F, cols, N))


def sign_permutation(perm, n, F):
    """The permutation matrix e_i -> e_perm(i); perm must commute with bar."""
    N = dim_of(n)
    for i in range(N):
        if perm[bar(i, n)] != bar(perm[i], n):
            raise ValueError("permutation does not commute with bar")
    cols = [unit(F, N, perm[i]) for i in range(N)]
    return OrthElement(n, Mat.from_columns(F, cols, N))


def isotropic_to_coordinate(S, n):
    """g in G with g S = span(e_1..e_k) for an isotropic S of dim k."""
    F, N = S.field, S.ambient
    if not is_isotropic(S):
        raise ValueError("subspace is not isotropic")
    mid = n
    K, vecs = [], []
    blocked = {mid}
    for b in S.basis:
        v = list(b)
        for k, w in zip(K, vecs):
            if v[k]:
                c = v[k]
                v = [F.red(x - c * y) for x, y in zip(v, w)]
        piv = next(i for i in range(N) if v[i] and i not in blocked)
        inv = F.inv(v[piv])
        v = [F.red(x * inv) for x in v]
        for t in range(len(vecs)):
            if vecs[t][piv]:
                c = vecs[t][piv]
                vecs[t] = tuple(F.red(x - c * y) for x, y in zip(vecs[t], v))
        K.append(piv)
        vecs.append(tuple(v))
        blocked |= {piv, bar(piv, n)}
    g = element_from_isotropic_vectors(K, vecs, n, F) if K else OrthElement.identity(F, n)
    # g^{-1} S = span(e_K); now permute e_K onto e_1..e_k
    # a bar-commuting permutation sending K[t] -> t
    used = set()
    perm = [None] * N
    for t, k in enumerate(K):
        perm[k] = t
        perm[bar(k, n)] = bar(t, n)
        used |= {t, bar(t, n)}
    rest_src = [i for i in range(N) if perm[i] is None and i < n]
    rest_dst = [i for i in range(n) if i not in used]
    for s, t in zip(rest_src, rest_dst):
        perm[s] = t
        perm[bar(s, n)] = bar(t, n)
    perm[n] = n
    P = sign_permutation(perm, n, F)
    out = P @ g.inverse()
    assert out.image(S) == Subspace.coordinate(F, N, range(len(K)))
    return out


def subspace_from_vectors(F, vectors, n):
    return Subspace.span(F, vectors, dim_of(n))


def coordinate_span(F, n, idx):
    return Subspace.coordinate(F, dim_of(n), idx)


def combine(F, coeffs, vectors, n):
    return vcomb(F, coeffs, vectors, dim_of(n))
