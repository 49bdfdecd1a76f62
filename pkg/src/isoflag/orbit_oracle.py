"""Brute-force orbit oracle over GF(p).

A point is a tuple of subspaces (a flag is the tuple of its members), stored
as stacked RREF blocks in a numpy array.  Points are packed into fixed-width
byte strings; sorting those gives exact lookups, and the smallest packed
point of an orbit is its representative.

Everything here is deliberately independent of the canonical-form code:
orbits come from generator closure, and group elements come from a direct
backtracking search over images of a basis.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from math import factorial, prod

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .canonical import canonicalize, representative
from .exact_linalg import (
    BudgetExceeded, Field, Mat, Subspace, gaussian_binomial, nullspace,
    point_budget, solve,
)
from .invariants import PairShape, compute_b, enumerate_tuples
from .split_form import FlagType, IsotropicFlag, OrthElement, dim_of
from .stabilizer_gens import g_generators, gl_generators, r_generators, rv_generators

APPLY_BUDGET = 10**8


# -- numpy row reduction ---------------------------------------------------------

@lru_cache(maxsize=None)
def _inv_table(p):
    t = np.zeros(p, dtype=np.int64)
    for x in range(1, p):
        t[x] = pow(x, p - 2, p)
    return t


def rref_batch(A, p):
    """Reduced row echelon form of every matrix in a (B, r, N) stack mod p."""
    A = np.array(A, dtype=np.int64) % p
    B, R, N = A.shape
    if B == 0 or R == 0:
        return A
    inv = _inv_table(p)
    row = np.zeros(B, dtype=np.int64)
    rows_idx = np.arange(R)
    for c in range(N):
        col = A[:, :, c]
        mask = (col != 0) & (rows_idx[None, :] >= row[:, None])
        has = mask.any(axis=1)
        if not has.any():
            continue
        idx = np.nonzero(has)[0]
        piv = mask[idx].argmax(axis=1)
        rr = row[idx]
        top = A[idx, rr].copy()
        A[idx, rr] = A[idx, piv]
        A[idx, piv] = top
        scale = inv[A[idx, rr, c]]
        A[idx, rr] = (A[idx, rr] * scale[:, None]) % p
        f = A[idx, :, c].copy()
        f[np.arange(len(idx)), rr] = 0
        A[idx] = (A[idx] - f[:, :, None] * A[idx, rr][:, None, :]) % p
        row[idx] += 1
    return A


def _canon(arr, dims, p):
    out = np.empty_like(arr)
    s = 0
    for d in dims:
        out[:, s:s + d] = rref_batch(arr[:, s:s + d], p)
        s += d
    return out


def _pack(arr):
    M = arr.shape[0]
    flat = np.ascontiguousarray(arr.reshape(M, -1).astype(np.uint8))
    return flat.view(f"V{flat.shape[1]}").ravel()


def as_matrices(gens, p):
    """Generators as int64 arrays: GeneratorSet, OrthElement, Mat or arrays."""
    out = []
    for g in gens:
        if isinstance(g, OrthElement):
            g = g.mat
        if isinstance(g, Mat):
            g = g.rows
        out.append(np.array(g, dtype=np.int64) % p)
    return out


def act(arr, g, dims, p):
    """Image of every point under the matrix g (points hold row vectors)."""
    return _canon((arr @ g.T) % p, dims, p)


# -- point sets -------------------------------------------------------------------

class PointSet:
    """A sorted, deduplicated array of points of one type."""

    def __init__(self, p, N, dims, arr):
        self.p, self.N, self.dims = p, N, tuple(dims)
        arr = np.asarray(arr, dtype=np.int64).reshape(-1, sum(self.dims), N)
        keys = _pack(arr)
        keys, first = np.unique(keys, return_index=True)
        self.keys = keys
        self.arr = arr[first]

    def __len__(self):
        return len(self.keys)

    def index(self, arr):
        """Positions of the given points; -1 for points not in the set."""
        k = _pack(arr)
        pos = np.searchsorted(self.keys, k)
        pos = np.minimum(pos, len(self.keys) - 1)
        return np.where(self.keys[pos] == k, pos, -1)

    def subspaces(self, i):
        F = Field(self.p)
        out, s = [], 0
        for d in self.dims:
            rows = tuple(tuple(int(x) for x in r) for r in self.arr[i, s:s + d])
            out.append(Subspace(F, self.N, rows))
            s += d
        return tuple(out)

    def point(self, i):
        """One subspace for single-block points, otherwise the member tuple."""
        subs = self.subspaces(i)
        return subs[0] if len(subs) == 1 else subs


def point_array(objs, p):
    """Stack subspaces, flags or tuples of subspaces into a canonical array."""
    rows, dims = [], None
    for o in objs:
        if isinstance(o, IsotropicFlag):
            o = o.spaces
        elif isinstance(o, Subspace):
            o = (o,)
        d = tuple(S.dim for S in o)
        if dims is None:
            dims = d
        elif d != dims:
            raise ValueError("points of different types")
        rows.append([list(b) for S in o for b in S.basis])
    N = objs[0].ambient if isinstance(objs[0], Subspace) else (
        objs[0].spaces[0].ambient if isinstance(objs[0], IsotropicFlag) else objs[0][0].ambient)
    arr = np.array(rows, dtype=np.int64).reshape(len(rows), sum(dims), N)
    return _canon(arr, dims, p), dims, N


def closure_points(start, gens, dims, p, budget=None):
    """All images of the start points under the group generated by gens."""
    budget = point_budget(budget)
    mats = as_matrices(gens, p)
    N = start.shape[-1]
    known = PointSet(p, N, dims, start)
    frontier = known.arr
    while len(frontier):
        imgs = [act(frontier, g, dims, p) for g in mats]
        if not imgs:
            break
        cand = PointSet(p, N, dims, np.concatenate(imgs))
        new = cand.arr[known.index(cand.arr) < 0]
        if not len(new):
            break
        known = PointSet(p, N, dims, np.concatenate([known.arr, new]))
        if len(known) > budget:
            raise BudgetExceeded("point closure", len(known), budget)
        frontier = new
    return known


def coordinate_point(N, member_dims):
    """The point (span(e_1..e_d) for d in member_dims) as a 1-point array."""
    rows = []
    for d in member_dims:
        for i in range(d):
            r = [0] * N
            r[i] = 1
            rows.append(r)
    return np.array([rows], dtype=np.int64)


# -- orbit partitions --------------------------------------------------------------

@dataclass
class OrbitPartition:
    points: PointSet
    labels: np.ndarray            # orbit id per point
    sizes: list                   # per orbit id
    reps: list                    # point index of each orbit's representative
    tuples: list = None           # invariant tuple per orbit, when computed

    @property
    def orbit_count(self):
        return len(self.sizes)

    def orbit_sizes(self):
        return sorted(self.sizes)

    def representative(self, k):
        return self.points.point(self.reps[k])

    def orbit_of(self, obj):
        arr, _, _ = point_array([obj], self.points.p)
        i = int(self.points.index(arr)[0])
        if i < 0:
            raise KeyError("point is not in the partitioned set")
        return int(self.labels[i])

    def same_orbit(self, a, b):
        return self.orbit_of(a) == self.orbit_of(b)


def orbit_partition(points, gens, budget=None):
    """Connected components of the generator action graph on the points.

    Orbit ids are ordered by representative, and the representative is
    the point with the smallest packed key.
    """
    if not isinstance(points, PointSet):
        points = list(points)
        first = points[0].spaces[0] if isinstance(points[0], IsotropicFlag) else (
            points[0] if isinstance(points[0], Subspace) else points[0][0])
        points = make_points(points, first.field.p)
    ps = points
    mats = as_matrices(gens, ps.p)
    M = len(ps)
    if M * max(len(mats), 1) > APPLY_BUDGET:
        raise BudgetExceeded("generator applications", M * len(mats), APPLY_BUDGET)
    src, dst = [np.arange(M)], [np.arange(M)]
    for g in mats:
        idx = ps.index(act(ps.arr, g, ps.dims, ps.p))
        if (idx < 0).any():
            raise ValueError("a generator does not preserve the point set")
        src.append(np.arange(M))
        dst.append(idx)
    src, dst = np.concatenate(src), np.concatenate(dst)
    graph = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(M, M))
    _, raw = connected_components(graph, directed=True, connection="weak")
    first = {}
    for i, lab in enumerate(raw.tolist()):
        first.setdefault(lab, i)
    order = sorted(first, key=first.get)
    relabel = np.empty(len(order), dtype=np.int64)
    for new, old in enumerate(order):
        relabel[old] = new
    labels = relabel[raw]
    sizes = np.bincount(labels, minlength=len(order)).tolist()
    reps = [first[old] for old in order]
    return OrbitPartition(ps, labels, sizes, reps)


def make_points(objs, p):
    arr, dims, N = point_array(list(objs), p)
    return PointSet(p, N, dims, arr)


# -- isotropic subspaces and flags ------------------------------------------------------

def isotropic_count(m, k, q):
    """Number of isotropic k-subspaces for a form of Witt index m (odd dimension)."""
    return gaussian_binomial(m, k, q) * prod(q ** (m - i) + 1 for i in range(k))


def isotropic_flag_count(n, ftype, q):
    out, used = 1, 0
    for a in ftype.parts:
        out *= isotropic_count(n - used, a, q)
        used += a
    return out


@lru_cache(maxsize=None)
def isotropic_flag_points(n, p, parts):
    """All isotropic flags of the given type, as the G-orbit of the coordinate flag."""
    ftype = FlagType(tuple(parts))
    expected = isotropic_flag_count(n, ftype, p)
    budget = point_budget()
    if expected > budget:
        raise BudgetExceeded(f"isotropic flags {ftype} in O_{dim_of(n)}({p})", expected, budget)
    N = dim_of(n)
    dims = ftype.dims()
    ps = closure_points(coordinate_point(N, dims), g_generators(Field(p), n), dims, p)
    if len(ps) != expected:
        raise AssertionError(f"flag closure found {len(ps)} points, expected {expected}")
    return ps


def max_isotropic_points(n, p):
    return isotropic_flag_points(n, p, (n,))


def enumerate_max_isotropic(n, p):
    """All n-dimensional isotropic subspaces of GF(p)^(2n+1)."""
    ps = max_isotropic_points(n, p)
    return [ps.point(i) for i in range(len(ps))]


@lru_cache(maxsize=None)
def gl_flag_points(N, p, dims):
    """All flags of F^N with the given member dimensions."""
    dims = tuple(dims)
    expected = 1
    prev = 0
    for d in dims:
        expected *= gaussian_binomial(N - prev, d - prev, p)
        prev = d
    budget = point_budget()
    if expected > budget:
        raise BudgetExceeded(f"flags {dims} of GF({p})^{N}", expected, budget)
    ps = closure_points(coordinate_point(N, dims), gl_generators(Field(p), N), dims, p)
    if len(ps) != expected:
        raise AssertionError("GL flag closure is incomplete")
    return ps


def full_flag_dims(N):
    return tuple(range(1, N))


# -- R-orbits on maximal isotropic subspaces ------------------------------------------

def count_R_orbits(n, alpha, beta, shape, p, check_canonical=True, check_constancy=False):
    """Partition maximal isotropics under R and compare with the tuple enumeration."""
    if (shape.n, shape.alpha, shape.beta) != (n, alpha, beta):
        raise ValueError("shape does not match (n, alpha, beta)")
    F = Field(p)
    ps = max_isotropic_points(n, p)
    part = orbit_partition(ps, r_generators(shape, p))
    Up, Um = shape.model_pair(F)
    expected = enumerate_tuples(shape)
    problems = []
    tuples = []
    for k in range(part.orbit_count):
        V = part.representative(k)
        t = compute_b(Up, Um, V, n, shape)
        tuples.append(t)
        if check_canonical:
            g, t2, _ = canonicalize(Up, Um, V, n, shape)
            if t2 != t or g.image(V) != representative(shape, t, F) \
                    or g.image(Up) != Up or g.image(Um) != Um:
                problems.append({"orbit": k, "issue": "canonical form", "tuple": t.to_json()})
    if check_constancy:
        for i in range(len(ps)):
            t = compute_b(Up, Um, ps.point(i), n, shape)
            if t != tuples[part.labels[i]]:
                problems.append({"point": i, "issue": "tuple not constant on orbit"})
                break
    part.tuples = tuples
    if len(set(tuples)) != len(tuples):
        problems.append({"issue": "two orbits share a tuple"})
    if set(tuples) != set(expected):
        problems.append({"issue": "orbit tuples differ from the enumeration"})
    report = {
        "config": {"n": n, "alpha": alpha, "beta": beta, "shape": shape.as_dict()},
        "p": p,
        "point_count": len(ps),
        "orbit_count": part.orbit_count,
        "expected": len(expected),
        "match": part.orbit_count == len(expected) and not problems,
        "orbit_sizes": part.orbit_sizes(),
        "problems": problems,
    }
    return report, part


def count_flag_orbits(flag_type, gens, n, p, ambient="orthogonal"):
    return flag_orbit_partition(flag_type, gens, n, p, ambient).orbit_count


def flag_orbit_partition(flag_type, gens, n, p, ambient="orthogonal"):
    """Orbits of gens on flags of the given type.

    ambient "orthogonal": isotropic flags in GF(p)^(2n+1); "gl": all flags in
    GF(p)^n, where the type's parts must sum to n or less.
    """
    if not isinstance(flag_type, FlagType):
        flag_type = FlagType(tuple(flag_type))
    if ambient == "orthogonal":
        ps = isotropic_flag_points(n, p, flag_type.parts)
    elif ambient == "gl":
        dims = tuple(d for d in flag_type.dims() if 0 < d < n)
        ps = gl_flag_points(n, p, dims)
    else:
        raise ValueError(f"unknown ambient {ambient!r}")
    return orbit_partition(ps, gens)


# -- group elements -----------------------------------------------------------------

def group_elements(gens, p, budget=None):
    """All products of the generators, as a sorted (M, N, N) array."""
    budget = point_budget(budget)
    mats = as_matrices(gens, p)
    if not mats:
        raise ValueError("no generators")
    N = mats[0].shape[0]
    ident = np.eye(N, dtype=np.int64)[None]
    known_arr = ident
    keys = _pack(ident)
    frontier = ident
    while len(frontier):
        imgs = np.concatenate([(g @ frontier) % p for g in mats])
        k = _pack(imgs)
        k, first = np.unique(k, return_index=True)
        imgs = imgs[first]
        pos = np.searchsorted(keys, k)
        pos = np.minimum(pos, len(keys) - 1)
        new = keys[pos] != k
        frontier = imgs[new]
        if not len(frontier):
            break
        known_arr = np.concatenate([known_arr, frontier])
        keys = _pack(known_arr)
        order = np.argsort(keys)
        keys, known_arr = keys[order], known_arr[order]
        if len(keys) > budget:
            raise BudgetExceeded("group closure", len(keys), budget)
    return known_arr


def orthogonal_group_order(n, q):
    """|O_{2n+1}(q)| for q odd."""
    return 2 * q ** (n * n) * prod(q ** (2 * i) - 1 for i in range(1, n + 1))


@lru_cache(maxsize=None)
def _combos(p, k):
    return np.array(list(product(range(p), repeat=k)), dtype=np.int64).reshape(-1, k)


def orthogonal_maps(n, p, pairs=(), limit=None, budget=None):
    """Every g in O_{2n+1}(GF(p)) with g S = T for each (S, T) in pairs.

    Backtracking over the images c_0, c_1, ... of a basis b_0, b_1, ...
    adapted to the constraint subspaces.  At step t the image c_t solves
    the linear conditions (c_t, c_j) = (b_t, b_j) for j < t and the
    membership conditions coming from S ∩ span(b_0..b_t), then the
    quadratic condition (c_t, c_t) = (b_t, b_t) filters the candidates.
    Returns a list of (N, N) int64 arrays, at most ``limit`` of them.
    """
    budget = point_budget(budget)
    F = Field(p)
    N = dim_of(n)
    pairs = [(S, T) for S, T in pairs]
    for S, T in pairs:
        if S.dim != T.dim:
            return []
    # basis adapted to the constraints, smaller subspaces first
    basis = []
    cur = Subspace.zero(F, N)
    for S, _ in sorted(pairs, key=lambda st: st[0].dim):
        for v in S.basis:
            if v not in cur:
                basis.append(v)
                cur = cur + Subspace(F, N, (v,))
    for i in range(N):
        e = tuple(1 if j == i else 0 for j in range(N))
        if e not in cur:
            basis.append(e)
            cur = cur + Subspace(F, N, (e,))
    Bm = Mat.from_columns(F, basis, N)
    Binv = Bm.inverse()
    J = np.fliplr(np.eye(N, dtype=np.int64))
    Bnp = np.array(Bm.rows, dtype=np.int64)
    G = (Bnp.T @ J @ Bnp) % p
    # membership constraints per step, in b-coordinates
    cons = [[] for _ in range(N)]
    for S, T in pairs:
        Sc = Subspace.span(F, [Binv @ s for s in S.basis], N) if S.dim else Subspace.zero(F, N)
        ann = np.array(nullspace(F, T.basis, N) if T.dim else
                       [tuple(1 if j == i else 0 for j in range(N)) for i in range(N)],
                       dtype=np.int64).reshape(-1, N)
        if not len(ann):
            continue
        prev = 0
        for t in range(N):
            part = Sc & Subspace.coordinate(F, N, range(t + 1))
            if part.dim > prev:
                w = next(v for v in part.basis if v[t])
                w = [F.red(x * F.inv(w[t])) for x in w]
                cons[t].append((np.array(w[:t], dtype=np.int64), ann))
                prev = part.dim
    out = []
    count = [0]
    C = np.zeros((N, N), dtype=np.int64)   # columns are the chosen images
    Binv_np = np.array(Binv.rows, dtype=np.int64)

    def step(t):
        rows, rhs = [], []
        for j in range(t):
            rows.append(tuple(int(x) for x in (J @ C[:, j]) % p))
            rhs.append(int(G[t, j]))
        for w, ann in cons[t]:
            s = (C[:, :t] @ w) % p
            for a in ann:
                rows.append(tuple(int(x) for x in a))
                rhs.append(int(-(a @ s)) % p)
        if rows:
            x0 = solve(F, rows, N, rhs)
            if x0 is None:
                return False
            K = nullspace(F, rows, N)
        else:
            x0 = (0,) * N
            K = [tuple(1 if j == i else 0 for j in range(N)) for i in range(N)]
        if p ** len(K) > budget:
            raise BudgetExceeded("candidate images", p ** len(K), budget)
        x0 = np.array(x0, dtype=np.int64)
        if K:
            cand = (x0[None, :] + _combos(p, len(K)) @ np.array(K, dtype=np.int64)) % p
        else:
            cand = x0[None, :]
        qv = np.einsum("ij,jk,ik->i", cand, J, cand) % p
        cand = cand[qv == G[t, t]]
        for c in cand:
            C[:, t] = c
            if t == N - 1:
                out.append((C @ Binv_np) % p)
                count[0] += 1
                if limit is not None and count[0] >= limit:
                    return True
            elif step(t + 1):
                return True
        C[:, t] = 0
        return False

    step(0)
    return out


def stabilizer_elements(n, p, subspaces, limit=None):
    return orthogonal_maps(n, p, [(S, S) for S in subspaces], limit=limit)


def transporter_exists(n, p, pairs):
    return bool(orthogonal_maps(n, p, pairs, limit=1))


def generation_report(gens, n, p, fixed):
    """Closure order of gens against the enumerated stabilizer of the fixed subspaces."""
    closure = group_elements(gens, p) if len(gens) else np.eye(dim_of(n), dtype=np.int64)[None]
    stab = stabilizer_elements(n, p, fixed)
    return {"n": n, "p": p, "closure_order": len(closure), "stabilizer_order": len(stab),
            "match": len(closure) == len(stab)}


def restrict(mats, V, p):
    """Matrices of g|_V in the RREF basis of V, for g stabilizing V."""
    B = np.array(V.basis, dtype=np.int64)
    piv = list(V.pivots)
    out = []
    for g in mats:
        img = (B @ np.asarray(g).T) % p          # rows g b_i
        M = img[:, piv].T                        # column i = coordinates of g b_i
        if not np.array_equal((M.T @ B) % p, img):
            raise ValueError("matrix does not stabilize the subspace")
        out.append(M % p)
    return out


def unique_matrices(mats, p):
    if not len(mats):
        return np.zeros((0, 0, 0), dtype=np.int64)
    arr = np.asarray(mats, dtype=np.int64) % p
    _, first = np.unique(_pack(arr), return_index=True)
    return arr[np.sort(first)]


# -- GL appendix: double cosets ------------------------------------------------------

def _embed_gl(A, start, n_gl):
    g = np.eye(n_gl, dtype=np.int64)
    k = A.shape[0]
    g[start:start + k, start:start + k] = A
    return g


def _gl_np(p, k):
    return as_matrices(gl_generators(Field(p), k), p)


def hashimoto_generators(k, p):
    """Generators of {diag(1, A) : A upper triangular in GL_{k-1}}."""
    w = Field(p).primitive_root()
    out = []
    for i in range(1, k):
        g = np.eye(k, dtype=np.int64)
        g[i, i] = w
        out.append(g)
        for j in range(i + 1, k):
            g = np.eye(k, dtype=np.int64)
            g[i, j] = 1
            out.append(g)
    return out


def borel_generators(k, p):
    w = Field(p).primitive_root()
    out = []
    for i in range(k):
        g = np.eye(k, dtype=np.int64)
        g[i, i] = w
        out.append(g)
        for j in range(i + 1, k):
            g = np.eye(k, dtype=np.int64)
            g[i, j] = 1
            out.append(g)
    return out


def parabolic_generators(a, p, j=None, H=None):
    """Generators of H N_j in GL_n for block sizes a (block j carries H).

    With j None (or H None) block j gets the full GL, giving the parabolic P.
    """
    n_gl = sum(a)
    starts = [sum(a[:i]) for i in range(len(a))]
    out = []
    for k, (s, ak) in enumerate(zip(starts, a)):
        if k == j and H is not None:
            blk = as_matrices(H, p)
        else:
            blk = _gl_np(p, ak)
        out += [_embed_gl(A, s, n_gl) for A in blk]
    for k in range(len(a)):
        for l in range(k + 1, len(a)):
            for r in range(starts[k], starts[k] + a[k]):
                for c in range(starts[l], starts[l] + a[l]):
                    g = np.eye(n_gl, dtype=np.int64)
                    g[r, c] = 1
                    out.append(g)
    return out


def flag_orbit_count_gl(gens, k, p):
    """Number of orbits of gens on the full flags of GF(p)^k."""
    if k <= 1:
        return 1
    ps = gl_flag_points(k, p, full_flag_dims(k))
    return orbit_partition(ps, gens).orbit_count


def multinomial(parts):
    parts = [x for x in parts if x]
    return factorial(sum(parts)) // prod(factorial(x) for x in parts)


def double_coset_count(H_gens, a, n_gl, p, j=None):
    """BFS count of Q = H N_j orbits on full flags, against n_H n!/prod(a_i!)."""
    a = tuple(int(x) for x in a)
    if sum(a) != n_gl or any(x <= 0 for x in a):
        raise ValueError("block sizes must be positive and sum to n_gl")
    H = as_matrices(H_gens, p) if H_gens is not None else None
    if j is None:
        if H is None:
            j = 0
        else:
            k = H[0].shape[0] if H else 1
            j = max(i for i, x in enumerate(a) if x == k)
    if H is not None and H and H[0].shape[0] != a[j]:
        raise ValueError("H does not fit block j")
    Q = parabolic_generators(a, p, j, H if H is not None else None)
    if n_gl == 1:
        count = 1
    else:
        count = orbit_partition(gl_flag_points(n_gl, p, full_flag_dims(n_gl)), Q).orbit_count
    if H is None:
        n_H = 1
    elif not H:
        n_H = len(gl_flag_points(a[j], p, full_flag_dims(a[j]))) if a[j] > 1 else 1
    else:
        n_H = flag_orbit_count_gl(H, a[j], p)
    formula = n_H * multinomial(a)
    return {"n_gl": n_gl, "a": list(a), "j": j, "p": p, "n_H": n_H,
            "orbit_count": count, "formula": formula, "match": count == formula}


# -- GL appendix: Grassmannian under H1 x B2 -------------------------------------------

def _block_diag(A, Bm):
    m, k = A.shape[0], Bm.shape[0]
    g = np.zeros((m + k, m + k), dtype=np.int64)
    g[:m, :m] = A
    g[m:, m:] = Bm
    return g


def normal_forms(m, n_dims, s):
    """Every (p, J, K) normal form S0 = U_{1,p} + e_J + (e_{p+k} + e_{j_k})."""
    I2 = range(m, m + n_dims)
    out = []
    for p0 in range(0, min(m, s) + 1):
        for q in range(0, min(n_dims, s - p0) + 1):
            r = s - p0 - q
            if p0 + r > m or q + r > n_dims:
                continue
            for Jset in _subsets(I2, q):
                rest = [i for i in I2 if i not in Jset]
                for Kset in _subsets(rest, r):
                    out.append((p0, tuple(Jset), tuple(Kset)))
    return out


def _subsets(items, k):
    from itertools import combinations
    return list(combinations(list(items), k))


def normal_form_space(F, m, n_dims, form):
    p0, Jset, Kset = form
    N = m + n_dims
    vecs = []
    for i in range(p0):
        vecs.append(tuple(1 if x == i else 0 for x in range(N)))
    for j in Jset:
        vecs.append(tuple(1 if x == j else 0 for x in range(N)))
    for k, j in enumerate(Kset):
        vecs.append(tuple(1 if x in (p0 + k, j) else 0 for x in range(N)))
    return Subspace.span(F, vecs, N) if vecs else Subspace.zero(F, N)


def grassmann_finiteness_check(m, n_dims, s, H1_gens, p):
    """Orbit structure of s-subspaces of F^m + F^n under H1 x B2."""
    F = Field(p)
    N = m + n_dims
    if not 0 < s < N:
        raise ValueError("need 0 < s < m + n")
    ps = gl_flag_points(N, p, (s,))
    I_n = np.eye(n_dims, dtype=np.int64)
    I_m = np.eye(m, dtype=np.int64)
    G1 = [_block_diag(A, I_n) for A in _gl_np(p, m)]
    G2 = [_block_diag(I_m, A) for A in _gl_np(p, n_dims)]
    B2 = [_block_diag(I_m, A) for A in borel_generators(n_dims, p)]
    H1 = [_block_diag(A, I_n) for A in as_matrices(H1_gens, p)]
    # the four-invariant classification under G1 x G2
    sig = {(f[0], len(f[1])) for f in normal_forms(m, n_dims, s)}
    count_g1g2 = orbit_partition(ps, G1 + G2).orbit_count
    # every G1 x B2 orbit holds exactly one normal form
    forms = normal_forms(m, n_dims, s)
    part_gb = orbit_partition(ps, G1 + B2)
    hits = [part_gb.orbit_of(normal_form_space(F, m, n_dims, f)) for f in forms]
    one_each = sorted(hits) == list(range(part_gb.orbit_count))
    # H1 x B2 orbits against the sum over normal forms of |H1 \ G1 / P1|
    part_hb = orbit_partition(ps, H1 + B2)
    predicted = 0
    for p0, Jset, Kset in forms:
        dims = tuple(d for d in range(p0, p0 + len(Kset) + 1) if 0 < d < m)
        if not dims:
            predicted += 1
            continue
        flags = gl_flag_points(m, p, dims)
        predicted += orbit_partition(flags, as_matrices(H1_gens, p) or [I_m]).orbit_count
    return {
        "m": m, "n": n_dims, "s": s, "p": p,
        "point_count": len(ps),
        "signatures": len(sig), "g1g2_orbits": count_g1g2,
        "normal_forms": len(forms), "g1b2_orbits": part_gb.orbit_count,
        "normal_form_per_orbit": one_each,
        "h1b2_orbits": part_hb.orbit_count, "predicted": predicted,
        "match": count_g1g2 == len(sig) and one_each and part_hb.orbit_count == predicted,
    }


def projection_lemma_check(m, n_dims, s, p, budget=None):
    """For every normal form S0: the G1-part of Stab_{G1 x B2}(S0) is P1."""
    F = Field(p)
    N = m + n_dims
    I_n = np.eye(n_dims, dtype=np.int64)
    I_m = np.eye(m, dtype=np.int64)
    G1 = group_elements(_gl_np(p, m), p, budget)
    B2 = group_elements(borel_generators(n_dims, p), p, budget)
    results = []
    for form in normal_forms(m, n_dims, s):
        S0 = normal_form_space(F, m, n_dims, form)
        S0_arr, dims, _ = point_array([S0], p)
        # Q = {(g1, b2) : (g1, b2) S0 = S0}, projected to G1
        proj = set()
        for b in B2:
            imgs = act(np.repeat(S0_arr, 1, axis=0), _block_diag(I_m, b), dims, p)
            g1s = np.array([_block_diag(g, I_n) for g in G1])
            moved = (imgs @ np.transpose(g1s, (0, 2, 1))) % p
            moved = _canon(moved, dims, p)
            ok = (_pack(moved) == _pack(S0_arr)[0])
            for g in G1[ok]:
                proj.add(g.tobytes())
        p0, _, Kset = form
        flag = [Subspace.coordinate(F, m, range(d)) for d in range(p0, p0 + len(Kset) + 1)]
        P1 = set()
        for g in G1:
            if all(S.image(Mat(F, tuple(tuple(int(x) for x in r) for r in g), m)) == S for S in flag):
                P1.add(g.tobytes())
        results.append({"form": [form[0], list(form[1]), list(form[2])],
                        "projection_order": len(proj), "parabolic_order": len(P1),
                        "equal": proj == P1})
    return {"m": m, "n": n_dims, "s": s, "p": p, "forms": results,
            "match": all(r["equal"] for r in results)}


# -- stabilizers of V on full flags of V (section 5 configurations) -------------------

SECTION5_CASES = ("b4", "b11", "b15", "b8", "b13")
SECTION5_ALL = ("b4", "b11", "b7", "b5", "b6", "b15", "b8", "b13")


def section5_shape(case, n, alpha):
    if case in ("b4", "b11", "b7"):
        return PairShape.make(n, ap=alpha, am=1)
    return PairShape.make(n, ap=alpha - 1, a1=1)


def block_pattern(case, n, alpha, b3):
    """Diagonal block sizes, block kinds and forced-zero upper blocks of R_V|_V.

    Kinds: "gl" a free GL block, "lam" a free scalar, "inv" the inverse of
    the previous scalar, "sign" an entry that is +1 or -1.  The b15 entry is
    a sign because -1 lies in R_V.
    """
    table = {
        "b4": ([b3, 1, n - alpha - 1, alpha - b3], ["gl", "lam", "gl", "gl"], {(0, 1)}),
        "b11": ([b3, n - alpha - 1, 1, alpha - b3], ["gl", "gl", "lam", "gl"], {(2, 3)}),
        "b7": ([b3, 1, n - alpha - 1, alpha - b3 - 1, 1], ["gl", "lam", "gl", "gl", "inv"], set()),
        "b5": ([b3, 1, n - alpha, alpha - b3 - 1], ["gl", "lam", "gl", "gl"], {(1, 2), (1, 3)}),
        "b6": ([b3, n - alpha, 1, alpha - b3 - 1], ["gl", "gl", "lam", "gl"], {(0, 2), (1, 2)}),
        "b15": ([b3, n - alpha, 1, alpha - b3 - 1], ["gl", "gl", "sign", "gl"], {(2, 3)}),
        "b8": ([b3, 1, n - alpha, alpha - b3 - 2, 1], ["gl", "lam", "gl", "gl", "inv"], {(1, 2)}),
        "b13": ([b3, n - alpha - 1, 1, 1, alpha - b3 - 1], ["gl", "gl", "lam", "inv", "gl"],
                {(2, 3), (2, 4)}),
    }
    if case not in table:
        raise ValueError(f"unknown case {case!r}")
    return table[case]


def gl_order(k, q):
    return prod(q ** k - q ** i for i in range(k))


def block_group_order(case, n, alpha, b3, q):
    sizes, kinds, zeros = block_pattern(case, n, alpha, b3)
    order = 1
    for sz, kind in zip(sizes, kinds):
        if kind == "gl":
            order *= gl_order(sz, q)
        elif kind == "lam":
            order *= q - 1
        elif kind == "sign":
            order *= 2
    for r in range(len(sizes)):
        for c in range(r + 1, len(sizes)):
            if (r, c) not in zeros:
                order *= q ** (sizes[r] * sizes[c])
    return order


def _section5_blocks(case, n, alpha, b3):
    """Parabolic block sizes, the index of the H block and its size."""
    if case == "b4":
        return [b3 + 1, n - alpha - 1, alpha - b3], 0, b3 + 1
    if case == "b11":
        return [b3, n - alpha - 1, alpha - b3 + 1], 2, alpha - b3 + 1
    if case == "b15":
        return [b3, n - alpha, alpha - b3], 2, alpha - b3
    if case == "b8":
        return [b3, n - alpha + 1, alpha - b3 - 2, 1], 1, n - alpha + 1
    if case == "b13":
        return [b3, n - alpha - 1, alpha - b3 + 1], 2, alpha - b3 + 1
    raise ValueError(f"no reduced count for case {case!r}")


def reduced_subgroup(case, k, p, tilde=False):
    """Generators of the reduced subgroup H of GL_k for a section 5 case."""
    w = Field(p).primitive_root()
    wi = pow(w, p - 2, p)

    def diag(pos, val):
        g = np.eye(k, dtype=np.int64)
        g[pos, pos] = val
        return g

    def gl_on(lo, hi):
        return [_embed_gl(A, lo, k) for A in _gl_np(p, hi - lo)] if hi > lo else []

    if case in ("b4",):                       # diag(A, lambda)
        return gl_on(0, k - 1) + [diag(k - 1, w)]
    if case in ("b11", "b8"):                 # diag(lambda, C)
        return [diag(0, w)] + gl_on(1, k)
    if case == "b15":                         # diag(1, C)
        return gl_on(1, k)
    if case == "b13":                         # [[l,0,0],[0,l^-1,*],[0,0,C]]
        out = gl_on(2, k)
        for c in range(2, k):
            g = np.eye(k, dtype=np.int64)
            g[1, c] = 1
            out.append(g)
        if tilde:
            out += [diag(0, w), diag(1, w)]
        else:
            g = np.eye(k, dtype=np.int64)
            g[0, 0], g[1, 1] = w, wi
            out.append(g)
        return out
    raise ValueError(f"unknown case {case!r}")


def reduced_count_formula(case, n, alpha, b3):
    return {
        "b4": (b3 + 2) * (b3 + 1) // 2,
        "b11": (alpha - b3 + 2) * (alpha - b3 + 1) // 2,
        "b15": (alpha - b3 + 1) * (alpha - b3) // 2,
        "b8": (n - alpha + 2) * (n - alpha + 1) // 2,
    }.get(case)


def section5_check(case, n, alpha, b3, p=3):
    """R_V-orbits on the full flags of V for one configuration with b_case = 1.

    Route one enumerates R_V, restricts it to V and counts its orbits on
    full flags of V.  Route two counts orbits of the reduced subgroup H on
    full flags of GL_k and multiplies by the multinomial of the block sizes.
    The order of R_V|_V is also compared with the block pattern and with the
    closure of the extended R_V generators.
    """
    F = Field(p)
    shape = section5_shape(case, n, alpha)
    j = int(case[1:])
    sizes, _, _ = block_pattern(case, n, alpha, b3)
    if any(x < 0 for x in sizes):
        raise ValueError("configuration is not admissible")
    tuples = [t for t in enumerate_tuples(shape) if t[j] == 1 and t[3] == b3]
    if not tuples:
        raise ValueError(f"no tuple with {case}=1 and b3={b3} for this shape")
    q_order = block_group_order(case, n, alpha, b3, p)
    counted = case in SECTION5_CASES
    n_H = formula = expected = None
    extra = {}
    if counted:
        blocks, _, k = _section5_blocks(case, n, alpha, b3)
        H = reduced_subgroup(case, k, p)
        n_H = flag_orbit_count_gl(H or [np.eye(k, dtype=np.int64)], k, p)
        formula = reduced_count_formula(case, n, alpha, b3)
        expected = n_H * multinomial(blocks)
        if case == "b13":
            Ht = reduced_subgroup(case, k, p, tilde=True)
            n_Ht = flag_orbit_count_gl(Ht, k, p)
            Z = [np.eye(k, dtype=np.int64) * F.primitive_root()]
            order_Ht = len(group_elements(Ht, p))
            order_ZH = len(group_elements(H + Z, p))
            extra = {"n_H_tilde": n_Ht, "index_tilde_over_ZH": order_Ht // order_ZH,
                     "relation": n_Ht <= n_H <= 2 * n_Ht and n_H > n_Ht
                     and order_Ht == 2 * order_ZH}
    Up, Um = shape.model_pair(F)
    rows = []
    ok = True
    for t in tuples:
        V = representative(shape, t, F)
        elems = stabilizer_elements(n, p, [Up, Um, V])
        on_V = unique_matrices(restrict(elems, V, p), p)
        count = flag_orbit_count_gl(list(on_V), n, p)
        gens = rv_generators(shape, t, p, extended=True)
        gen_on_V = list(unique_matrices(restrict(as_matrices(gens, p), V, p), p))
        gen_order = len(group_elements(gen_on_V, p))
        rows.append({"tuple": t.to_json(), "stabilizer_order": len(elems),
                     "restricted_order": len(on_V), "generated_restricted_order": gen_order,
                     "orbit_count": count})
        ok = ok and len(on_V) == q_order == gen_order
        if counted:
            ok = ok and count == expected
    if formula is not None:
        ok = ok and n_H == formula
    if extra:
        ok = ok and extra["relation"]
    return {"case": case, "n": n, "alpha": alpha, "b3": b3, "p": p,
            "block_group_order": q_order, "n_H": n_H, "n_H_formula": formula,
            "expected": expected, "configs": rows, "match": ok, **extra}


# -- moving flag orbits for a fixed pair -------------------------------------------------

def moving_flag_orbits(shape, p, parts):
    """R-orbits on isotropic flags of the given type, (U+, U-) in model position."""
    ps = isotropic_flag_points(shape.n, p, tuple(parts))
    return orbit_partition(ps, r_generators(shape, p))


def triple_orbit_count(n, a, b, c, p):
    """Orbits of G on M_a x M_b x M_c when a and b are single-step types.

    The first two components are moved to a model pair, one per relative
    position, and the third is partitioned under the pair stabilizer.
    """
    from .invariants import all_shapes
    if len(a) != 1 or len(b) != 1:
        raise ValueError("the first two types must be single subspaces")
    total = 0
    per_shape = []
    for shape in all_shapes(n, a[0], b[0]):
        k = moving_flag_orbits(shape, p, tuple(c)).orbit_count
        per_shape.append({"shape": shape.as_dict(), "orbits": k})
        total += k
    return total, per_shape
