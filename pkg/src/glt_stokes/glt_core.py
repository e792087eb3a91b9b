"""Block multilevel Toeplitz machinery.

Matrix-valued trigonometric polynomials (block symbols) with exact rational
coefficients, Toeplitz generation, shuffle/interleave permutation index
maps, the tau (Hankel corner correction) approximation of banded Toeplitz
matrices, and structural helpers that embed the crisscross stiffness block
into its extended block-Toeplitz form.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

__all__ = [
    "BlockSymbol",
    "IndexMap",
    "toeplitz_from_symbol",
    "perm_block",
    "perm_Pi",
    "identity_kron",
    "tau_approx",
    "tau_eigenvalues",
    "dst1_matrix",
    "block_toeplitz_defect",
    "zero_distribution_fraction",
    "velocity_slot_assignment",
    "velocity_extension_map",
    "extend_to_block_toeplitz",
]


# ---------------------------------------------------------------------------
# block symbols

def _to_fraction_matrix(mat, s1, s2):
    out = np.empty((s1, s2), dtype=object)
    for r in range(s1):
        for c in range(s2):
            v = mat[r][c]
            out[r, c] = v if isinstance(v, Fraction) else Fraction(v)
    return out


class BlockSymbol:
    """Matrix-valued trigonometric polynomial sum_k C_k e^{i k.theta}.

    Coefficients are s1 x s2 matrices of exact rationals indexed by integer
    frequency offsets k (d-tuples, d = number of levels).  Evaluation
    converts to complex floats; all structural identities are checked on
    the rationals.
    """

    def __init__(self, s1: int, s2: int, levels: int, coeffs: dict,
                 hermitian: bool = False):
        self.s1 = int(s1)
        self.s2 = int(s2)
        self.levels = int(levels)
        self.coeffs = {}
        for k, mat in coeffs.items():
            key = (k,) if np.isscalar(k) else tuple(int(x) for x in k)
            if len(key) != self.levels:
                raise ValueError(f"offset {key} does not match {levels} levels")
            m = _to_fraction_matrix(mat, s1, s2)
            if any(v != 0 for v in m.ravel()):
                self.coeffs[key] = m
        self.hermitian = bool(hermitian)
        self._float_cache = {k: np.array([[float(v) for v in row] for row in m],
                                         dtype=float)
                             for k, m in self.coeffs.items()}
        if hermitian:
            self._check_hermitian()

    def _check_hermitian(self):
        if self.s1 != self.s2:
            raise ValueError("hermitian symbol must be square")
        for k, m in self.coeffs.items():
            mk = self.coeffs.get(tuple(-x for x in k))
            if mk is None or not np.array_equal(m.T, mk):
                raise ValueError(f"coefficient at {k} breaks Hermitian symmetry")

    def offsets(self):
        return sorted(self.coeffs.keys())

    def float_coefficients(self) -> dict:
        """Offsets to float coefficient matrices (read-only view)."""
        return self._float_cache

    def coefficient(self, k) -> np.ndarray:
        key = (k,) if np.isscalar(k) else tuple(int(x) for x in k)
        m = self.coeffs.get(key)
        if m is None:
            return np.full((self.s1, self.s2), Fraction(0), dtype=object)
        return m.copy()

    def eval(self, *theta) -> np.ndarray:
        """Evaluate at one frequency point; returns complex (s1, s2)."""
        if len(theta) != self.levels:
            raise ValueError(f"expected {self.levels} angles, got {len(theta)}")
        th = np.asarray(theta, dtype=float)
        out = np.zeros((self.s1, self.s2), dtype=complex)
        for k, m in self._float_cache.items():
            out += m * np.exp(1j * float(np.dot(k, th)))
        return out

    def eval_grid(self, thetas: np.ndarray) -> np.ndarray:
        """Evaluate at (N, levels) points; returns complex (N, s1, s2)."""
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        out = np.zeros((len(th), self.s1, self.s2), dtype=complex)
        for k, m in self._float_cache.items():
            phase = np.exp(1j * (th @ np.asarray(k, dtype=float)))
            out += phase[:, None, None] * m[None, :, :]
        return out

    def conj_transpose(self) -> "BlockSymbol":
        coeffs = {tuple(-x for x in k): m.T for k, m in self.coeffs.items()}
        return BlockSymbol(self.s2, self.s1, self.levels, coeffs,
                           hermitian=self.hermitian)

    def map_entries(self, fn) -> "BlockSymbol":
        """New symbol with fn applied to every rational coefficient."""
        coeffs = {}
        for k, m in self.coeffs.items():
            out = np.empty_like(m)
            for idx, v in np.ndenumerate(m):
                out[idx] = fn(v)
            coeffs[k] = out
        return BlockSymbol(self.s1, self.s2, self.levels, coeffs)

    def __eq__(self, other):
        if not isinstance(other, BlockSymbol):
            return NotImplemented
        if (self.s1, self.s2, self.levels) != (other.s1, other.s2, other.levels):
            return False
        keys = set(self.coeffs) | set(other.coeffs)
        return all(np.array_equal(self.coefficient(k), other.coefficient(k))
                   for k in keys)

    def to_json(self) -> dict:
        """Schema {s1, s2, levels, coeffs: [{k, re, im}]}; exact
        numerator/denominator tables ride along for lossless round trips."""
        entries = []
        for k, m in self.coeffs.items():
            entries.append({
                "k": list(k),
                "re": [[float(v) for v in row] for row in m],
                "im": [[0.0] * self.s2 for _ in range(self.s1)],
                "num": [[v.numerator for v in row] for row in m],
                "den": [[v.denominator for v in row] for row in m],
            })
        return {"s1": self.s1, "s2": self.s2, "levels": self.levels,
                "hermitian": self.hermitian, "coeffs": entries}

    @staticmethod
    def from_json(data: dict) -> "BlockSymbol":
        coeffs = {}
        for entry in data["coeffs"]:
            if "num" in entry:
                num, den = entry["num"], entry["den"]
                mat = [[Fraction(num[r][c], den[r][c])
                        for c in range(len(num[r]))] for r in range(len(num))]
            else:
                if any(v != 0.0 for row in entry.get("im", []) for v in row):
                    raise ValueError("only real rational coefficients are "
                                     "supported")
                mat = [[Fraction(v) for v in row] for row in entry["re"]]
            coeffs[tuple(entry["k"])] = mat
        return BlockSymbol(data["s1"], data["s2"], data["levels"], coeffs,
                           hermitian=data.get("hermitian", False))


# ---------------------------------------------------------------------------
# Toeplitz generation

def toeplitz_from_symbol(sym: BlockSymbol, n) -> sp.csr_matrix:
    """Block d-level Toeplitz matrix generated by the symbol.

    Block (r, c) at multilevel offset k = r - c holds the coefficient C_k;
    offsets beyond the grid contribute nothing.
    """
    dims = (int(n),) if np.isscalar(n) else tuple(int(x) for x in n)
    if len(dims) != sym.levels:
        raise ValueError(f"size tuple {dims} does not match {sym.levels} levels")
    if any(d < 1 for d in dims):
        raise ValueError("grid dimensions must be positive")
    N = int(np.prod(dims))
    s1, s2 = sym.s1, sym.s2

    # flat index of multilevel cells, slowest level first
    strides = np.cumprod((dims + (1,))[1:][::-1])[::-1]

    rows_all, cols_all, vals_all = [], [], []
    for k, mat in sym._float_cache.items():
        ranges = [np.arange(max(0, kk), d + min(0, kk)) for kk, d in zip(k, dims)]
        if any(len(r) == 0 for r in ranges):
            continue
        mesh = np.meshgrid(*ranges, indexing="ij")
        cell_r = sum(m.ravel() * s for m, s in zip(mesh, strides))
        cell_c = sum((m.ravel() - kk) * s for m, kk, s in zip(mesh, k, strides))
        rr, cc = np.nonzero(mat)
        vv = mat[rr, cc]
        rows_all.append((cell_r[:, None] * s1 + rr[None, :]).ravel())
        cols_all.append((cell_c[:, None] * s2 + cc[None, :]).ravel())
        vals_all.append(np.broadcast_to(vv, (len(cell_r), len(vv))).ravel())

    if not rows_all:
        return sp.csr_matrix((s1 * N, s2 * N))
    T = sp.coo_matrix(
        (np.concatenate(vals_all),
         (np.concatenate(rows_all), np.concatenate(cols_all))),
        shape=(s1 * N, s2 * N)).tocsr()
    T.sum_duplicates()
    return T


# ---------------------------------------------------------------------------
# index maps

@dataclass(frozen=True)
class IndexMap:
    """Injective map of row indices; as a matrix, the 0/1 semi-orthogonal
    P of shape (target_size, source_size) with P[targets[i], i] = 1."""

    source_size: int
    target_size: int
    targets: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.targets, dtype=np.int64)
        if len(t) != self.source_size:
            raise ValueError("targets length must equal source_size")
        if len(np.unique(t)) != len(t):
            raise ValueError("index map must be injective")
        if t.min() < 0 or t.max() >= self.target_size:
            raise ValueError("targets out of range")
        object.__setattr__(self, "targets", t)

    @property
    def is_permutation(self) -> bool:
        return self.source_size == self.target_size

    def matrix(self) -> sp.csr_matrix:
        data = np.ones(self.source_size)
        cols = np.arange(self.source_size)
        return sp.csr_matrix((data, (self.targets, cols)),
                             shape=(self.target_size, self.source_size))

    def inverse(self) -> "IndexMap":
        if not self.is_permutation:
            raise ValueError("only permutations invert")
        inv = np.empty_like(self.targets)
        inv[self.targets] = np.arange(self.source_size)
        return IndexMap(self.source_size, self.source_size, inv)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """P v: embed a source vector into the target index space."""
        out = np.zeros(self.target_size, dtype=np.asarray(v).dtype)
        out[self.targets] = v
        return out

    def restrict(self, v: np.ndarray) -> np.ndarray:
        """P* v: pull a target vector back to the source indices."""
        return np.asarray(v)[self.targets]

    def compress(self, A) -> sp.csr_matrix:
        """P* A P for a target-sized square matrix."""
        A = sp.csr_matrix(A)
        return A[self.targets][:, self.targets]

    def embed(self, A) -> sp.csr_matrix:
        """P A P* -- place a source-sized square matrix at the targets."""
        A = sp.coo_matrix(A)
        return sp.coo_matrix(
            (A.data, (self.targets[A.row], self.targets[A.col])),
            shape=(self.target_size, self.target_size)).tocsr()


def perm_block(k1: int, k2: int) -> IndexMap:
    """Stride permutation sending lexicographic (a, b) to (b, a),
    a in [k1], b in [k2]; the perfect shuffle for k1 = k2 = 2."""
    if k1 < 1 or k2 < 1:
        raise ValueError("permutation sizes must be positive")
    a, b = np.divmod(np.arange(k1 * k2), k2)
    return IndexMap(k1 * k2, k1 * k2, b * k1 + a)


def perm_Pi(n, s: int, r: int) -> IndexMap:
    """Block interleaving: the stride permutation on s x N(n) tensored with
    an identity of size r; sends (a, b, c) to (b, a, c)."""
    N = int(np.prod(n))
    if N < 1 or s < 1 or r < 1:
        raise ValueError("sizes must be positive")
    total = s * N * r
    idx = np.arange(total)
    ab, c = np.divmod(idx, r)
    a, b = np.divmod(ab, N)
    return IndexMap(total, total, (b * s + a) * r + c)


def identity_kron(blocks: int, imap: IndexMap) -> IndexMap:
    """I_blocks (x) imap, acting blockwise on consecutive chunks."""
    size = imap.source_size
    base = np.arange(blocks) * imap.target_size
    targets = (base[:, None] + imap.targets[None, :]).ravel()
    return IndexMap(blocks * size, blocks * imap.target_size, targets)


# ---------------------------------------------------------------------------
# tau approximation

def _band_array(band):
    t = np.asarray(band, dtype=float)
    if t.ndim != 1 or len(t) % 2 != 1:
        raise ValueError("band must be an odd-length list t_{-b..b}")
    return t


def tau_approx(band, N: int) -> np.ndarray:
    """Hankel corner-corrected Toeplitz matrix of a scalar band.

    The band lists t_{-b..b}; the northwest corner subtracts the Hankel of
    the symmetrized coefficients (t_k + t_{-k})/2 at offsets i+j (1-based),
    the southeast corner mirrors it, so tau(T^T) = tau(T)^T holds exactly
    and symmetric bands give the classical sine-transform algebra member.
    """
    t = _band_array(band)
    b = len(t) // 2
    if N <= 2 * b:
        raise ValueError(f"need N > 2b, got N={N}, b={b}")

    def coeff(k):
        return t[k + b] if -b <= k <= b else 0.0

    T = np.zeros((N, N))
    for k in range(-b, b + 1):
        if coeff(k) != 0.0:
            idx = np.arange(max(0, k), N + min(0, k))
            T[idx, idx - k] = coeff(k)

    def sym_coeff(k):
        return 0.5 * (coeff(k) + coeff(-k))

    # northwest: 1-based I+J = i+j+2 <= b ; southeast mirror at 2N+2-(I+J)
    for i in range(N):
        for j in range(N):
            s = i + j + 2
            if s <= b:
                T[i, j] -= sym_coeff(s)
            s_se = 2 * N + 2 - s
            if s_se <= b:
                T[i, j] -= sym_coeff(s_se)
    return T


def dst1_matrix(N: int) -> np.ndarray:
    """Orthonormal DST-I matrix, S[j,k] ~ sin((j+1)(k+1) pi / (N+1))."""
    j = np.arange(1, N + 1)
    S = np.sin(np.outer(j, j) * np.pi / (N + 1))
    return S * np.sqrt(2.0 / (N + 1))

def tau_eigenvalues(band, N: int) -> np.ndarray:
    """Eigenvalues g(j pi/(N+1)) of the tau matrix of a symmetric band."""
    t = _band_array(band)
    b = len(t) // 2
    if not np.allclose(t, t[::-1]):
        raise ValueError("analytic tau eigenvalues need a symmetric band")
    theta = np.arange(1, N + 1) * np.pi / (N + 1)
    vals = np.full(N, t[b])
    for k in range(1, b + 1):
        vals += 2.0 * t[b + k] * np.cos(k * theta)
    return vals


# ---------------------------------------------------------------------------
# structural verification helpers

def block_toeplitz_defect(A, sym: BlockSymbol, n, tol: float = 1e-12) -> int:
    """Number of rows of A differing anywhere from the generated Toeplitz."""
    dims = (int(n),) if np.isscalar(n) else tuple(int(x) for x in n)
    T = toeplitz_from_symbol(sym, dims)
    A = sp.csr_matrix(A)
    if A.shape != T.shape:
        raise ValueError(f"size mismatch: matrix {A.shape} vs Toeplitz {T.shape}")
    D = (A - T).tocsr()
    if D.nnz == 0:
        return 0
    mags = np.abs(D.data)
    rows_nnz = np.diff(D.indptr)
    row_max = np.zeros(D.shape[0])
    row_idx = np.repeat(np.arange(D.shape[0]), rows_nnz)
    np.maximum.at(row_max, row_idx, mags)
    return int(np.count_nonzero(row_max > tol))


def zero_distribution_fraction(M, eps: float) -> float:
    """Fraction of singular values exceeding eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    dense = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    sv = np.linalg.svd(dense, compute_uv=False)
    if len(sv) == 0:
        return 0.0
    return float(np.count_nonzero(sv > eps)) / len(sv)


# ---------------------------------------------------------------------------
# crisscross stiffness structure maps
#
# Interior velocity nodes carry integer coordinates (ix, iy) over 4n.  Each
# node belongs to a cell (j, i) and one of eight local slots; the slot grid
# makes the interior stiffness stencil exactly Toeplitz.  The first
# odd-level node column (ix = 1 at levels iy = 3 mod 4) belongs to cell
# i = -1 and falls outside the rigid grid; it is reported unmapped.

def velocity_slot_assignment(n: int):
    """Cell/slot coordinates for every interior velocity node in lex order.

    Returns (cells_j, cells_i, slots): integer arrays where slots run 0..7
    and cells may be -1 for off-grid nodes at the left edge.
    """
    lim = 4 * n
    jj, ii, ss = [], [], []
    for iy in range(1, lim):
        t = (iy - 1) % 4
        j = (iy - 1) // 4
        if t in (0, 2):
            xs = range(1, lim, 2)
        else:
            xs = range(2, lim, 2)
        for ix in xs:
            if t == 0:
                s, i = (0, (ix - 1) // 4) if ix % 4 == 1 else (1, (ix - 3) // 4)
            elif t == 1:
                s, i = (2, (ix - 2) // 4) if ix % 4 == 2 else (3, (ix - 4) // 4)
            elif t == 2:
                s, i = (4, (ix - 3) // 4) if ix % 4 == 3 else (5, (ix - 5) // 4)
            else:
                s, i = (6, (ix - 2) // 4) if ix % 4 == 2 else (7, (ix - 4) // 4)
            jj.append(j)
            ii.append(i)
            ss.append(s)
    return (np.asarray(jj, dtype=np.int64), np.asarray(ii, dtype=np.int64),
            np.asarray(ss, dtype=np.int64))


def velocity_extension_map(n: int):
    """Semi-orthogonal embedding of the grid-mappable interior velocity
    DOFs into the extended 8n^2 block-Toeplitz index space.

    Returns (IndexMap, mappable_mask) where the mask flags DOFs with
    in-range cells; unmapped DOFs are exactly the n leftmost off-grid
    nodes.
    """
    jj, ii, ss = velocity_slot_assignment(n)
    mask = (ii >= 0) & (ii < n) & (jj >= 0) & (jj < n)
    flat = (jj[mask] * n + ii[mask]) * 8 + ss[mask]
    imap = IndexMap(int(mask.sum()), 8 * n * n, flat)
    return imap, mask


def extend_to_block_toeplitz(A, n: int) -> sp.csr_matrix:
    """Embed the stiffness block into the extended 8n^2 index space,
    zero-filling inserted rows/columns and dropping off-grid DOFs."""
    imap, mask = velocity_extension_map(n)
    A = sp.csr_matrix(A)
    return imap.embed(A[mask][:, mask])
