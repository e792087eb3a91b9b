"""Sparse FEM blocks for the variable-viscosity Stokes saddle system.

Assembles the viscosity-weighted vector-Laplacian stiffness block, the two
divergence blocks, and the 1/viscosity-weighted pressure mass matrix on the
crisscross mesh.  Element integrals of the quadratic basis gradients are
exact rationals (the integrands have degree two); the viscosity enters by a
one-point centroid rule per triangle.

Normalization: divergence blocks are scaled by n so their entries are the
mesh-size-free rationals (+-1/6, +-1/12); the saddle system pairs them with
the pressure mass scaled by n^2, which is a symmetric rescaling of the raw
Galerkin system and leaves every preconditioned spectrum unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import StructuredMesh, saddle_dimension

__all__ = [
    "ViscosityField",
    "SaddleSystem",
    "assemble_stiffness",
    "assemble_divergence",
    "assemble_pressure_mass",
    "assemble_saddle",
]


# ---------------------------------------------------------------------------
# viscosity fields

@dataclass(frozen=True)
class ViscosityField:
    """Positive viscosity with computable essential bounds.

    `evaluator` maps an (N, 2) array of points in the unit square to an
    (N,) array of positive values.
    """

    kind: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    essinf: float
    esssup: float
    params: dict = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.evaluator(pts)

    @staticmethod
    def constant(value: float = 1.0) -> "ViscosityField":
        if value <= 0:
            raise ValueError("viscosity must be positive")
        return ViscosityField("constant", lambda p: np.full(len(p), float(value)),
                              float(value), float(value), {"value": value})

    @staticmethod
    def group2() -> "ViscosityField":
        # xy + e^(x+y), increasing in both variables on the unit square
        def ev(p):
            return p[:, 0] * p[:, 1] + np.exp(p[:, 0] + p[:, 1])
        return ViscosityField("group2", ev, 1.0, 1.0 + math.e ** 2, {})

    @staticmethod
    def group3(gamma: float) -> "ViscosityField":
        """Piecewise field: gamma on the closed square [0,1/2]^2, else 1+x+y."""
        if gamma <= 0:
            raise ValueError("gamma must be positive")

        def ev(p):
            inside = (p[:, 0] <= 0.5) & (p[:, 1] <= 0.5)
            return np.where(inside, float(gamma), 1.0 + p[:, 0] + p[:, 1])
        return ViscosityField("group3", ev, min(float(gamma), 1.5),
                              max(float(gamma), 3.0), {"gamma": gamma})

    @staticmethod
    def example1(mu0: float, mu1: float, w: float, delta: float) -> "ViscosityField":
        """Strip viscosity of the benchmark problem on (-1,1)^2, pulled back
        to the unit square by x -> 2x-1.

        mu1 inside |x| < w, mu0 outside |x| > w+delta, linear in between.
        """
        if mu0 <= 0 or mu1 <= 0:
            raise ValueError("viscosities must be positive")
        if w <= 0 or delta < 0:
            raise ValueError("need w > 0 and delta >= 0")

        def ev(p):
            t = np.abs(2.0 * p[:, 0] - 1.0)
            vals = np.where(t < w, float(mu1), float(mu0))
            if delta > 0:
                ramp = (t >= w) & (t <= w + delta)
                vals = np.where(ramp, mu0 + (mu1 - mu0) * (w + delta - t) / delta,
                                vals)
            return vals
        return ViscosityField("example1", ev, min(mu0, mu1), max(mu0, mu1),
                              {"mu0": mu0, "mu1": mu1, "w": w, "delta": delta})

    @staticmethod
    def custom(fn: Callable[[np.ndarray], np.ndarray], essinf: float,
               esssup: float) -> "ViscosityField":
        return ViscosityField("custom", fn, float(essinf), float(esssup), {})


def viscosity_for_group(group: int, gamma: float | None = None) -> ViscosityField:
    """Viscosity field of benchmark group 1, 2, or 3 (3 needs gamma)."""
    if group == 1:
        return ViscosityField.constant(1.0)
    if group == 2:
        return ViscosityField.group2()
    if group == 3:
        if gamma is None:
            raise ValueError("group 3 requires gamma")
        return ViscosityField.group3(gamma)
    raise ValueError(f"unknown group {group}")


# ---------------------------------------------------------------------------
# exact element tables
#
# All four triangles of a square are congruent right isosceles triangles
# (right angle at the center vertex, listed last), so one exact stiffness
# table serves every orientation; the divergence tables depend on the
# orientation.  Tables are computed once on size-1 model triangles with
# Fraction arithmetic; stiffness is scale-free, divergence values are the
# n-scaled ones, mass values the n^2-scaled ones.

_MODEL_TRIANGLES = {
    "south": ((0, 0), (1, 0), (Fraction(1, 2), Fraction(1, 2))),
    "west": ((0, 1), (0, 0), (Fraction(1, 2), Fraction(1, 2))),
    "east": ((1, 0), (1, 1), (Fraction(1, 2), Fraction(1, 2))),
    "north": ((1, 1), (0, 1), (Fraction(1, 2), Fraction(1, 2))),
}


def _barycentric_gradients(verts):
    """Exact gradients of the three barycentric coordinates."""
    (x0, y0), (x1, y1), (x2, y2) = [tuple(map(Fraction, v)) for v in verts]
    det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    area = det / 2
    grads = [
        ((y1 - y2) / det, (x2 - x1) / det),
        ((y2 - y0) / det, (x0 - x2) / det),
        ((y0 - y1) / det, (x1 - x0) / det),
    ]
    return grads, area


def _p2_gradient_terms(grads):
    """Each P2 gradient as constant + linear-in-barycentric vector terms.

    Returns per basis function a pair (u, V): gradient = u + sum_i V[i]*lam_i
    with u, V[i] exact 2-vectors.  Local order: vertices 0,1,2 then midpoints
    of edges (0,1), (1,2), (2,0).
    """
    zero = (Fraction(0), Fraction(0))
    terms = []
    for i in range(3):
        g = grads[i]
        u = (-g[0], -g[1])
        V = [zero, zero, zero]
        V[i] = (4 * g[0], 4 * g[1])
        terms.append((u, V))
    for (i, j) in ((0, 1), (1, 2), (2, 0)):
        V = [zero, zero, zero]
        V[i] = (4 * grads[j][0], 4 * grads[j][1])
        V[j] = (4 * grads[i][0], 4 * grads[i][1])
        terms.append(((Fraction(0), Fraction(0)), V))
    return terms


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1]


def _element_tables(verts):
    """Exact (stiffness 6x6, div_x 3x6, div_y 3x6, mass 3x3) on one triangle.

    Uses int(lam_i) = A/3, int(lam_i lam_j) = A(1+delta_ij)/12.
    """
    grads, area = _barycentric_gradients(verts)
    terms = _p2_gradient_terms(grads)

    K = [[Fraction(0)] * 6 for _ in range(6)]
    for a in range(6):
        ua, Va = terms[a]
        for b in range(a, 6):
            ub, Vb = terms[b]
            val = _dot(ua, ub) * area
            for i in range(3):
                val += (_dot(ua, Vb[i]) + _dot(Va[i], ub)) * area / 3
                for j in range(3):
                    val += _dot(Va[i], Vb[j]) * area * (1 + (i == j)) / 12
            K[a][b] = val
            K[b][a] = val

    D = [[[Fraction(0)] * 6 for _ in range(3)] for _ in range(2)]
    for comp in range(2):
        for p in range(3):
            for a in range(6):
                ua, Va = terms[a]
                val = ua[comp] * area / 3
                for i in range(3):
                    val += Va[i][comp] * area * (1 + (p == i)) / 12
                D[comp][p][a] = val

    M = [[area * (1 + (p == q)) / 12 for q in range(3)] for p in range(3)]
    return K, D[0], D[1], M


def _as_float(table):
    return np.array([[float(v) for v in row] for row in table])


_STIFFNESS_TABLE = None
_DIVX_TABLES = None
_DIVY_TABLES = None
_MASS_TABLE = None


def _build_tables():
    global _STIFFNESS_TABLE, _DIVX_TABLES, _DIVY_TABLES, _MASS_TABLE
    divx, divy = [], []
    for name in ("south", "west", "east", "north"):
        K, Dx, Dy, M = _element_tables(_MODEL_TRIANGLES[name])
        if _STIFFNESS_TABLE is None:
            _STIFFNESS_TABLE = _as_float(K)
            _MASS_TABLE = _as_float(M)
        divx.append(_as_float(Dx))
        divy.append(_as_float(Dy))
    _DIVX_TABLES = divx
    _DIVY_TABLES = divy


_build_tables()


# ---------------------------------------------------------------------------
# assembly

def _centroid_viscosity(mesh: StructuredMesh, mu: ViscosityField) -> np.ndarray:
    vals = mu(mesh.centroids())
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        bad = int(np.argmin(vals))
        raise ValueError(f"non-positive viscosity sample at triangle {bad}")
    return vals


def assemble_stiffness(mesh: StructuredMesh, mu: ViscosityField) -> sp.csr_matrix:
    """Viscosity-weighted P2 stiffness block (one velocity component).

    Symmetric positive definite of size 8n^2-4n+1; entry (i,j) sums
    mu(centroid_T) times the exact gradient integral over each triangle.
    """
    mu_t = _centroid_viscosity(mesh, mu)
    nvel = mesh.velocity_count
    dofs = mesh.tri_velocity
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    table = _STIFFNESS_TABLE.ravel()
    vals = (mu_t[:, None] * table[None, :]).ravel()
    keep = (rows >= 0) & (cols >= 0) & np.tile(table != 0.0, len(dofs))
    A = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])),
                      shape=(nvel, nvel)).tocsr()
    A.sum_duplicates()
    return A


def assemble_divergence(mesh: StructuredMesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Divergence blocks (B_x, B_y), pressure rows by velocity columns.

    Discretizes -div with the mesh-size-free normalization (raw Galerkin
    blocks times n), so the nonzero values are drawn from {+-1/6, +-1/12}.
    Independent of the viscosity.
    """
    npres = mesh.pressure_count
    nvel = mesh.velocity_count
    blocks = []
    for tables in (_DIVX_TABLES, _DIVY_TABLES):
        rows_all, cols_all, vals_all = [], [], []
        for k in range(4):
            vdofs = mesh.tri_velocity[k::4]
            pdofs = mesh.tri_pressure[k::4]
            table = tables[k].ravel()
            rows = np.repeat(pdofs, 6, axis=1).ravel()
            cols = np.tile(vdofs, (1, 3)).ravel()
            vals = np.broadcast_to(table, (len(vdofs), 18)).ravel()
            keep = (cols >= 0) & np.tile(table != 0.0, len(vdofs))
            rows_all.append(rows[keep])
            cols_all.append(cols[keep])
            vals_all.append(-vals[keep])
        B = sp.coo_matrix(
            (np.concatenate(vals_all),
             (np.concatenate(rows_all), np.concatenate(cols_all))),
            shape=(npres, nvel)).tocsr()
        B.sum_duplicates()
        # exact-rational sums can cancel to rounding dust; drop it
        B.data[np.abs(B.data) < 1e-15] = 0.0
        B.eliminate_zeros()
        blocks.append(B)
    return blocks[0], blocks[1]


def assemble_pressure_mass(mesh: StructuredMesh, mu: ViscosityField) -> sp.csr_matrix:
    """P1 mass matrix weighted by 1/viscosity (raw Galerkin scaling)."""
    mu_t = _centroid_viscosity(mesh, mu)
    npres = mesh.pressure_count
    dofs = mesh.tri_pressure
    rows = np.repeat(dofs, 3, axis=1).ravel()
    cols = np.tile(dofs, (1, 3)).ravel()
    scale = 1.0 / (mu_t * mesh.n ** 2)
    vals = (scale[:, None] * _MASS_TABLE.ravel()[None, :]).ravel()
    M = sp.coo_matrix((vals, (rows, cols)), shape=(npres, npres)).tocsr()
    M.sum_duplicates()
    return M


@dataclass(frozen=True)
class SaddleSystem:
    """Assembled Stokes blocks.

    The two velocity components share one stiffness block.  `pressure_mass`
    is the raw mass scaled by n^2 to stay consistent with the n-scaled
    divergence blocks (a symmetric rescaling of the Galerkin system).
    """

    n: int
    stiffness: sp.csr_matrix
    div_x: sp.csr_matrix
    div_y: sp.csr_matrix
    pressure_mass: sp.csr_matrix
    mu: ViscosityField

    @property
    def velocity_count(self) -> int:
        return self.stiffness.shape[0]

    @property
    def pressure_count(self) -> int:
        return self.div_x.shape[0]

    @property
    def dimension(self) -> int:
        return 2 * self.velocity_count + self.pressure_count

    def full_matrix(self) -> sp.csr_matrix:
        """The symmetric saddle matrix [[A,0,Bx^T],[0,A,By^T],[Bx,By,0]]."""
        A = self.stiffness
        Z = sp.csr_matrix((self.velocity_count, self.velocity_count))
        Zp = sp.csr_matrix((self.pressure_count, self.pressure_count))
        return sp.bmat([
            [A, Z, self.div_x.T],
            [Z, A, self.div_y.T],
            [self.div_x, self.div_y, Zp],
        ], format="csr")

    def nullspace_vector(self) -> np.ndarray:
        """Constant-pressure kernel direction (0,...,0,1,...,1)."""
        v = np.zeros(self.dimension)
        v[2 * self.velocity_count:] = 1.0
        return v


def assemble_saddle(mesh: StructuredMesh, mu: ViscosityField) -> SaddleSystem:
    """Assemble all blocks; fails loudly if the dimension drifts from the
    closed form 18n^2 - 6n + 3."""
    A = assemble_stiffness(mesh, mu)
    bx, by = assemble_divergence(mesh)
    mp_raw = assemble_pressure_mass(mesh, mu)
    system = SaddleSystem(n=mesh.n, stiffness=A, div_x=bx, div_y=by,
                          pressure_mass=(mesh.n ** 2) * mp_raw, mu=mu)
    expected = saddle_dimension(mesh.n)
    if system.dimension != expected:
        raise RuntimeError(
            f"assembled dimension {system.dimension} != {expected} at n={mesh.n}")
    return system
