"""Restarted GMRES and MINRES with preconditioning and nullspace handling.

Both solvers start from a zero initial guess and count every inner
Arnoldi/Lanczos step.  GMRES is left-preconditioned: the stopping test is
the preconditioned relative residual, with the true relative residual
verified (within a factor 10) before declaring convergence and always
recomputed from the returned iterate.  MINRES takes an SPD preconditioner
and keeps the iteration orthogonal to a supplied nullspace vector.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

__all__ = ["SolveStats", "gmres", "minres", "as_operator"]

_STAGNATION_RTOL = 1e-14


@dataclass
class SolveStats:
    iterations: int
    final_relative_residual: float
    converged: bool
    residual_history: list = field(repr=False, default_factory=list)
    wall_time: float = 0.0
    solution: np.ndarray = field(repr=False, default=None)
    preconditioned_residual: float = 0.0


def as_operator(M) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap a sparse/dense matrix or callable as a matvec."""
    if callable(M) and not sp.issparse(M) and not isinstance(M, np.ndarray):
        return M
    return lambda v: M @ v


def gmres(M, b: np.ndarray, P=None, restart: int = 20, tol: float = 1e-5,
          maxit: int = 1000) -> SolveStats:
    """Left-preconditioned restarted GMRES with zero initial guess.

    Convergence is tested on the preconditioned relative residual
    ||P^{-1}(b - Mx)|| / ||P^{-1}b||, and a converged run additionally
    verifies the true relative residual within a factor 10 of tol; when
    the two residuals genuinely diverge the iteration stops once the
    preconditioned residual stagnates (relative change below 1e-14 across
    a cycle) and reports convergence by the preconditioned test alone,
    with the true residual in the stats.  A lucky Arnoldi breakdown counts
    as convergence; stagnation above tol reports non-convergence.
    """
    t0 = time.time()
    matvec = as_operator(M)
    pinv = as_operator(P) if P is not None else (lambda v: v)
    b = np.asarray(b, dtype=float)
    ndim = len(b)
    x = np.zeros(ndim)

    z0 = pinv(b)
    bnorm = np.linalg.norm(z0)
    bnorm_true = np.linalg.norm(b)
    history = []
    if bnorm == 0.0 or bnorm_true == 0.0:
        return SolveStats(0, 0.0, True, [0.0], time.time() - t0, x, 0.0)

    total = 0
    converged = False
    prev_cycle_res = None
    beta = bnorm
    while total < maxit and not converged:
        r = b - matvec(x)
        z = pinv(r)
        beta = np.linalg.norm(z)
        rel = beta / bnorm
        history.append(rel)
        if rel <= tol and np.linalg.norm(r) / bnorm_true <= 10 * tol:
            converged = True
            break
        if prev_cycle_res is not None and prev_cycle_res > 0 and \
                abs(prev_cycle_res - rel) <= _STAGNATION_RTOL * prev_cycle_res:
            break
        prev_cycle_res = rel

        m = min(restart, maxit - total)
        V = np.zeros((m + 1, ndim))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = z / beta
        k_used = 0
        breakdown = False
        for k in range(m):
            w = pinv(matvec(V[k]))
            for i in range(k + 1):
                H[i, k] = V[i] @ w
                w -= H[i, k] * V[i]
            H[k + 1, k] = np.linalg.norm(w)
            if H[k + 1, k] > 1e-14 * max(1.0, abs(H[k, k])):
                V[k + 1] = w / H[k + 1, k]
            else:
                breakdown = True
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            d = np.hypot(H[k, k], H[k + 1, k])
            cs[k], sn[k] = H[k, k] / d, H[k + 1, k] / d
            H[k, k] = d
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            total += 1
            k_used = k + 1
            history.append(abs(g[k + 1]) / bnorm)
            if abs(g[k + 1]) / bnorm <= tol or breakdown:
                break
        y = sla.solve_triangular(H[:k_used, :k_used], g[:k_used])
        x = x + V[:k_used].T @ y
        if breakdown:
            converged = True

    r = b - matvec(x)
    prec_rel = np.linalg.norm(pinv(r)) / bnorm
    true_rel = np.linalg.norm(r) / bnorm_true
    # stagnation with the preconditioned test met still counts as converged
    converged = converged or prec_rel <= tol
    return SolveStats(total, float(true_rel), bool(converged), history,
                      time.time() - t0, x, float(prec_rel))


def minres(M, b: np.ndarray, P=None, nullspace: np.ndarray | None = None,
           tol: float = 1e-12, maxit: int = 20000) -> SolveStats:
    """Preconditioned MINRES (Paige-Saunders) with zero initial guess.

    M must be symmetric (spot-checked), P symmetric positive definite.
    When a nullspace vector is given, the right-hand side and every Lanczos
    vector are projected onto its orthogonal complement.
    """
    t0 = time.time()
    matvec = as_operator(M)
    pinv = as_operator(P) if P is not None else (lambda v: v)
    b = np.asarray(b, dtype=float)
    ndim = len(b)

    rng = np.random.default_rng(1234)
    u, v = rng.standard_normal(ndim), rng.standard_normal(ndim)
    asym = abs(u @ matvec(v) - v @ matvec(u))
    scale = max(np.linalg.norm(matvec(v)) * np.linalg.norm(u), 1e-300)
    if asym > 1e-8 * scale:
        raise ValueError(f"matrix is not symmetric: <Mu,v> mismatch {asym:.3e}")

    if nullspace is not None:
        ns = nullspace / np.linalg.norm(nullspace)

        def project(w):
            return w - ns * (ns @ w)
    else:
        def project(w):
            return w

    b = project(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveStats(0, 0.0, True, [0.0], time.time() - t0,
                          np.zeros(ndim), 0.0)

    x = np.zeros(ndim)
    r1 = b.copy()
    y = project(pinv(r1))
    beta1 = np.sqrt(r1 @ y)
    if not np.isfinite(beta1) or beta1 < 0:
        raise ValueError("preconditioner is not positive definite")

    history = []
    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs = -1.0
    sn = 0.0
    w = np.zeros(ndim)
    w2 = np.zeros(ndim)
    r2 = r1.copy()
    iters = 0
    converged = False
    for it in range(1, maxit + 1):
        s = 1.0 / beta
        v = s * y
        y = project(matvec(v))
        if it >= 2:
            y -= (beta / oldb) * r1
        alfa = v @ y
        y -= (alfa / beta) * r2
        r1, r2 = r2, y
        y = project(pinv(r2))
        oldb = beta
        betasq = r2 @ y
        if betasq < 0:
            raise ValueError("preconditioner lost positive definiteness")
        beta = np.sqrt(betasq)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = np.hypot(gbar, beta)
        gamma = max(gamma, 1e-300)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x += phi * w

        iters = it
        rel = phibar / beta1
        history.append(rel)
        if rel <= tol:
            converged = True
            break

    r = project(b - matvec(x))
    true_rel = np.linalg.norm(r) / bnorm
    return SolveStats(iters, float(true_rel), bool(converged), history,
                      time.time() - t0, x, float(history[-1] if history else 0.0))
