from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glt_stokes.assembly import ViscosityField, assemble_stiffness
from glt_stokes.glt_core import (BlockSymbol, block_toeplitz_defect,
                                 dst1_matrix, extend_to_block_toeplitz,
                                 identity_kron, perm_Pi, perm_block,
                                 tau_approx, tau_eigenvalues,
                                 toeplitz_from_symbol,
                                 velocity_extension_map,
                                 velocity_slot_assignment,
                                 zero_distribution_fraction)
from glt_stokes.mesh import build_mesh
from glt_stokes.symbols import default_symbol_set


# ---------------------------------------------------------------------------
# block symbols / toeplitz generation

def test_scalar_laplacian_toeplitz():
    sym = BlockSymbol(1, 1, 1, {(0,): [[2]], (1,): [[-1]], (-1,): [[-1]]},
                      hermitian=True)
    T = toeplitz_from_symbol(sym, 4).toarray()
    expect = np.array([[2, -1, 0, 0], [-1, 2, -1, 0],
                       [0, -1, 2, -1], [0, 0, -1, 2]], dtype=float)
    assert np.array_equal(T, expect)


def test_two_level_block_layout():
    # d=2, n=(2,3): outer 2x2 of inner 3x3 blocks, entry f_{r-c}
    sym = BlockSymbol(1, 1, 2, {
        (0, 0): [[0]], (0, 1): [[1]], (0, -1): [[-1]],
        (1, 0): [[10]], (-1, 0): [[-10]], (1, 1): [[11]]})
    T = toeplitz_from_symbol(sym, (2, 3)).toarray()
    F0 = np.array([[0, -1, 0], [1, 0, -1], [0, 1, 0]], dtype=float)
    F1 = np.array([[10, 0, 0], [11, 10, 0], [0, 11, 10]], dtype=float)
    Fm1 = np.array([[-10, 0, 0], [0, -10, 0], [0, 0, -10]], dtype=float)
    expect = np.block([[F0, Fm1], [F1, F0]])
    assert np.array_equal(T, expect)


def test_hermitian_symbol_gives_hermitian_matrix():
    G = default_symbol_set().stiffness
    T = toeplitz_from_symbol(G, (3, 3)).toarray()
    assert np.abs(T - T.T).max() == 0.0


def test_hermitian_flag_checked():
    with pytest.raises(ValueError):
        BlockSymbol(1, 1, 1, {(1,): [[1]]}, hermitian=True)


def test_symbol_json_roundtrip():
    G = default_symbol_set().div_x
    G2 = BlockSymbol.from_json(G.to_json())
    assert G2 == G
    th = (0.3, -1.2)
    assert np.allclose(G.eval(*th), G2.eval(*th))


def test_symbol_eval_matches_fourier_sum():
    sym = BlockSymbol(1, 1, 1, {(0,): [[Fraction(1, 2)]], (2,): [[1]]})
    th = 0.7
    assert sym.eval(th)[0, 0] == pytest.approx(0.5 + np.exp(2j * th), abs=1e-15)


# ---------------------------------------------------------------------------
# permutations

def test_perm_block_identity():
    p = perm_block(1, 5)
    assert np.array_equal(p.targets, np.arange(5))


def test_perm_block_perfect_shuffle():
    p = perm_block(2, 2)
    v = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.array_equal(p.apply(v), [1.0, 3.0, 2.0, 4.0])


def test_perm_inverse_composes_to_identity():
    p = perm_Pi(3, 4, 2)
    v = np.arange(24, dtype=float)
    assert np.array_equal(p.inverse().apply(p.apply(v)), v)
    assert np.array_equal(p.restrict(p.apply(v)), v)


def test_perm_pi_interleaves_block_rows():
    # 2x2 block matrix of scalar 2x2 Toeplitz blocks: interleaving turns it
    # into a 2-level structure with 2x2 blocks
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    blocks = [[a, 2 * a], [3 * a, 4 * a]]
    A = np.block(blocks)
    p = perm_Pi(2, 2, 1)
    P = p.matrix().toarray()
    B = P @ A @ P.T
    outer = np.array([[1.0, 2.0], [3.0, 4.0]])
    for i in range(2):
        for j in range(2):
            assert np.array_equal(B[2 * i:2 * i + 2, 2 * j:2 * j + 2],
                                  a[i, j] * outer)


def test_identity_kron():
    p = identity_kron(2, perm_block(2, 2))
    v = np.arange(8, dtype=float)
    out = p.apply(v)
    assert np.array_equal(out, [0, 2, 1, 3, 4, 6, 5, 7])


def test_semi_orthogonality():
    imap, _ = velocity_extension_map(3)
    P = imap.matrix()
    eye = (P.T @ P).toarray()
    assert np.array_equal(eye, np.eye(imap.source_size))


# ---------------------------------------------------------------------------
# tau approximation

def test_tau_tridiagonal_unchanged():
    for N in (5, 50):
        T = tau_approx([-1, 2, -1], N)
        expect = np.diag(np.full(N, 2.0)) + np.diag(np.full(N - 1, -1.0), 1) \
            + np.diag(np.full(N - 1, -1.0), -1)
        assert np.array_equal(T, expect)
        w = np.sort(np.linalg.eigvalsh(T))
        analytic = np.sort(2 - 2 * np.cos(np.arange(1, N + 1) * np.pi / (N + 1)))
        assert np.abs(w - analytic).max() < 1e-12


def test_tau_pentadiagonal_corners_and_eigs():
    band = [1, -4, 6, -4, 1]
    N = 6
    T = tau_approx(band, N)
    assert T[0, 0] == pytest.approx(5.0)
    assert T[N - 1, N - 1] == pytest.approx(5.0)
    theta = np.arange(1, N + 1) * np.pi / (N + 1)
    analytic = np.sort(6 - 8 * np.cos(theta) + 2 * np.cos(2 * theta))
    w = np.sort(np.linalg.eigvalsh(T))
    assert np.abs(w - analytic).max() < 1e-12
    assert np.abs(w - np.sort(tau_eigenvalues(band, N))).max() < 1e-12


def test_tau_nonsymmetric_transpose_compat():
    band = [0.0, 2.0, -1.0]  # t_{-1}=0, t_0=2, t_1=-1
    T = tau_approx(band, 4)
    Tt = tau_approx(band[::-1], 4)
    assert np.array_equal(T.T, Tt)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=9)
       .filter(lambda b: len(b) % 2 == 1))
def test_tau_transpose_compat_random_bands(band):
    b = len(band) // 2
    N = 2 * b + 1
    T = tau_approx(band, N)
    Tt = tau_approx(band[::-1], N)
    assert np.array_equal(T.T, Tt)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.data())
def test_tau_dst_diagonalization_symmetric(b, data):
    half = data.draw(st.lists(st.floats(-3, 3, allow_nan=False),
                              min_size=b + 1, max_size=b + 1))
    band = half[:0:-1] + half  # symmetric t_{-b..b}
    N = 2 * b + 3
    T = tau_approx(band, N)
    S = dst1_matrix(N)
    lam = tau_eigenvalues(band, N)
    assert np.abs(T - S @ np.diag(lam) @ S).max() < 1e-10


def test_tau_rejects_small_n():
    with pytest.raises(ValueError):
        tau_approx([1, -4, 6, -4, 1], 4)


# ---------------------------------------------------------------------------
# structural verification of the stiffness Toeplitz form

def test_defect_zero_for_generated_matrix():
    G = default_symbol_set().stiffness
    T = toeplitz_from_symbol(G, (3, 3))
    assert block_toeplitz_defect(T, G, (3, 3)) == 0


def test_defect_counts_corrupted_row():
    G = default_symbol_set().stiffness
    T = toeplitz_from_symbol(G, (3, 3)).tolil()
    T[5, 3] += 1.0
    assert block_toeplitz_defect(T.tocsr(), G, (3, 3)) == 1


def test_defect_size_mismatch_reported():
    G = default_symbol_set().stiffness
    T = toeplitz_from_symbol(G, (3, 3))
    with pytest.raises(ValueError, match="72.*128|128.*72"):
        block_toeplitz_defect(T, G, (4, 4))


@pytest.mark.parametrize("n", [4, 8])
def test_stiffness_extension_defect_bound(n):
    # frozen measurement: zero-filled extension differs on 11n-4 rows
    mesh = build_mesh(n)
    A = assemble_stiffness(mesh, ViscosityField.constant())
    ext = extend_to_block_toeplitz(A, n)
    G = default_symbol_set().stiffness
    defect = block_toeplitz_defect(ext, G, (n, n))
    assert defect == 11 * n - 4
    assert defect <= 16 * n


@pytest.mark.parametrize("n", [4, 8])
def test_stiffness_equals_compressed_toeplitz_exactly(n):
    # on grid-mappable DOFs the assembled stiffness IS the compressed core
    mesh = build_mesh(n)
    A = assemble_stiffness(mesh, ViscosityField.constant()).tocsr()
    imap, mask = velocity_extension_map(n)
    G = default_symbol_set().stiffness
    T = toeplitz_from_symbol(G, (n, n))
    diff = imap.compress(T) - A[mask][:, mask]
    assert diff.nnz == 0 or np.abs(diff.data).max() == 0.0


def test_slot_assignment_covers_all_nodes():
    n = 5
    mesh = build_mesh(n)
    jj, ii, ss = velocity_slot_assignment(n)
    assert len(jj) == mesh.velocity_count
    imap, mask = velocity_extension_map(n)
    # exactly n off-grid nodes, all in the leftmost odd-level column
    assert int((~mask).sum()) == n
    off = mesh.velocity_nodes[~mask]
    assert np.all(off[:, 0] == 1) and np.all(off[:, 1] % 4 == 3)


# ---------------------------------------------------------------------------
# zero distribution

def test_zero_fraction_trivial():
    assert zero_distribution_fraction(np.zeros((4, 4)), 0.5) == 0.0
    assert zero_distribution_fraction(np.eye(6), 0.5) == 1.0


def test_zero_fraction_requires_positive_eps():
    with pytest.raises(ValueError):
        zero_distribution_fraction(np.eye(3), 0.0)
