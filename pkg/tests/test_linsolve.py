import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from ginzburg_lod.assembly.forms import assemble_h1k_gram
from ginzburg_lod.linsolve.eigen import eig_smallest, rayleigh_quotient
from ginzburg_lod.linsolve.solvers import (
    SaddleSystem,
    drop_redundant_constraints,
    solve_saddle,
    solve_spd,
    spd_solver,
)
from ginzburg_lod.mesh.hierarchy import TriMesh
from ginzburg_lod.utils.errors import SolverError


def _laplacian_1d(n):
    return sp.diags([-np.ones(n - 1), 2.5 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


@pytest.mark.parametrize("method", ["direct", "cg"])
def test_spd_solver_matches_dense(method, rng):
    A = _laplacian_1d(40)
    rhs = rng.normal(size=40)
    x = spd_solver(A, method=method, tol=1e-10)(rhs)
    np.testing.assert_allclose(x, np.linalg.solve(A.toarray(), rhs), rtol=1e-8, atol=1e-10)


def test_spd_solver_on_form_operator(rng):
    gram = assemble_h1k_gram(TriMesh(2), 2.0)
    rhs = rng.normal(size=gram.matrix.shape[0])
    x = solve_spd(gram, rhs)
    np.testing.assert_allclose(gram.matrix @ x, rhs, atol=1e-10)


def test_spd_solver_rejects_bad_input():
    A = sp.diags([1.0, -1.0, 2.0], format="csr")
    with pytest.raises(SolverError):
        spd_solver(A, method="cg")
    with pytest.raises(ValueError):
        spd_solver(A, method="qr")


def test_saddle_with_mean_constraint(rng):
    n = 12
    b = rng.normal(size=n)
    system = SaddleSystem(sp.identity(n, format="csr"), sp.csr_matrix(np.ones((1, n))), b, label="mean")
    x = solve_saddle(system)
    np.testing.assert_allclose(x, b - b.mean(), atol=1e-12)


def test_saddle_multiple_right_hand_sides(rng):
    n = 10
    A = _laplacian_1d(n)
    C = sp.csr_matrix(rng.normal(size=(3, n)))
    loads = rng.normal(size=(n, 4))
    x = solve_saddle(SaddleSystem(A, C, loads))
    assert x.shape == (n, 4)
    np.testing.assert_allclose(C @ x, 0.0, atol=1e-10)
    dense = np.block([[A.toarray(), C.T.toarray()], [C.toarray(), np.zeros((3, 3))]])
    expected = np.linalg.solve(dense, np.vstack([loads, np.zeros((3, 4))]))[:n]
    np.testing.assert_allclose(x, expected, atol=1e-10)


def test_saddle_zero_load_shortcut():
    n = 5
    x = solve_saddle(SaddleSystem(sp.identity(n), sp.csr_matrix(np.ones((1, n))), np.zeros(n)))
    np.testing.assert_array_equal(x, np.zeros(n))


def test_singular_saddle_raises():
    system = SaddleSystem(sp.csr_matrix((3, 3)), sp.csr_matrix((0, 3)), np.ones(3), label="empty")
    with pytest.raises(SolverError) as excinfo:
        solve_saddle(system)
    assert excinfo.value.label == "empty"


def test_drop_redundant_constraints():
    C = sp.csr_matrix(np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1e-20, 0.0], [0.0, 0.0, 3.0]]))
    reduced, kept = drop_redundant_constraints(C)
    np.testing.assert_array_equal(kept, [0, 3])
    assert reduced.shape == (2, 3)
    empty, none_kept = drop_redundant_constraints(sp.csr_matrix((2, 3)))
    assert empty.shape[0] == 0
    assert none_kept.size == 0


def test_eig_smallest_iterative_path():
    H = sp.diags(np.arange(1.0, 31.0), format="csr")
    G = sp.diags(np.full(30, 2.0), format="csr")
    result = eig_smallest(H, G, k=3, tol=1e-10)
    assert result.converged
    np.testing.assert_allclose(result.values, [0.5, 1.0, 1.5], rtol=1e-10)
    gram = result.vectors.T @ (G @ result.vectors)
    np.testing.assert_allclose(gram, np.eye(3), atol=1e-10)


def test_eig_smallest_dense_path():
    H = sp.csr_matrix(np.diag([4.0, 1.0, 3.0, 2.0, 5.0]))
    values, vectors = eig_smallest(H, sp.identity(5), k=2)
    np.testing.assert_allclose(values, [1.0, 2.0])
    assert vectors.shape == (5, 2)


def test_eig_smallest_validates_arguments():
    H = sp.identity(4)
    with pytest.raises(ValueError):
        eig_smallest(H, H, k=0)
    with pytest.raises(ValueError):
        eig_smallest(H, H, k=5)
    with pytest.raises(ValueError):
        eig_smallest(H, sp.identity(3))


def test_rayleigh_quotient():
    H = sp.diags([1.0, 3.0], format="csr")
    assert rayleigh_quotient(H, sp.identity(2), np.array([1.0, 1.0])) == pytest.approx(2.0)


def test_eig_smallest_indefinite_pencil_matches_dense(rng):
    A = rng.standard_normal((12, 12))
    B = rng.standard_normal((12, 12))
    H = 0.5 * (A + A.T)
    G = B @ B.T + 12.0 * np.eye(12)
    result = eig_smallest(sp.csr_matrix(H), sp.csr_matrix(G), k=3, tol=1e-10, max_iter=5000)
    expected = scipy.linalg.eigh(H, G, eigvals_only=True)[:3]
    assert result.converged
    assert result.values[0] < 0.0
    np.testing.assert_allclose(result.values, expected, atol=1e-8)


def test_eig_smallest_dense_path_is_sorted_by_value():
    H = sp.csr_matrix(np.diag([0.1, -3.0, 2.0, -0.2, 5.0]))
    values, _ = eig_smallest(H, sp.identity(5), k=3)
    np.testing.assert_allclose(values, [-3.0, -0.2, 0.1])


def test_eig_smallest_with_explicit_shift():
    H = sp.diags(np.arange(-5.0, 25.0), format="csr")
    result = eig_smallest(H, sp.identity(30, format="csr"), k=2, tol=1e-10, shift=-6.0)
    np.testing.assert_allclose(result.values, [-5.0, -4.0], atol=1e-9)
