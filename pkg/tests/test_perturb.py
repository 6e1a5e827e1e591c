import numpy as np
import pytest
import scipy.sparse as sp

from coneig.core.errors import DimensionMismatchError, SingularShiftError
from coneig.core.linalg.linop import HermitianOperator
from coneig.core.linalg.perturb import PerturbedOperator, apply_perturbed, shifted_solve, spectrum_dense
from coneig.core.linalg.projectors import (
    complement,
    cyclic_group,
    group_average_projector,
    indicator_projector,
    localized_perturbation_projector,
    span_projector,
)


def _sparse_hermitian(n, seed):
    a = sp.random(n, n, density=0.05, random_state=seed)
    return sp.csr_matrix(a + a.T + sp.diags(np.linspace(-2.0, 2.0, n)))


def test_apply_identity_projector(hermitian, rng):
    m = hermitian(6)
    op = PerturbedOperator(HermitianOperator.from_matrix(m), indicator_projector(np.ones(6)), s=0.3)
    v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    assert np.allclose(apply_perturbed(op, v), m @ v + 0.3j * v)


def test_apply_zero_strength(hermitian, rng):
    m = hermitian(6)
    op = PerturbedOperator(HermitianOperator.from_matrix(m), span_projector(rng.standard_normal((6, 2))), s=0.0)
    v = rng.standard_normal(6)
    assert np.allclose(op @ v, m @ v)


def test_apply_diagonal_case():
    op = PerturbedOperator(HermitianOperator.from_diagonal([1.0, 2.0]), indicator_projector([1, 0]), s=0.1)
    assert np.allclose(op @ np.array([1.0, 0.0]), [1 + 0.1j, 0.0])


def test_dimension_checks():
    with pytest.raises(DimensionMismatchError):
        PerturbedOperator(HermitianOperator.from_diagonal([1.0, 2.0]), indicator_projector([1, 0, 1]))
    with pytest.raises(ValueError):
        PerturbedOperator(HermitianOperator.from_diagonal([1.0, 2.0]), indicator_projector([1, 0]), s=-1.0)


def test_numerical_range(hermitian, rng):
    s = 0.25
    op = PerturbedOperator(HermitianOperator.from_matrix(hermitian(10)), span_projector(rng.standard_normal((10, 3))), s)
    for _ in range(50):
        v = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        v /= np.linalg.norm(v)
        value = np.vdot(v, op @ v).imag
        assert -1e-10 <= value <= s + 1e-10


def test_shifted_solve_diagonal():
    lam = np.array([1.0, 2.0, 3.0, 4.0])
    q = np.array([1.0, 0.0, 1.0, 0.0])
    s, sigma = 0.1, 2.5 + 0.05j
    op = PerturbedOperator(HermitianOperator.from_diagonal(lam), indicator_projector(q), s)
    b = np.array([1.0, 2.0, 3.0, 4.0])
    x = shifted_solve(op, sigma, b)
    assert np.allclose(x, b / (lam + 1j * s * q - sigma))


def test_shifted_solve_indicator_has_no_low_rank_part():
    op = PerturbedOperator(HermitianOperator.from_matrix(_sparse_hermitian(30, 1)), indicator_projector(np.arange(30) % 2), 0.1)
    workspace = op.shifted_solver(0.3 + 0.1j)
    assert workspace.rank == 0
    assert workspace.capacitance is None
    assert workspace.method == "splu"


def _check_against_dense(op, sigma, rng):
    b = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    x = op.shifted_solve(sigma, b)
    dense = op.materialize() - sigma * np.eye(op.dim)
    expected = np.linalg.solve(dense, b)
    assert np.linalg.norm(x - expected) <= 1e-9 * np.linalg.norm(expected)
    assert np.linalg.norm(dense @ x - b) <= 1e-9 * np.linalg.norm(b)


def test_shifted_solve_sparse_rank3(rng):
    s = 0.1
    op = PerturbedOperator(HermitianOperator.from_matrix(_sparse_hermitian(200, 2)),
                           span_projector(rng.standard_normal((200, 3))), s)
    workspace = op.shifted_solver(0.7 + 1j * s)
    assert workspace.rank == 3
    _check_against_dense(op, 0.7 + 1j * s, rng)


def test_shifted_solve_localized(rng):
    n = 80
    mask = (np.arange(n) < 30).astype(float)
    op = PerturbedOperator(HermitianOperator.from_matrix(_sparse_hermitian(n, 3)),
                           localized_perturbation_projector(mask, rng.standard_normal((n, 2))), 0.2)
    _check_against_dense(op, -0.4 + 0.1j, rng)


def test_shifted_solve_complement(rng):
    n = 50
    inner = localized_perturbation_projector((np.arange(n) < 10).astype(float), rng.standard_normal(n))
    op = PerturbedOperator(HermitianOperator.from_matrix(_sparse_hermitian(n, 4)), complement(inner), 0.1)
    _check_against_dense(op, 0.2 + 0.05j, rng)


def test_shifted_solve_group_average(rng, hermitian):
    n = 12
    op = PerturbedOperator(HermitianOperator.from_matrix(hermitian(n)), group_average_projector(cyclic_group(n)), 0.1)
    _check_against_dense(op, 0.1 + 0.02j, rng)


def test_shifted_solve_matrix_free(rng, hermitian):
    n = 20
    m = hermitian(n)
    base = HermitianOperator.from_callable(n, lambda v: m @ v)
    op = PerturbedOperator(base, span_projector(rng.standard_normal((n, 2))), 0.1)
    assert op.shifted_solver(0.3 + 0.5j).method == "gmres"
    _check_against_dense(op, 0.3 + 0.5j, rng)


def test_shifted_solve_block_rhs(rng):
    op = PerturbedOperator(HermitianOperator.from_matrix(_sparse_hermitian(40, 5)),
                           span_projector(rng.standard_normal((40, 2))), 0.1)
    sigma = 0.5 + 0.05j
    b = rng.standard_normal((40, 3))
    x = op.shifted_solve(sigma, b)
    dense = op.materialize() - sigma * np.eye(40)
    assert np.abs(dense @ x - b).max() <= 1e-9 * np.abs(b).max() * 40


def test_singular_shift_detected():
    op = PerturbedOperator(HermitianOperator.from_diagonal([1.0, 2.0, 3.0]), indicator_projector([1, 1, 0]), 0.1)
    with pytest.raises(SingularShiftError):
        op.shifted_solve(3.0, np.ones(3))


def test_singular_shift_on_low_rank_eigenvalue():
    # L(s) = diag(1, 2) + 0.1i * e1 e1^T has eigenvalue 1 + 0.1i; mask is empty so the singularity sits in C
    op = PerturbedOperator(HermitianOperator.from_diagonal([1.0, 2.0]), span_projector([np.array([1.0, 0.0])]), 0.1)
    with pytest.raises(SingularShiftError):
        op.shifted_solve(1.0 + 0.1j, np.ones(2))


def test_spectrum_zero_strength(hermitian, rng):
    m = hermitian(8, real=True)
    op = PerturbedOperator(HermitianOperator.from_matrix(m), span_projector(rng.standard_normal((8, 2))), 0.0)
    values = spectrum_dense(op).eigenvalues
    assert np.allclose(values, np.linalg.eigvalsh(m), atol=1e-10)


def test_spectrum_identity_projector(hermitian):
    m = hermitian(8)
    s = 0.1
    op = PerturbedOperator(HermitianOperator.from_matrix(m), indicator_projector(np.ones(8)), s)
    values = spectrum_dense(op).eigenvalues
    assert np.allclose(values, np.linalg.eigvalsh(m) + 1j * s, atol=1e-10)


def test_spectrum_diagonal_case():
    op = PerturbedOperator(HermitianOperator.from_diagonal([1.0, 2.0]), indicator_projector([1, 0]), 0.1)
    assert np.allclose(spectrum_dense(op).eigenvalues, [1 + 0.1j, 2.0])
