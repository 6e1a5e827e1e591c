import numpy as np
import pytest
import scipy.sparse as sp

from coneig.core.linalg.linop import HermitianOperator
from coneig.core.linalg.perturb import PerturbedOperator
from coneig.core.linalg.projectors import indicator_projector, span_projector
from coneig.core.solvers.eigensolve import (
    RegionEigensolver,
    RegionSpec,
    RitzPair,
    SolverMethod,
    SolverParams,
    deduplicate_pairs,
    find_in_region,
    find_in_window,
    find_largest_imag,
    segment_distance,
    shifted_inverse_iteration,
)

ARNOLDI = SolverParams(method=SolverMethod.ARNOLDI, dense_threshold=0)


def _chain_operator(n, seed):
    """Tridiagonal -u'' plus a small random potential: sparse, real, simple spectrum in [0, 5]"""
    rng = np.random.default_rng(seed)
    main = 2.0 + 0.1 * rng.random(n)
    off = -np.ones(n - 1)
    return HermitianOperator.from_matrix(sp.diags([off, main, off], [-1, 0, 1], format="csr"))


def _values(pairs):
    return np.array(sorted((p.mu for p in pairs), key=lambda z: (z.real, z.imag)))


def test_segment_distance():
    region = RegionSpec(a=1.0, b=3.0, s=0.1, delta_star=0.5)
    assert segment_distance(2.0 + 0.1j, region) == pytest.approx(0.0)
    assert segment_distance(4.0 + 0.1j, region) == pytest.approx(1.0)
    assert segment_distance(1.0 + 0.4j, region) == pytest.approx(0.3)


def test_region_validation():
    with pytest.raises(ValueError):
        RegionSpec(a=2.0, b=1.0, s=0.1, delta_star=0.5)
    with pytest.raises(ValueError):
        RegionSpec(a=0.0, b=1.0, s=0.0, delta_star=0.5)
    with pytest.raises(ValueError):
        RegionSpec(a=0.0, b=1.0, s=0.1, delta_star=1.5)


def test_params_validation():
    with pytest.raises(ValueError):
        SolverParams(tol=0.0)
    with pytest.raises(ValueError):
        SolverParams(initial_nev=20, max_nev=10)


def test_region_diagonal_case():
    op = PerturbedOperator(HermitianOperator.from_diagonal([1.0, 2.0, 3.0]), indicator_projector([1, 0, 1]), 0.1)
    pairs = find_in_region(op, RegionSpec(a=0.5, b=1.5, s=0.1, delta_star=0.5))
    assert len(pairs) == 1
    assert pairs[0].mu == pytest.approx(1 + 0.1j)
    assert abs(pairs[0].phi[0]) == pytest.approx(1.0)


def test_region_zero_projector_recovers_eigenpair(rng):
    n = 20
    x, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    lam = np.arange(n, dtype=float)
    m = (x * lam) @ x.conj().T
    op = PerturbedOperator(HermitianOperator.from_matrix((m + m.conj().T) / 2), indicator_projector(np.zeros(n)), 0.1)
    pairs = find_in_region(op, RegionSpec(a=1.9, b=2.1, s=0.1, delta_star=1.0))
    assert len(pairs) == 1
    assert abs(pairs[0].mu - 2.0) <= 1e-8
    assert abs(np.vdot(x[:, 2], pairs[0].phi)) == pytest.approx(1.0, abs=1e-8)


def test_arnoldi_matches_dense_oracle(rng):
    n = 300
    op = PerturbedOperator(_chain_operator(n, 1), span_projector(rng.standard_normal((n, 2))), 0.1)
    region = RegionSpec(a=1.0, b=1.5, s=0.1, delta_star=1.0)
    solver = RegionEigensolver(op, ARNOLDI)
    pairs = solver.find_in_window(region)
    assert solver.diagnostics.method == "arnoldi"
    dense = op.spectrum_dense().eigenvalues
    lo, hi = region.window
    expected = dense[(dense.real >= lo) & (dense.real <= hi)]
    found = _values(pairs)
    assert found.size == expected.size
    assert np.abs(found - expected).max() <= 1e-8 * op.scale
    for pair in pairs:
        assert np.linalg.norm(op.apply(pair.phi) - pair.mu * pair.phi) <= ARNOLDI.tol * op.scale
        assert np.linalg.norm(pair.phi) == pytest.approx(1.0, abs=1e-12)


def test_bisection_and_partition_agree(rng):
    n = 200
    op = PerturbedOperator(_chain_operator(n, 2), span_projector(rng.standard_normal((n, 2))), 0.1)
    region = RegionSpec(a=0.8, b=1.6, s=0.1, delta_star=1.0)
    reference = _values(find_in_window(op, region, ARNOLDI))

    narrow = SolverParams(method=SolverMethod.ARNOLDI, dense_threshold=0, initial_nev=4, max_nev=8)
    solver = RegionEigensolver(op, narrow)
    bisected = _values(solver.find_in_window(region))
    assert len(solver.diagnostics.subintervals) > 1
    assert bisected.size == reference.size
    assert np.abs(bisected - reference).max() <= 1e-8 * op.scale

    pieces = SolverParams(method=SolverMethod.ARNOLDI, dense_threshold=0, max_subinterval_width=0.25)
    partitioned = _values(find_in_window(op, region, pieces))
    assert partitioned.size == reference.size
    assert np.abs(partitioned - reference).max() <= 1e-8 * op.scale


def test_singular_center_is_nudged():
    n = 100
    mask = np.zeros(n)
    mask[50] = 1.0
    op = PerturbedOperator(HermitianOperator.from_diagonal(np.arange(n, dtype=float)), indicator_projector(mask), 0.1)
    solver = RegionEigensolver(op, ARNOLDI)
    pairs = solver.find_in_region(RegionSpec(a=49.5, b=50.5, s=0.1, delta_star=0.5))
    assert solver.diagnostics.nudges == 1
    assert len(pairs) == 1
    assert pairs[0].mu == pytest.approx(50 + 0.1j, abs=1e-10)


def test_region_rejects_mismatched_strength():
    op = PerturbedOperator(HermitianOperator.from_diagonal([1.0, 2.0]), indicator_projector([1, 0]), 0.1)
    with pytest.raises(ValueError):
        find_in_region(op, RegionSpec(a=0.0, b=3.0, s=0.2, delta_star=0.5))


def test_largest_imag_diagonal():
    op = PerturbedOperator(HermitianOperator.from_diagonal([1.0, 2.0]), indicator_projector([0, 1]), 0.1)
    pairs = find_largest_imag(op, 1)
    assert len(pairs) == 1
    assert pairs[0].mu == pytest.approx(2 + 0.1j)
    assert abs(pairs[0].phi[1]) == pytest.approx(1.0)


def test_largest_imag_identity_projector(hermitian):
    n = 6
    m = hermitian(n)
    op = PerturbedOperator(HermitianOperator.from_matrix(m), indicator_projector(np.ones(n)), 0.1)
    values = _values(find_largest_imag(op, n))
    assert np.allclose(values, np.linalg.eigvalsh(m) + 0.1j, atol=1e-10)


def test_largest_imag_matches_dense(hermitian, rng):
    n = 40
    op = PerturbedOperator(HermitianOperator.from_matrix(hermitian(n)), span_projector(rng.standard_normal((n, 3))), 0.1)
    found = sorted(p.mu.imag for p in find_largest_imag(op, 5))
    dense = np.sort(op.spectrum_dense().eigenvalues.imag)[-5:]
    assert np.allclose(found, dense, atol=1e-8)


@pytest.mark.parametrize("rank", [2, 5])
def test_largest_imag_arnoldi_path(rng, rank):
    n = 300
    op = PerturbedOperator(_chain_operator(n, 7), span_projector(rng.standard_normal((n, rank))), 0.1)
    solver = RegionEigensolver(op, ARNOLDI)
    found = sorted(p.mu.imag for p in solver.find_largest_imag(5))
    dense = np.sort(op.spectrum_dense().eigenvalues.imag)[-5:]
    assert solver.diagnostics.method == "arnoldi"
    assert solver.diagnostics.arnoldi_calls >= 1
    assert np.allclose(found, dense, atol=1e-8)


def test_largest_imag_arnoldi_without_dense_fallback(rng):
    n = 300
    op = PerturbedOperator(_chain_operator(n, 11), span_projector(rng.standard_normal((n, 4))), 0.1)
    params = SolverParams(method=SolverMethod.ARNOLDI, dense_threshold=0, dense_cap=0)
    found = sorted(p.mu.imag for p in find_largest_imag(op, 4, params))
    assert np.allclose(found, np.sort(op.spectrum_dense().eigenvalues.imag)[-4:], atol=1e-8)


def test_default_krylov_dimension():
    params = SolverParams()
    assert params.ncv_for(5, 1000) == 40
    assert params.ncv_for(16, 1000) == 64
    assert params.ncv_for(16, 50) == 50


def test_deduplicate_keeps_smaller_residual():
    phi = np.array([1.0, 0.0])
    pairs = [RitzPair(mu=1.0 + 0j, phi=phi, residual=1e-6),
             RitzPair(mu=1.0 + 1e-12j, phi=-phi, residual=1e-12),
             RitzPair(mu=1.0 + 0j, phi=np.array([0.0, 1.0]), residual=1e-10)]
    kept = deduplicate_pairs(pairs)
    assert len(kept) == 2
    assert min(p.residual for p in kept) == 1e-12


def test_inverse_iteration_fixed_point():
    op = HermitianOperator.from_diagonal([1.0, 2.0, 3.0])
    result = shifted_inverse_iteration(op, 2.0 + 1e-3, np.array([0.0, 1.0, 0.0]), steps=1)
    assert result.eigenvalue == pytest.approx(2.0)
    assert result.residual <= 1e-12 * 3.0
    assert abs(result.vector[1]) == pytest.approx(1.0)


def test_inverse_iteration_singular_shift_is_nudged():
    op = HermitianOperator.from_diagonal([1.0, 2.0, 3.0])
    result = shifted_inverse_iteration(op, 1.0, np.array([1.0, 0.1, 0.0]), steps=1)
    assert result.shift != 1.0
    assert abs(result.vector[0]) == pytest.approx(1.0, abs=1e-10)


def test_inverse_iteration_two_by_two():
    op = HermitianOperator.from_diagonal([1.0, 2.0])
    guess = np.array([1.0, 1.0]) / np.sqrt(2.0)
    one = shifted_inverse_iteration(op, 1.9, guess, steps=1)
    two = shifted_inverse_iteration(op, 1.9, guess, steps=2)
    assert abs(one.vector[1]) >= 0.99
    assert abs(two.vector[1]) >= 0.999
    assert two.history == sorted(two.history, reverse=True)


def test_inverse_iteration_random(hermitian, rng):
    m = hermitian(30)
    lam, x = np.linalg.eigh(m)
    op = HermitianOperator.from_matrix(m)
    guess = x[:, 7] + 0.3 * (rng.standard_normal(30) + 1j * rng.standard_normal(30)) / np.sqrt(60)
    result = shifted_inverse_iteration(op, lam[7] + 1e-3, guess, steps=3)
    assert result.residual <= 1e-8 * op.norm_estimate
    assert result.eigenvalue == pytest.approx(lam[7], abs=1e-8)
