import numpy as np
import pytest

from coneig.core.linalg.linop import HermitianOperator
from coneig.core.linalg.perturb import PerturbedOperator
from coneig.core.linalg.projectors import indicator_projector, span_projector
from coneig.core.solvers.validators import (
    BoundCheck,
    eigen_clusters,
    identity_defects,
    residual_identity_check,
    residual_real_identity_check,
    validate_decoding,
    validate_encoding,
)


def _random_instance(hermitian, rng, n, rank, real=False):
    op = HermitianOperator.from_matrix(hermitian(n, real=real))
    basis = rng.standard_normal((n, rank))
    if not real:
        basis = basis + 1j * rng.standard_normal((n, rank))
    return op, span_projector(basis)


def test_bound_check_status():
    assert BoundCheck(name="x", lhs=1.0, rhs=2.0).status == "ok"
    assert BoundCheck(name="x", lhs=2.0, rhs=1.0).status == "failed"
    assert BoundCheck(name="x", lhs=2.0, rhs=1.0, applicable=False).status == "not_applicable"
    assert BoundCheck(name="x", lhs=1.0 + 1e-12, rhs=1.0, tolerance=1e-10).holds
    assert BoundCheck(name="x", lhs=2.0, rhs=1.0, applicable=False).to_dict()["margin"] is None


def test_eigen_clusters():
    assert eigen_clusters(np.array([0.0, 1.0, 1.0 + 1e-12, 2.0]), 1e-8) == [(0, 1), (1, 3), (3, 4)]


def test_encoding_identity_projector(hermitian):
    op = HermitianOperator.from_matrix(hermitian(12))
    report = validate_encoding(op, indicator_projector(np.ones(12)), [0.05, 0.2])
    assert report.all_hold
    for entry in report.entries:
        assert entry.closeness == pytest.approx(0.0, abs=1e-10)
        assert entry.distance <= 1e-10


def test_encoding_zero_projector(hermitian):
    op = HermitianOperator.from_matrix(hermitian(10, real=True))
    report = validate_encoding(op, indicator_projector(np.zeros(10)), [0.01])
    assert report.all_hold
    for entry in report.entries:
        assert entry.closeness == pytest.approx(1.0)
        assert entry.distance == pytest.approx(0.01, abs=1e-10)
        linear = entry.checks[0]
        assert linear.name == "linear"
        assert linear.status == "not_applicable"


def test_encoding_random_rank5(hermitian, rng):
    op, q = _random_instance(hermitian, rng, 100, 5)
    report = validate_encoding(op, q, [0.01, 0.1])
    assert len(report.entries) == 200
    assert report.all_hold
    assert {c.name for c in report.checks} == {"linear", "quadratic"}


def test_encoding_strength_beyond_half_gap():
    op = HermitianOperator.from_diagonal([0.0, 1.0])
    report = validate_encoding(op, indicator_projector([1, 0]), [1.0])
    statuses = {c.name: c.status for e in report.entries for c in e.checks if e.eigenvalue == 0.0}
    assert statuses["quadratic"] == "not_applicable"
    assert report.all_hold


def test_encoding_reports_multiplicity():
    op = HermitianOperator.from_diagonal([1.0, 1.0, 3.0])
    report = validate_encoding(op, indicator_projector([1, 0, 0]), [0.1])
    assert [e.multiplicity for e in report.entries] == [2, 1]
    assert report.entries[0].note
    assert report.all_hold


@pytest.mark.parametrize("real", [False, True])
def test_decoding_random(hermitian, rng, real):
    op, q = _random_instance(hermitian, rng, 60, 3, real=real)
    report = validate_decoding(op, q, 0.1)
    assert len(report.entries) == 60
    assert report.all_hold
    names = {c.name for c in report.checks}
    assert names == {"lifted_lower", "lifted_upper", "real_part", "eigenvector"}
    for entry in report.entries:
        assert entry.tau ** 2 + entry.delta ** 2 == pytest.approx(1.0)
        assert entry.mu.imag == pytest.approx(0.1 * entry.tau ** 2, abs=1e-10)


def test_decoding_commuting_case():
    op = HermitianOperator.from_diagonal([0.0, 1.0, 2.0, 3.0])
    report = validate_decoding(op, indicator_projector([1, 0, 1, 0]), 0.3)
    assert report.all_hold
    assert sorted(round(e.delta, 12) for e in report.entries) == [0.0, 0.0, 1.0, 1.0]


def test_decoding_identity_projector(hermitian):
    op = HermitianOperator.from_matrix(hermitian(15))
    report = validate_decoding(op, indicator_projector(np.ones(15)), 0.2)
    assert report.all_hold
    for entry in report.entries:
        assert entry.delta == pytest.approx(0.0, abs=1e-10)
    assert report.to_dict()["kind"] == "decoding"


def test_residual_identity_diagonal():
    op = PerturbedOperator(HermitianOperator.from_diagonal([1.0, 2.0]), indicator_projector([1, 0]), 0.1)
    lhs, rhs = residual_identity_check(op, 1 + 0.1j, np.array([1.0, 0.0]))
    assert lhs == pytest.approx(0.0)
    assert rhs == pytest.approx(0.0)


def test_residual_real_identity_random(hermitian, rng):
    op, q = _random_instance(hermitian, rng, 30, 3, real=True)
    spectrum = PerturbedOperator(op, q, 0.1).spectrum_dense()
    for mu, phi in spectrum.pairs():
        lhs, rhs = residual_real_identity_check(op, q, 0.1, complex(mu), phi)
        assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-12)


def test_residual_real_identity_real_vector():
    op = HermitianOperator.from_diagonal([1.0, 2.0, 3.0])
    lhs, rhs = residual_real_identity_check(op, indicator_projector(np.ones(3)), 0.1, 1 + 0.1j,
                                            np.array([1.0, 0.0, 0.0]))
    assert lhs == pytest.approx(0.0)
    assert rhs == pytest.approx(0.0)


def test_residual_real_identity_needs_real_operator(hermitian):
    op = HermitianOperator.from_matrix(hermitian(4))
    with pytest.raises(ValueError):
        residual_real_identity_check(op, indicator_projector(np.ones(4)), 0.1, 0.1j, np.ones(4))


def test_identity_defects(hermitian, rng):
    op, q = _random_instance(hermitian, rng, 40, 4, real=True)
    defects = identity_defects(PerturbedOperator(op, q, 0.1))
    assert defects.im_identity <= 1e-10
    assert defects.residual_identity <= 1e-10
    assert defects.real_residual_identity <= 1e-8


def test_identity_defects_complex_operator(hermitian, rng):
    op, q = _random_instance(hermitian, rng, 20, 2)
    defects = identity_defects(PerturbedOperator(op, q, 0.2))
    assert defects.real_residual_identity is None
    assert defects.to_dict()["im_identity"] <= 1e-10


def test_residual_real_identity_needs_real_projector(rng):
    op = HermitianOperator.from_diagonal([1.0, 2.0, 3.0, 4.0])
    q = span_projector(rng.standard_normal((4, 1)) + 1j * rng.standard_normal((4, 1)))
    with pytest.raises(ValueError):
        residual_real_identity_check(op, q, 0.1, 1 + 0.05j, np.ones(4))


def test_identity_defects_complex_span_real_operator(hermitian, rng):
    op, _ = _random_instance(hermitian, rng, 20, 2, real=True)
    q = span_projector(rng.standard_normal((20, 2)) + 1j * rng.standard_normal((20, 2)))
    defects = identity_defects(PerturbedOperator(op, q, 0.1))
    assert defects.real_residual_identity is None
    assert defects.residual_identity <= 1e-10
