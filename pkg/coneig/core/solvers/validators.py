"""
Bound Validators
Dense-oracle checks of the encoding bounds (eigenpairs of L seen in L(s)),
the decoding bounds (eigenpairs of L(s) certifying eigenpairs of L) and the
residual identities
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..linalg.linop import DEFAULT_DENSE_CAP, HermitianOperator, dense_eig, dense_materialize
from ..linalg.perturb import PerturbedOperator
from ..linalg.projectors import OrthoProjector, tau_delta

logger = logging.getLogger(__name__)

VALIDATION_TOL = 1e-9
CLUSTER_TOL = 1e-8


@dataclass
class BoundCheck:
    """One inequality lhs <= rhs, or a note when its precondition fails"""
    name: str
    lhs: float
    rhs: float
    applicable: bool = True
    tolerance: float = 0.0

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return (not self.applicable) or self.margin >= -self.tolerance

    @property
    def status(self) -> str:
        if not self.applicable:
            return "not_applicable"
        return "ok" if self.holds else "failed"

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin if self.applicable else None, "status": self.status}


@dataclass
class EncodingEntry:
    eigenvalue: float
    multiplicity: int
    closeness: float
    gap: float
    s: float
    distance: float
    checks: List[BoundCheck] = field(default_factory=list)
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eigenvalue": self.eigenvalue,
            "multiplicity": self.multiplicity,
            "D": self.closeness,
            "gap": None if math.isinf(self.gap) else self.gap,
            "s": self.s,
            "distance": self.distance,
            "checks": [c.to_dict() for c in self.checks],
            "note": self.note,
        }


@dataclass
class DecodingEntry:
    mu: complex
    tau: float
    delta: float
    checks: List[BoundCheck] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mu": {"re": self.mu.real, "im": self.mu.imag},
            "tau": self.tau,
            "delta": self.delta,
            "checks": [c.to_dict() for c in self.checks],
        }


@dataclass
class ValidationReport:
    kind: str
    entries: List[Any] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def checks(self) -> List[BoundCheck]:
        return [c for e in self.entries for c in e.checks]

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.checks)

    @property
    def worst_margin(self) -> Optional[float]:
        margins = [c.margin for c in self.checks if c.applicable]
        return min(margins) if margins else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "all_hold": self.all_hold,
            "worst_margin": self.worst_margin,
            "entries": [e.to_dict() for e in self.entries],
            "notes": list(self.notes),
        }


def eigen_clusters(values: np.ndarray, tol: float) -> List[Tuple[int, int]]:
    """Index ranges [start, end) of sorted eigenvalues closer than tol"""
    clusters = []
    start = 0
    for j in range(1, values.size + 1):
        if j == values.size or values[j] - values[j - 1] > tol:
            clusters.append((start, j))
            start = j
    return clusters


def _scale(op: HermitianOperator, s: float = 0.0) -> float:
    return max(1.0, op.norm_estimate + abs(s))


def validate_encoding(op: HermitianOperator,
                      projector: OrthoProjector,
                      s_values: Sequence[float],
                      cap: int = DEFAULT_DENSE_CAP,
                      tol: float = VALIDATION_TOL) -> ValidationReport:
    """Check dist(lambda + i*s, Spec L(s)) against s*D and s*D^2/(1 - 2s/d)"""
    spectrum = dense_eig(dense_materialize(op, cap), hermitian=True, cap=cap)
    values = np.real(spectrum.eigenvalues)
    vectors = spectrum.eigenvectors
    scale = _scale(op, max(s_values, default=0.0))
    clusters = eigen_clusters(values, CLUSTER_TOL * scale)
    centers = [float(values[i:j].mean()) for i, j in clusters]

    perturbed = {s: PerturbedOperator(op, projector, s).spectrum_dense(cap).eigenvalues for s in s_values}
    report = ValidationReport(kind="encoding")
    for idx, (i, j) in enumerate(clusters):
        lam = centers[idx]
        others = [abs(lam - c) for k, c in enumerate(centers) if k != idx]
        gap = min(others) if others else math.inf
        block = vectors[:, i:j]
        exterior = block - projector.apply(block)
        closeness = float(min(1.0, np.linalg.norm(exterior, 2)))
        note = "" if j - i == 1 else f"multiplicity {j - i}: D taken over the whole eigenspace"
        for s in s_values:
            distance = float(np.min(np.abs(perturbed[s] - complex(lam, s))))
            first = BoundCheck(name="linear", lhs=distance, rhs=s * closeness,
                               applicable=s <= (1.0 - closeness) * gap / 2.0, tolerance=tol * scale)
            quadratic_ok = s < gap / 2.0
            rhs = s * closeness ** 2 / (1.0 - 2.0 * s / gap) if quadratic_ok and not math.isinf(gap) else s * closeness ** 2
            second = BoundCheck(name="quadratic", lhs=distance, rhs=rhs,
                                applicable=quadratic_ok, tolerance=tol * scale)
            report.entries.append(EncodingEntry(eigenvalue=lam, multiplicity=j - i, closeness=closeness,
                                                gap=gap, s=float(s), distance=distance,
                                                checks=[first, second], note=note))
    logger.info("encoding validation: %d entries, all hold=%s", len(report.entries), report.all_hold)
    return report


def validate_decoding(op: HermitianOperator,
                      projector: OrthoProjector,
                      s: float,
                      cap: int = DEFAULT_DENSE_CAP,
                      tol: float = VALIDATION_TOL) -> ValidationReport:
    """Check the two-sided distance bound, the Re mu bound and the eigenvector bound for every eigenpair of L(s)"""
    spectrum = dense_eig(dense_materialize(op, cap), hermitian=True, cap=cap)
    values = np.real(spectrum.eigenvalues)
    vectors = spectrum.eigenvectors
    scale = _scale(op, s)
    clusters = eigen_clusters(values, CLUSTER_TOL * scale)
    centers = np.array([values[i:j].mean() for i, j in clusters])

    report = ValidationReport(kind="decoding")
    report.notes.append("eigenvector bound evaluated without shifting L; it depends only on spectral distances")
    lifted = PerturbedOperator(op, projector, s).spectrum_dense(cap)
    for mu, phi in lifted.pairs():
        mu = complex(mu)
        tau, delta = tau_delta(projector, phi)
        unit = phi / np.linalg.norm(phi)
        tolerance = tol * scale
        dist_lifted = float(np.min(np.abs(values + 1j * s - mu)))
        dist_real = float(np.min(np.abs(values - mu.real)))
        checks = [
            BoundCheck(name="lifted_lower", lhs=s * delta ** 2, rhs=dist_lifted, tolerance=tolerance),
            BoundCheck(name="lifted_upper", lhs=dist_lifted, rhs=s * delta, tolerance=tolerance),
            BoundCheck(name="real_part", lhs=dist_real, rhs=s * delta * tau, tolerance=tolerance),
        ]
        nearest = int(np.argmin(np.abs(centers - mu.real)))
        others = np.delete(centers, nearest)
        if others.size:
            gap = float(np.min(np.abs(others - mu.real)))
            i, j = clusters[nearest]
            block = vectors[:, i:j]
            outside = unit - block @ (block.conj().T @ unit)
            checks.append(BoundCheck(name="eigenvector", lhs=float(np.linalg.norm(outside)),
                                     rhs=s * delta * tau / gap if gap > 0 else math.inf,
                                     tolerance=tolerance))
        report.entries.append(DecodingEntry(mu=mu, tau=tau, delta=delta, checks=checks))
    logger.info("decoding validation: %d eigenpairs, all hold=%s", len(report.entries), report.all_hold)
    return report


def residual_identity_check(operator: PerturbedOperator, mu: complex, phi: np.ndarray) -> Tuple[float, float]:
    """(||(L - Re mu) phi||, s * delta * tau * ||phi||)"""
    tau, delta = tau_delta(operator.projector, phi)
    lhs = float(np.linalg.norm(operator.base.apply(phi) - complex(mu).real * phi))
    return lhs, operator.s * delta * tau * float(np.linalg.norm(phi))


def residual_real_identity_check(op: HermitianOperator,
                                 projector: OrthoProjector,
                                 s: float,
                                 mu: complex,
                                 phi: np.ndarray) -> Tuple[float, float]:
    """Both sides of ||(L - Re mu) Re phi||^2 = s^2 (tau^4 ||(I-Q) Im phi||^2 + delta^4 ||Q Im phi||^2)"""
    if not op.is_real:
        raise ValueError("The real residual identity needs a real operator")
    if not projector.is_real:
        raise ValueError("The real residual identity needs a real projector")
    phi = np.asarray(phi, dtype=complex)
    tau, delta = tau_delta(projector, phi)
    x, y = phi.real, phi.imag
    lhs = float(np.linalg.norm(np.real(op.apply(x)) - complex(mu).real * x) ** 2)
    qy = np.real(projector.apply(y))
    rhs = s ** 2 * (tau ** 4 * float(np.linalg.norm(y - qy)) ** 2 + delta ** 4 * float(np.linalg.norm(qy)) ** 2)
    return lhs, rhs


@dataclass
class IdentityDefects:
    im_identity: float
    residual_identity: float
    real_residual_identity: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return {"im_identity": self.im_identity,
                "residual_identity": self.residual_identity,
                "real_residual_identity": self.real_residual_identity}


def identity_defects(operator: PerturbedOperator, cap: int = DEFAULT_DENSE_CAP) -> IdentityDefects:
    """Largest defects of the Im mu and residual identities over the dense spectrum of L(s)"""
    spectrum = operator.spectrum_dense(cap)
    im_defect = residual_defect = 0.0
    real_defect = 0.0 if operator.base.is_real and operator.projector.is_real else None
    for mu, phi in spectrum.pairs():
        mu = complex(mu)
        tau, _ = tau_delta(operator.projector, phi)
        im_defect = max(im_defect, abs(mu.imag - operator.s * tau ** 2))
        lhs, rhs = residual_identity_check(operator, mu, phi)
        residual_defect = max(residual_defect, abs(lhs - rhs))
        if real_defect is not None:
            lhs, rhs = residual_real_identity_check(operator.base, operator.projector, operator.s, mu, phi)
            real_defect = max(real_defect, abs(lhs - rhs) / max(1.0, rhs))
    return IdentityDefects(im_identity=im_defect, residual_identity=residual_defect,
                           real_residual_identity=real_defect)
