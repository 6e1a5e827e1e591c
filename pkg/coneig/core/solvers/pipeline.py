"""
Constrained Eigensolver Pipeline
Region solve on L(s), per-pair closeness metrics, canonical real rescaling,
optional inverse-iteration post-processing and the acceptance filter
"""

import logging
import math
import os
import platform
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy
import scipy.linalg as sla

from ... import __version__
from ..errors import ConvergenceError
from ..linalg.linop import HermitianOperator
from ..linalg.perturb import PerturbedOperator
from ..linalg.projectors import OrthoProjector, complement, tau_delta
from .eigensolve import RegionEigensolver, RegionSpec, RitzPair, SolverParams, shifted_inverse_iteration

logger = logging.getLogger(__name__)

NO_PAIRS_MESSAGE = "No constrained eigenpairs exist"
INTERVAL_SLACK = 1e-12
RESCALE_CONDITION = 1e-8
THRESHOLD_SLACK = 1e-12


class SearchMode(Enum):
    NEAR = "near"
    AVOID = "avoid"


class CandidateScope(Enum):
    REGION = "region"
    WINDOW = "window"


class PostProcess(Enum):
    OFF = "off"
    INVERSE_ITERATION = "inverse_iteration"


class RejectionReason(Enum):
    NONE = "none"
    OUT_OF_INTERVAL = "out_of_interval"
    BELOW_TAU_THRESHOLD = "below_tau_threshold"
    OUT_OF_REGION = "out_of_region"


@dataclass(frozen=True)
class SearchSpec:
    region: RegionSpec
    mode: SearchMode = SearchMode.NEAR
    post_process: PostProcess = PostProcess.OFF
    post_process_steps: int = 1
    rescale_real: bool = True
    scope: CandidateScope = CandidateScope.REGION
    interval: Optional[Tuple[float, float]] = None
    cluster_width: float = 0.0

    def __post_init__(self):
        if self.post_process_steps < 1:
            raise ValueError("post_process_steps must be at least 1")
        if self.interval is not None and self.interval[0] > self.interval[1]:
            raise ValueError(f"Acceptance interval is empty: {self.interval}")
        if self.cluster_width < 0.0:
            raise ValueError(f"cluster_width must be nonnegative, got {self.cluster_width}")

    @property
    def delta_star(self) -> float:
        return self.region.delta_star

    @property
    def tau2_threshold(self) -> float:
        return 1.0 - self.region.delta_star ** 2

    @property
    def acceptance_interval(self) -> Tuple[float, float]:
        return self.interval if self.interval is not None else (self.region.a, self.region.b)

    def complementary(self) -> "SearchSpec":
        """Near-mode spec for W-perp with delta_star replaced by 1 - delta_star"""
        if self.region.delta_star >= 1.0:
            raise ValueError("Avoid mode needs delta_star < 1")
        region = replace(self.region, delta_star=1.0 - self.region.delta_star)
        return replace(self, region=region, mode=SearchMode.NEAR, interval=self.acceptance_interval)

    def to_dict(self) -> Dict[str, Any]:
        lo, hi = self.acceptance_interval
        return {
            "region": self.region.to_dict(),
            "mode": self.mode.value,
            "post_process": self.post_process.value,
            "post_process_steps": self.post_process_steps,
            "rescale_real": self.rescale_real,
            "scope": self.scope.value,
            "cluster_width": self.cluster_width,
            "interval": [lo, hi],
            "tau2_threshold": self.tau2_threshold,
        }


def complex_dict(z: complex) -> Dict[str, float]:
    return {"re": float(z.real), "im": float(z.imag)}


@dataclass
class CandidateEigenpair:
    index: int
    mu: complex
    phi: np.ndarray
    tau2: float
    delta2: float
    residual_complex: float
    ritz_residual: float
    im_identity_defect: float
    residual_identity_defect: float
    region_distance: float
    residual_real: Optional[float] = None
    accepted: bool = False
    reason: RejectionReason = RejectionReason.NONE
    label: str = "constrained"

    @property
    def tau(self) -> float:
        return math.sqrt(self.tau2)

    @property
    def delta(self) -> float:
        return math.sqrt(self.delta2)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "mu": complex_dict(self.mu),
            "tau2": self.tau2,
            "delta2": self.delta2,
            "residual_complex": self.residual_complex,
            "residual_real": self.residual_real,
            "ritz_residual": self.ritz_residual,
            "im_identity_defect": self.im_identity_defect,
            "residual_identity_defect": self.residual_identity_defect,
            "region_distance": self.region_distance,
            "accepted": self.accepted,
            "reason": self.reason.value,
            "label": self.label,
        }


@dataclass
class Certificate:
    residual: float
    eigenvalue_bound: float
    eigenvector_bound: Optional[float] = None
    gap_estimate: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "residual": self.residual,
            "eigenvalue_bound": self.eigenvalue_bound,
            "eigenvector_bound": self.eigenvector_bound,
            "gap_estimate": self.gap_estimate,
        }


@dataclass
class AcceptedPair:
    candidate_index: int
    eigenvalue: float
    vector: np.ndarray
    tau2: float
    certificate: Certificate
    rescale_factor: Optional[complex] = None
    post_processed: bool = False
    label: str = "constrained"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "candidate_index": self.candidate_index,
            "eigenvalue": self.eigenvalue,
            "tau2": self.tau2,
            "certificate": self.certificate.to_dict(),
            "rescale_factor": None if self.rescale_factor is None else complex_dict(self.rescale_factor),
            "post_processed": self.post_processed,
            "label": self.label,
        }


@dataclass
class RescaleResult:
    factor: complex
    vector: np.ndarray
    residual_real: float


def provenance(seed: int) -> Dict[str, Any]:
    return {
        "version": __version__,
        "seed": seed,
        "threads": os.environ.get("OMP_NUM_THREADS", "default"),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def solver_params_dict(params: SolverParams) -> Dict[str, Any]:
    return {
        "krylov_dim": params.krylov_dim,
        "max_restarts": params.max_restarts,
        "tol": params.tol,
        "seed": params.seed,
        "mode": params.mode.value,
        "n_requested": params.n_requested,
        "method": params.method.value,
        "dense_threshold": params.dense_threshold,
        "initial_nev": params.initial_nev,
        "max_nev": params.max_nev,
        "max_subinterval_width": params.max_subinterval_width,
    }


@dataclass
class RunReport:
    spec: SearchSpec
    params: SolverParams
    candidates: List[CandidateEigenpair] = field(default_factory=list)
    accepted: List[AcceptedPair] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    provenance: Dict[str, Any] = field(default_factory=dict)
    message: str = ""
    converged: bool = True
    problem: Dict[str, Any] = field(default_factory=dict)

    @property
    def accepted_indices(self) -> List[int]:
        return [a.candidate_index for a in self.accepted]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": "v1",
            "problem": dict(self.problem),
            "spec": self.spec.to_dict(),
            "solver": solver_params_dict(self.params),
            "message": self.message,
            "converged": self.converged,
            "candidates": [c.to_dict() for c in self.candidates],
            "accepted": [a.to_dict() for a in self.accepted],
            "diagnostics": dict(self.diagnostics),
            "provenance": dict(self.provenance),
        }


def metrics(operator: PerturbedOperator, pair: RitzPair, index: int = 0) -> CandidateEigenpair:
    """Closeness measures and identity defects for one eigenpair of L(s)"""
    phi = pair.phi
    tau, delta = tau_delta(operator.projector, phi)
    s = operator.s
    alpha = pair.mu.real
    residual_complex = float(np.linalg.norm(operator.base.apply(phi) - alpha * phi))
    candidate = CandidateEigenpair(index=index,
                                   mu=pair.mu,
                                   phi=phi,
                                   tau2=tau ** 2,
                                   delta2=delta ** 2,
                                   residual_complex=residual_complex,
                                   ritz_residual=pair.residual,
                                   im_identity_defect=abs(pair.mu.imag - s * tau ** 2),
                                   residual_identity_defect=abs(residual_complex - s * delta * tau),
                                   region_distance=float("nan"))
    logger.debug("candidate %d: mu=%s tau2=%.4f residual=%.3e", index, pair.mu, candidate.tau2, residual_complex)
    return candidate


def _real_residual(op: HermitianOperator, alpha: float, v: np.ndarray) -> np.ndarray:
    return np.real(op.apply(v)) - alpha * v


def canonical_rescale(op: HermitianOperator, mu: complex, phi: np.ndarray) -> RescaleResult:
    """Unit c minimizing ||(L - Re mu) Re(c phi)|| / ||Re(c phi)||; returns the unit real vector"""
    if not op.is_real:
        raise ValueError("canonical_rescale requires a real operator")
    phi = np.asarray(phi, dtype=complex)
    x, y = phi.real, phi.imag
    if not (np.any(x) or np.any(y)):
        raise ValueError("canonical_rescale needs a nonzero vector")
    alpha = complex(mu).real
    r1 = _real_residual(op, alpha, x)
    r2 = _real_residual(op, alpha, y)

    # Re(c phi) = cos(t) x - sin(t) y, residual = cos(t) r1 - sin(t) r2
    gram_res = np.array([[r1 @ r1, -(r1 @ r2)], [-(r1 @ r2), r2 @ r2]])
    gram_vec = np.array([[x @ x, -(x @ y)], [-(x @ y), y @ y]])
    b_values, b_vectors = sla.eigh(gram_vec)
    if b_values[0] <= RESCALE_CONDITION * b_values[1]:
        choice = b_vectors[:, 1]
    else:
        _, vectors = sla.eigh(gram_res, gram_vec)
        choice = vectors[:, 0]

    def objective(t: np.ndarray) -> float:
        denom = t @ gram_vec @ t
        return float(t @ gram_res @ t / denom) if denom > 0 else float("inf")

    choice = choice / np.linalg.norm(choice)
    identity = np.array([1.0, 0.0])
    if objective(identity) <= objective(choice):
        choice = identity

    vector = choice[0] * x - choice[1] * y
    factor = complex(choice[0], choice[1])
    peak = np.argmax(np.abs(vector))
    if vector[peak] < 0:
        vector = -vector
        factor = -factor
    vector = vector / np.linalg.norm(vector)
    residual = float(np.linalg.norm(_real_residual(op, alpha, vector)))
    return RescaleResult(factor=factor, vector=vector, residual_real=residual)


def _gap_estimates(candidates: List[CandidateEigenpair]) -> List[Optional[float]]:
    real_parts = np.array([c.mu.real for c in candidates])
    gaps: List[Optional[float]] = []
    for j, cand in enumerate(candidates):
        others = np.delete(real_parts, j)
        gaps.append(float(np.min(np.abs(others - cand.mu.real))) if others.size else None)
    return gaps


def _decide(operator: PerturbedOperator,
            spec: SearchSpec,
            candidate: CandidateEigenpair,
            gap: Optional[float]) -> Optional[AcceptedPair]:
    """Algorithm body for one candidate: rescale, post-process, filter"""
    base = operator.base
    vector = candidate.phi
    eigenvalue = candidate.mu.real
    factor = None
    if spec.rescale_real and base.is_real:
        rescaled = canonical_rescale(base, candidate.mu, candidate.phi)
        candidate.residual_real = rescaled.residual_real
        vector, factor = rescaled.vector, rescaled.factor

    post_processed = False
    if spec.post_process is PostProcess.INVERSE_ITERATION:
        result = shifted_inverse_iteration(base, candidate.mu.real, vector,
                                           steps=spec.post_process_steps, scale=operator.scale)
        vector, eigenvalue, post_processed = result.vector, result.eigenvalue, True
        if spec.rescale_real and base.is_real:
            vector = canonical_rescale(base, eigenvalue, vector).vector

    tau, delta = tau_delta(operator.projector, vector)
    lo, hi = spec.acceptance_interval
    widen = INTERVAL_SLACK * max(abs(lo), abs(hi), 1.0)
    if not lo - widen <= eigenvalue <= hi + widen:
        candidate.reason = RejectionReason.OUT_OF_INTERVAL
        return None
    if delta ** 2 > spec.delta_star ** 2 + THRESHOLD_SLACK:
        candidate.reason = RejectionReason.BELOW_TAU_THRESHOLD
        return None

    candidate.accepted = True
    residual = float(np.linalg.norm(base.apply(vector) - eigenvalue * vector) / np.linalg.norm(vector))
    s = operator.s
    eigenvalue_bound = s * candidate.delta * candidate.tau
    eigenvector_bound = eigenvalue_bound / gap if gap else None
    certificate = Certificate(residual=residual,
                              eigenvalue_bound=eigenvalue_bound,
                              eigenvector_bound=eigenvector_bound,
                              gap_estimate=gap)
    return AcceptedPair(candidate_index=candidate.index,
                        eigenvalue=float(eigenvalue),
                        vector=vector,
                        tau2=tau ** 2,
                        certificate=certificate,
                        rescale_factor=factor,
                        post_processed=post_processed)


def order_pairs(pairs: List[RitzPair], cluster_width: float = 0.0) -> List[RitzPair]:
    """Ascending real part; within a run of real parts no wider than cluster_width, ascending imaginary part"""
    ordered = sorted(pairs, key=RitzPair.sort_key)
    if cluster_width <= 0.0:
        return ordered
    result: List[RitzPair] = []
    cluster: List[RitzPair] = []
    for pair in ordered:
        if cluster and pair.mu.real - cluster[0].mu.real > cluster_width:
            result.extend(sorted(cluster, key=lambda p: p.mu.imag))
            cluster = []
        cluster.append(pair)
    result.extend(sorted(cluster, key=lambda p: p.mu.imag))
    return result


def evaluate(operator: PerturbedOperator,
             spec: SearchSpec,
             params: SolverParams,
             pairs: List[RitzPair],
             converged: bool = True) -> RunReport:
    """Score and filter solved pairs into a report"""
    region = spec.region
    slack = 10.0 * params.tol * operator.scale
    ordered = order_pairs(pairs, spec.cluster_width)
    candidates = [metrics(operator, pair, idx) for idx, pair in enumerate(ordered)]
    gaps = _gap_estimates(candidates)
    accepted: List[AcceptedPair] = []
    for cand, gap in zip(candidates, gaps):
        cand.region_distance = region.distance(cand.mu)
        if not region.contains(cand.mu, slack):
            cand.reason = RejectionReason.OUT_OF_REGION
            continue
        pair = _decide(operator, spec, cand, gap)
        if pair is not None:
            accepted.append(pair)

    message = ""
    if not any(region.contains(c.mu, slack) for c in candidates):
        message = NO_PAIRS_MESSAGE
    logger.info("%d candidates, %d accepted (tau2 >= %.3f)", len(candidates), len(accepted), spec.tau2_threshold)
    return RunReport(spec=spec,
                     params=params,
                     candidates=candidates,
                     accepted=accepted,
                     provenance=provenance(params.seed),
                     message=message,
                     converged=converged)


def run(op: HermitianOperator,
        projector: OrthoProjector,
        spec: SearchSpec,
        params: Optional[SolverParams] = None) -> RunReport:
    """Find eigenpairs of L with eigenvalue in [a, b] and delta <= delta_star"""
    params = params or SolverParams()
    if spec.mode is SearchMode.AVOID:
        return avoid_run(op, projector, spec, params)
    operator = PerturbedOperator(op, projector, spec.region.s)
    solver = RegionEigensolver(operator, params)
    try:
        if spec.scope is CandidateScope.WINDOW:
            pairs = solver.find_in_window(spec.region)
        else:
            pairs = solver.find_in_region(spec.region)
    except ConvergenceError as err:
        logger.warning("solver stopped early: %s", err)
        report = evaluate(operator, spec, params, list(err.partial), converged=False)
        report.diagnostics = solver.diagnostics.to_dict()
        raise ConvergenceError(str(err), partial=report, diagnostics=report.diagnostics,
                               best_residual=err.best_residual) from err
    report = evaluate(operator, spec, params, pairs)
    report.diagnostics = solver.diagnostics.to_dict()
    return report


def avoid_run(op: HermitianOperator,
              projector: OrthoProjector,
              spec: SearchSpec,
              params: Optional[SolverParams] = None) -> RunReport:
    """Eigenpairs far from W: near mode on the complement with delta_star -> 1 - delta_star"""
    params = params or SolverParams()
    inner = spec.complementary()
    try:
        report = run(op, complement(projector), inner, params)
    except ConvergenceError as err:
        if isinstance(err.partial, RunReport):
            _label_pattern_breaking(err.partial, spec)
        raise
    return _label_pattern_breaking(report, spec)


def _label_pattern_breaking(report: RunReport, spec: SearchSpec) -> RunReport:
    for cand in report.candidates:
        cand.label = "pattern-breaking"
    for pair in report.accepted:
        pair.label = "pattern-breaking"
    report.spec = spec
    return report
