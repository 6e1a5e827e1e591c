"""
Region Eigensolver
Finds every eigenpair of L(s) near the lifted segment [a, b] + i*s with
shift-invert Arnoldi (ARPACK), plus a largest-imaginary-part mode and a dense
fallback for small problems
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ConvergenceError, DenseCapExceededError, SingularShiftError
from ..linalg.linop import DEFAULT_DENSE_CAP, HermitianOperator, VectorLike, as_vector
from ..linalg.perturb import PerturbedOperator, ShiftedFactorization, ShiftedSolveWorkspace

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_DENSE_THRESHOLD = 64
DEFAULT_INITIAL_NEV = 16
DEFAULT_MAX_NEV = 160
DEFAULT_MAX_RESTARTS = 1000
DEDUPE_VALUE_TOL = 1e-8
DEDUPE_OVERLAP = 0.999
SHIFT_NUDGE = 1e-3
INVERSE_ITERATION_NUDGE = 1e-8
MAX_BISECTION_DEPTH = 24
LARGEST_IMAG_PADDING = 8


class SolverMode(Enum):
    REGION = "region"
    WINDOW = "window"
    LARGEST_IMAG = "largest_imag"


class SolverMethod(Enum):
    AUTO = "auto"
    ARNOLDI = "arnoldi"
    DENSE = "dense"


@dataclass(frozen=True)
class RegionSpec:
    """{mu : dist(mu, [a, b] + i*s) <= s * delta_star}"""
    a: float
    b: float
    s: float
    delta_star: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError(f"Interval endpoints must be finite, got [{self.a}, {self.b}]")
        if self.a > self.b:
            raise ValueError(f"Interval is empty: a={self.a} > b={self.b}")
        if not np.isfinite(self.s) or self.s <= 0:
            raise ValueError(f"Perturbation strength s must be positive, got {self.s}")
        if not 0 < self.delta_star <= 1:
            raise ValueError(f"delta_star must lie in (0, 1], got {self.delta_star}")

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.a + self.b), self.s)

    @property
    def radius(self) -> float:
        return self.s * self.delta_star

    @property
    def window(self) -> Tuple[float, float]:
        """Real parts that can belong to the region"""
        return self.a - self.radius, self.b + self.radius

    def distance(self, mu: complex) -> float:
        return segment_distance(mu, self)

    def contains(self, mu: complex, slack: float = 0.0) -> bool:
        return segment_distance(mu, self) <= self.radius + slack

    def in_window(self, mu: complex, slack: float = 0.0) -> bool:
        lo, hi = self.window
        return lo - slack <= mu.real <= hi + slack

    def to_dict(self) -> Dict[str, float]:
        return {"a": self.a, "b": self.b, "s": self.s, "delta_star": self.delta_star}


@dataclass(frozen=True)
class SolverParams:
    krylov_dim: Optional[int] = None
    max_restarts: int = DEFAULT_MAX_RESTARTS
    tol: float = DEFAULT_TOL
    seed: int = 0
    mode: SolverMode = SolverMode.REGION
    n_requested: int = 6
    method: SolverMethod = SolverMethod.AUTO
    dense_threshold: int = DEFAULT_DENSE_THRESHOLD
    dense_cap: int = DEFAULT_DENSE_CAP
    initial_nev: int = DEFAULT_INITIAL_NEV
    max_nev: int = DEFAULT_MAX_NEV
    max_subinterval_width: Optional[float] = None

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError(f"Solver tolerance must be positive, got {self.tol}")
        if self.max_restarts < 1:
            raise ValueError("max_restarts must be at least 1")
        if self.n_requested < 1:
            raise ValueError("n_requested must be at least 1")
        if self.initial_nev < 1 or self.max_nev < self.initial_nev:
            raise ValueError(f"Need 1 <= initial_nev <= max_nev, got {self.initial_nev} and {self.max_nev}")
        if self.krylov_dim is not None and self.krylov_dim < 3:
            raise ValueError("krylov_dim must be at least 3")
        if self.max_subinterval_width is not None and self.max_subinterval_width <= 0:
            raise ValueError("max_subinterval_width must be positive")

    def ncv_for(self, nev: int, dim: int) -> int:
        base = self.krylov_dim or max(40, 4 * nev)
        return int(min(dim, max(base, 2 * nev + 1, nev + 2)))


@dataclass(frozen=True)
class RitzPair:
    mu: complex
    phi: np.ndarray
    residual: float

    def sort_key(self) -> Tuple[float, float]:
        return (self.mu.real, self.mu.imag)


@dataclass
class SolveDiagnostics:
    method: str = ""
    shifts: List[complex] = field(default_factory=list)
    nev_history: List[int] = field(default_factory=list)
    subintervals: List[Tuple[float, float]] = field(default_factory=list)
    nudges: int = 0
    arnoldi_calls: int = 0
    restarts: int = 0
    dense_fallback: bool = False
    n_converged: int = 0
    max_residual: float = 0.0
    scale: float = 1.0
    elapsed_seconds: float = 0.0
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "shifts": [{"re": z.real, "im": z.imag} for z in self.shifts],
            "nev_history": list(self.nev_history),
            "subintervals": [[lo, hi] for lo, hi in self.subintervals],
            "nudges": self.nudges,
            "arnoldi_calls": self.arnoldi_calls,
            "restarts": self.restarts,
            "dense_fallback": self.dense_fallback,
            "n_converged": self.n_converged,
            "max_residual": self.max_residual,
            "scale": self.scale,
            "elapsed_seconds": self.elapsed_seconds,
            "notes": list(self.notes),
        }


def segment_distance(mu: complex, region: RegionSpec) -> float:
    """Distance from mu to the segment {x + i*s : a <= x <= b}"""
    mu = complex(mu)
    x = min(max(mu.real, region.a), region.b)
    return float(math.hypot(mu.real - x, mu.imag - region.s))


def refine_pair(operator: PerturbedOperator, mu: complex, phi: np.ndarray) -> RitzPair:
    """Normalize, replace mu by the Rayleigh quotient and measure the residual directly"""
    norm = np.linalg.norm(phi)
    if norm == 0.0:
        return RitzPair(mu=complex(mu), phi=phi, residual=float("inf"))
    unit = phi / norm
    image = operator.apply(unit)
    rq = complex(np.vdot(unit, image))
    residual = float(np.linalg.norm(image - rq * unit))
    return RitzPair(mu=rq, phi=unit, residual=residual)


def deduplicate_pairs(pairs: Sequence[RitzPair], scale: float = 1.0) -> List[RitzPair]:
    """Drop repeats (close eigenvalue and nearly parallel vector), keeping the smaller residual"""
    kept: List[RitzPair] = []
    for pair in sorted(pairs, key=RitzPair.sort_key):
        duplicate_of = None
        for idx, other in enumerate(kept):
            if abs(pair.mu - other.mu) <= DEDUPE_VALUE_TOL * scale and abs(np.vdot(other.phi, pair.phi)) >= DEDUPE_OVERLAP:
                duplicate_of = idx
                break
        if duplicate_of is None:
            kept.append(pair)
        elif pair.residual < kept[duplicate_of].residual:
            kept[duplicate_of] = pair
    return sorted(kept, key=RitzPair.sort_key)


class RegionEigensolver:
    """Eigenpairs of one perturbed operator, reusing work across calls"""

    def __init__(self, operator: PerturbedOperator, params: Optional[SolverParams] = None):
        self.operator = operator
        self.params = params or SolverParams()
        self.scale = operator.scale
        self.diagnostics = SolveDiagnostics(scale=self.scale)
        self._dense_pairs: Optional[List[RitzPair]] = None

    @property
    def dim(self) -> int:
        return self.operator.dim

    def _use_dense(self) -> bool:
        method = self.params.method
        if method is SolverMethod.DENSE:
            return True
        if method is SolverMethod.ARNOLDI:
            return self.dim < 4
        return self.dim <= self.params.dense_threshold

    def _start_vector(self) -> np.ndarray:
        rng = np.random.default_rng(self.params.seed)
        return rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)

    def dense_pairs(self) -> List[RitzPair]:
        """Every eigenpair of the dense materialization, refined"""
        if self._dense_pairs is None:
            if self.dim > self.params.dense_cap:
                raise DenseCapExceededError(self.dim, self.params.dense_cap)
            spectrum = self.operator.spectrum_dense(self.params.dense_cap)
            self._dense_pairs = [refine_pair(self.operator, mu, phi) for mu, phi in spectrum.pairs()]
            self.diagnostics.dense_fallback = True
            logger.info("dense spectrum of L(s) computed (n=%d)", self.dim)
        return self._dense_pairs

    def _workspace(self, center: complex, radius: float) -> Tuple[ShiftedSolveWorkspace, complex, float]:
        try:
            return ShiftedSolveWorkspace(self.operator, center), center, radius
        except SingularShiftError as err:
            nudge = SHIFT_NUDGE * max(radius, self.operator.s) * complex(1.0, 1.0) / math.sqrt(2.0)
            logger.warning("shift %s is singular (%s); nudging by %s", center, err.detail, nudge)
            self.diagnostics.nudges += 1
            shifted = center + nudge
            return ShiftedSolveWorkspace(self.operator, shifted), shifted, radius + abs(nudge)

    def _arnoldi(self, workspace: ShiftedSolveWorkspace, center: complex, nev: int) -> List[RitzPair]:
        ncv = self.params.ncv_for(nev, self.dim)
        self.diagnostics.arnoldi_calls += 1
        self.diagnostics.nev_history.append(nev)
        try:
            values, vectors = spla.eigs(self.operator.as_linear_operator(),
                                        k=nev,
                                        sigma=center,
                                        OPinv=workspace.as_linear_operator(),
                                        which="LM",
                                        ncv=ncv,
                                        tol=0,
                                        v0=self._start_vector(),
                                        maxiter=self.params.max_restarts)
        except spla.ArpackNoConvergence as err:
            partial = [refine_pair(self.operator, mu, err.eigenvectors[:, j])
                       for j, mu in enumerate(err.eigenvalues)]
            raise ConvergenceError(f"Arnoldi did not converge at shift {center} with nev={nev}",
                                   partial=partial,
                                   diagnostics=self.diagnostics,
                                   best_residual=min((p.residual for p in partial), default=None)) from err
        return [refine_pair(self.operator, mu, vectors[:, j]) for j, mu in enumerate(values)]

    def _owned(self, pairs: Sequence[RitzPair], lo: float, hi: float, closed_right: bool) -> List[RitzPair]:
        return [p for p in pairs
                if lo <= p.mu.real and (p.mu.real < hi or (closed_right and p.mu.real <= hi))]

    def _solve_interval(self, lo: float, hi: float, closed_right: bool, depth: int = 0) -> List[RitzPair]:
        """All eigenpairs with lo <= Re mu < hi (<= hi when closed_right)"""
        n = self.dim
        s = self.operator.s
        center = complex(0.5 * (lo + hi), s)
        radius = math.hypot(0.5 * (hi - lo), s)
        workspace, center, radius = self._workspace(center, radius)
        self.diagnostics.shifts.append(center)
        self.diagnostics.subintervals.append((lo, hi))

        nev = min(self.params.initial_nev, n - 2)
        while True:
            pairs = self._arnoldi(workspace, center, nev)
            farthest = max(abs(p.mu - center) for p in pairs)
            if farthest > radius:
                logger.debug("interval [%g, %g] complete with nev=%d", lo, hi, nev)
                return self._owned(pairs, lo, hi, closed_right)
            self.diagnostics.restarts += 1
            grown = 2 * nev
            if grown > self.params.max_nev:
                if depth >= MAX_BISECTION_DEPTH:
                    raise ConvergenceError(f"Eigenvalue cluster in [{lo}, {hi}] exceeds max_nev={self.params.max_nev}",
                                           partial=self._owned(pairs, lo, hi, closed_right),
                                           diagnostics=self.diagnostics)
                mid = 0.5 * (lo + hi)
                logger.info("bisecting [%g, %g] at %g", lo, hi, mid)
                return (self._solve_interval(lo, mid, False, depth + 1)
                        + self._solve_interval(mid, hi, closed_right, depth + 1))
            if grown >= n - 1:
                if n > self.params.dense_cap:
                    raise ConvergenceError(f"Region holds nearly all {n} eigenvalues; dense fallback exceeds cap",
                                           partial=self._owned(pairs, lo, hi, closed_right),
                                           diagnostics=self.diagnostics)
                self.diagnostics.notes.append(f"dense fallback for [{lo}, {hi}]")
                return self._owned(self.dense_pairs(), lo, hi, closed_right)
            logger.info("growing nev %d -> %d (farthest Ritz value %.3g inside radius %.3g)", nev, grown, farthest, radius)
            nev = grown

    def _partition(self, lo: float, hi: float) -> List[Tuple[float, float]]:
        width = self.params.max_subinterval_width
        if width is None or hi - lo <= width:
            return [(lo, hi)]
        count = int(math.ceil((hi - lo) / width))
        edges = np.linspace(lo, hi, count + 1)
        return [(float(edges[j]), float(edges[j + 1])) for j in range(count)]

    def collect_window(self, lo: float, hi: float) -> List[RitzPair]:
        """Every eigenpair with lo <= Re mu <= hi"""
        start = time.perf_counter()
        if self._use_dense():
            self.diagnostics.method = "dense"
            pairs = [p for p in self.dense_pairs() if lo <= p.mu.real <= hi]
        else:
            self.diagnostics.method = "arnoldi"
            pieces = self._partition(lo, hi)
            pairs = []
            for idx, (p_lo, p_hi) in enumerate(pieces):
                pairs.extend(self._solve_interval(p_lo, p_hi, closed_right=idx == len(pieces) - 1))
        pairs = deduplicate_pairs(pairs, self.scale)
        self._check_converged(pairs)
        self.diagnostics.elapsed_seconds += time.perf_counter() - start
        return pairs

    def _check_converged(self, pairs: Sequence[RitzPair]) -> None:
        bound = self.params.tol * self.scale
        self.diagnostics.n_converged = sum(1 for p in pairs if p.residual <= bound)
        self.diagnostics.max_residual = max((p.residual for p in pairs), default=0.0)
        unconverged = [p for p in pairs if p.residual > bound]
        if unconverged:
            raise ConvergenceError(f"{len(unconverged)} Ritz pairs exceed residual {bound:.3e}",
                                   partial=[p for p in pairs if p.residual <= bound],
                                   diagnostics=self.diagnostics,
                                   best_residual=min(p.residual for p in unconverged))

    def find_in_region(self, region: RegionSpec) -> List[RitzPair]:
        self._check_region(region)
        lo, hi = region.window
        slack = 10.0 * self.params.tol * self.scale
        pairs = [p for p in self.collect_window(lo, hi) if region.contains(p.mu, slack)]
        logger.info("%d eigenpairs of L(s) in region [%g, %g] + i*%g", len(pairs), region.a, region.b, region.s)
        return pairs

    def find_in_window(self, region: RegionSpec) -> List[RitzPair]:
        self._check_region(region)
        lo, hi = region.window
        return self.collect_window(lo, hi)

    def _check_region(self, region: RegionSpec) -> None:
        if not math.isclose(region.s, self.operator.s, rel_tol=1e-12, abs_tol=0.0):
            raise ValueError(f"Region s={region.s} does not match the operator's s={self.operator.s}")

    def find_largest_imag(self, k: int) -> List[RitzPair]:
        """The k eigenpairs with largest Im mu"""
        if k < 1:
            raise ValueError("k must be at least 1")
        n = self.dim
        if k > n:
            raise ValueError(f"Requested {k} eigenpairs of a {n}-dimensional operator")
        start = time.perf_counter()
        if self._use_dense() or k >= n - 1:
            self.diagnostics.method = "dense"
            pairs = self._top_imag(self.dense_pairs(), k)
        else:
            self.diagnostics.method = "arnoldi"
            pairs = self._largest_imag_arnoldi(k)
        pairs = sorted(pairs, key=RitzPair.sort_key)
        self._check_converged(pairs)
        self.diagnostics.elapsed_seconds += time.perf_counter() - start
        return pairs

    @staticmethod
    def _top_imag(pairs: Sequence[RitzPair], k: int) -> List[RitzPair]:
        return sorted(pairs, key=lambda p: (-p.mu.imag, p.mu.real))[:k]

    def _largest_imag_arnoldi(self, k: int) -> List[RitzPair]:
        """Grow the Ritz count past k until the top k converge; dense spectrum as the last resort"""
        n = self.dim
        bound = self.params.tol * self.scale
        nev = min(k + LARGEST_IMAG_PADDING, n - 2)
        while True:
            self.diagnostics.arnoldi_calls += 1
            self.diagnostics.nev_history.append(nev)
            try:
                values, vectors = spla.eigs(self.operator.as_linear_operator(),
                                            k=nev,
                                            which="LI",
                                            ncv=self.params.ncv_for(nev, n),
                                            tol=0,
                                            v0=self._start_vector(),
                                            maxiter=self.params.max_restarts)
                ranked = self._top_imag([refine_pair(self.operator, mu, vectors[:, j])
                                         for j, mu in enumerate(values)], k)
                if all(p.residual <= bound for p in ranked):
                    return ranked
                partial = [p for p in ranked if p.residual <= bound]
            except spla.ArpackNoConvergence as err:
                partial = [refine_pair(self.operator, mu, err.eigenvectors[:, j])
                           for j, mu in enumerate(err.eigenvalues)]
            grown = 2 * nev
            if grown >= n - 1 or grown > self.params.max_nev:
                if n <= self.params.dense_cap:
                    logger.info("largest-imaginary Arnoldi stalled at nev=%d; using the dense spectrum", nev)
                    self.diagnostics.notes.append(f"dense fallback for largest imaginary part (k={k})")
                    return self._top_imag(self.dense_pairs(), k)
                raise ConvergenceError(f"Arnoldi (largest imaginary part) did not converge for k={k}",
                                       partial=partial,
                                       diagnostics=self.diagnostics,
                                       best_residual=min((p.residual for p in partial), default=None))
            self.diagnostics.restarts += 1
            logger.info("largest imaginary part: growing nev %d -> %d", nev, grown)
            nev = grown


def find_in_region(operator: PerturbedOperator, region: RegionSpec,
                   params: Optional[SolverParams] = None) -> List[RitzPair]:
    return RegionEigensolver(operator, params).find_in_region(region)


def find_in_window(operator: PerturbedOperator, region: RegionSpec,
                   params: Optional[SolverParams] = None) -> List[RitzPair]:
    return RegionEigensolver(operator, params).find_in_window(region)


def find_largest_imag(operator: PerturbedOperator, k: int,
                      params: Optional[SolverParams] = None) -> List[RitzPair]:
    return RegionEigensolver(operator, params).find_largest_imag(k)


@dataclass
class InverseIterationResult:
    eigenvalue: float
    vector: np.ndarray
    residual: float
    shift: float
    history: List[float] = field(default_factory=list)


def _shift_factorization(op: HermitianOperator, shift: float) -> ShiftedFactorization:
    if op.matrix is None:
        return ShiftedFactorization(op.dim, shift, matvec=lambda v: op.apply(v) - shift * v)
    if sp.issparse(op.matrix):
        matrix = sp.csc_matrix(op.matrix, dtype=complex) - shift * sp.identity(op.dim, format="csc")
    else:
        matrix = np.asarray(op.matrix, dtype=complex) - shift * np.eye(op.dim)
    return ShiftedFactorization(op.dim, shift, matrix=matrix)


def _rayleigh(op: HermitianOperator, x: np.ndarray) -> Tuple[float, float]:
    image = op.apply(x)
    value = float(np.vdot(x, image).real)
    return value, float(np.linalg.norm(image - value * x))


def shifted_inverse_iteration(op: HermitianOperator,
                              shift: float,
                              guess: VectorLike,
                              steps: int = 1,
                              scale: Optional[float] = None) -> InverseIterationResult:
    """Inverse iteration on L with a fixed real shift, phase-aligned to the guess"""
    x = np.asarray(as_vector(guess, op.dim, "initial guess"), dtype=complex)
    norm = np.linalg.norm(x)
    if norm == 0.0:
        raise ValueError("Inverse iteration needs a nonzero initial guess")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    x = x / norm
    scale = scale if scale is not None else max(1.0, op.norm_estimate)

    used_shift = float(shift)
    factor = None
    if steps:
        try:
            factor = _shift_factorization(op, used_shift)
        except SingularShiftError:
            used_shift = used_shift + INVERSE_ITERATION_NUDGE * scale
            logger.warning("inverse iteration shift %g is singular; retrying at %g", shift, used_shift)
            factor = _shift_factorization(op, used_shift)

    value, residual = _rayleigh(op, x)
    history = [residual]
    for _ in range(steps):
        y = factor.solve(x)
        y_norm = np.linalg.norm(y)
        if not np.isfinite(y_norm) or y_norm == 0.0:
            raise SingularShiftError(used_shift, "inverse iteration produced a non-finite iterate")
        y = y / y_norm
        overlap = np.vdot(y, x)
        if abs(overlap) > 0.0:
            y = y * (overlap / abs(overlap))
        x = y
        value, residual = _rayleigh(op, x)
        history.append(residual)
    return InverseIterationResult(eigenvalue=value, vector=x, residual=residual, shift=used_shift, history=history)
