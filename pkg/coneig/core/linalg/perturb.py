"""
Perturbed Operator
L(s) = L + i*s*Q with shifted solves through a sparse-plus-low-rank
(Woodbury) splitting
"""

import inspect
import logging
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import DenseCapExceededError, DimensionMismatchError, FactorizationError, SingularShiftError
from .linop import DEFAULT_DENSE_CAP, DenseSpectrum, HermitianOperator, VectorLike, as_vector, dense_eig, dense_materialize
from .projectors import OrthoProjector

logger = logging.getLogger(__name__)

DEFAULT_S = 0.1
SINGULAR_COND = 1e14
SINGULAR_PIVOT = 1e-14
SOLVE_RESIDUAL_TOL = 1e-9
GMRES_TOL = 1e-12

# scipy renamed gmres(tol=...) to rtol
_GMRES_TOL_KW = "rtol" if "rtol" in inspect.signature(spla.gmres).parameters else "tol"


class ShiftedFactorization:
    """Solver for one shifted matrix: LU when a matrix is available, GMRES otherwise"""

    def __init__(self,
                 dim: int,
                 shift: complex,
                 matrix=None,
                 matvec: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self.dim = dim
        self.shift = shift
        self._matvec = matvec
        self._dense_lu = None
        self._sparse_lu = None
        if matrix is None:
            if matvec is None:
                raise FactorizationError("Shifted solve needs either a matrix or a matvec")
            self.method = "gmres"
        elif sp.issparse(matrix):
            self.method = "splu"
            self._factor_sparse(sp.csc_matrix(matrix, dtype=complex))
        else:
            self.method = "lu"
            self._factor_dense(np.asarray(matrix, dtype=complex))

    def _factor_sparse(self, matrix: sp.csc_matrix) -> None:
        try:
            lu = spla.splu(matrix)
        except RuntimeError as err:
            raise SingularShiftError(self.shift, str(err)) from err
        pivots = np.abs(lu.U.diagonal())
        if pivots.size and pivots.min() <= SINGULAR_PIVOT * pivots.max():
            raise SingularShiftError(self.shift, "zero pivot in sparse LU")
        self._sparse_lu = lu

    def _factor_dense(self, matrix: np.ndarray) -> None:
        try:
            lu, piv = sla.lu_factor(matrix, check_finite=True)
        except (ValueError, sla.LinAlgError) as err:
            raise FactorizationError(f"Dense LU failed at shift {self.shift}: {err}") from err
        pivots = np.abs(np.diag(lu))
        if pivots.size and pivots.min() <= SINGULAR_PIVOT * pivots.max():
            raise SingularShiftError(self.shift, "zero pivot in dense LU")
        self._dense_lu = (lu, piv)

    def _gmres(self, b: np.ndarray) -> np.ndarray:
        op = spla.LinearOperator((self.dim, self.dim), matvec=self._matvec, dtype=complex)
        kwargs = {_GMRES_TOL_KW: GMRES_TOL, "atol": 0.0}
        x, info = spla.gmres(op, b, restart=min(self.dim, 60), maxiter=max(20, self.dim), **kwargs)
        if info != 0:
            raise FactorizationError(f"GMRES did not converge at shift {self.shift} (info={info})")
        return x

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=complex)
        if self._sparse_lu is not None:
            return self._sparse_lu.solve(b)
        if self._dense_lu is not None:
            return sla.lu_solve(self._dense_lu, b)
        if b.ndim == 2:
            return np.column_stack([self._gmres(b[:, j]) for j in range(b.shape[1])])
        return self._gmres(b)


class PerturbedOperator:
    """The pair (L, Q) with perturbation strength s"""

    def __init__(self, base: HermitianOperator, projector: OrthoProjector, s: float = DEFAULT_S):
        if base.dim != projector.dim:
            raise DimensionMismatchError(base.dim, projector.dim, "projector")
        if not np.isfinite(s) or s < 0:
            raise ValueError(f"Perturbation strength must be finite and nonnegative, got {s}")
        self.base = base
        self.projector = projector
        self.s = float(s)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def scale(self) -> float:
        return max(1.0, self.base.norm_estimate + self.s)

    def apply(self, v: VectorLike) -> np.ndarray:
        arr = as_vector(v, self.dim)
        return self.base.apply(arr) + 1j * self.s * self.projector.apply(arr)

    def __matmul__(self, v: VectorLike) -> np.ndarray:
        return self.apply(v)

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator((self.dim, self.dim), matvec=self.apply, dtype=complex)

    def shifted_solver(self, sigma: complex) -> "ShiftedSolveWorkspace":
        return ShiftedSolveWorkspace(self, sigma)

    def shifted_solve(self, sigma: complex, b: VectorLike) -> np.ndarray:
        return self.shifted_solver(sigma).solve(b)

    def materialize(self, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
        if self.dim > cap:
            raise DenseCapExceededError(self.dim, cap)
        dense_l = dense_materialize(self.base, cap).astype(complex)
        dense_q = self.projector.apply(np.eye(self.dim))
        return dense_l + 1j * self.s * dense_q

    def spectrum_dense(self, cap: int = DEFAULT_DENSE_CAP) -> DenseSpectrum:
        if self.s == 0.0:
            return dense_eig(dense_materialize(self.base, cap), hermitian=True, cap=cap)
        return dense_eig(self.materialize(cap), hermitian=False, cap=cap)

    def __repr__(self) -> str:
        return f"PerturbedOperator(L={self.base.name!r}, Q={self.projector.name!r}, s={self.s})"


class ShiftedSolveWorkspace:
    """Solves (L(s) - sigma) x = b for one shift sigma.

    The sparse part A = L + i*s*(mask + sparse part of Q) - sigma is factored
    once. The low-rank part i*s*U W U^H enters through the k x k capacitance
    matrix C = I + i*s*W U^H A^{-1} U, so x = y - Z w with y = A^{-1} b,
    Z = A^{-1} U and C w = i*s*W U^H y.
    """

    def __init__(self, operator: PerturbedOperator, sigma: complex, refine: bool = True):
        self.operator = operator
        self.sigma = complex(sigma)
        self.refine = refine
        structure = operator.projector.structure
        base = operator.base
        s = operator.s
        self.factor = structure.factor
        self.weights = structure.weights

        if base.can_factor:
            self._low_rank = structure.rank > 0
            sparse_q = structure.diagonal_sparse()
            if sp.issparse(base.matrix):
                matrix = sp.csc_matrix(base.matrix, dtype=complex) - self.sigma * sp.identity(base.dim, format="csc")
                if sparse_q is not None:
                    matrix = matrix + 1j * s * sparse_q
            else:
                matrix = np.asarray(base.matrix, dtype=complex) - self.sigma * np.eye(base.dim)
                if sparse_q is not None:
                    matrix = matrix + 1j * s * sparse_q.toarray()
            self._solver = ShiftedFactorization(base.dim, self.sigma, matrix=matrix)
        else:
            # no matrix to factor: iterate on the full shifted operator
            self._low_rank = False
            self._solver = ShiftedFactorization(base.dim, self.sigma,
                                                matvec=lambda v: operator.apply(v) - self.sigma * v)

        self.capacitance = None
        if self._low_rank:
            self._z = self._solver.solve(self.factor.astype(complex))
            k = structure.rank
            self.capacitance = np.eye(k) + 1j * s * (self.weights[:, None] * (self.factor.conj().T @ self._z))
            singular_values = np.linalg.svd(self.capacitance, compute_uv=False)
            smallest, largest = singular_values.min(), singular_values.max()
            if not np.isfinite(largest) or smallest <= SINGULAR_PIVOT * max(1.0, largest) or largest > SINGULAR_COND * smallest:
                raise SingularShiftError(self.sigma, f"capacitance is singular (sigma_min={smallest:.3e})")
        logger.debug("shifted workspace at sigma=%s via %s (rank %d)", self.sigma, self._solver.method, self.rank)

    @property
    def rank(self) -> int:
        return self.factor.shape[1] if self._low_rank else 0

    @property
    def method(self) -> str:
        return self._solver.method

    def _solve_once(self, b: np.ndarray) -> np.ndarray:
        y = self._solver.solve(b)
        if not self._low_rank:
            return y
        s = self.operator.s
        rhs = self.factor.conj().T @ y
        rhs = 1j * s * (self.weights[:, None] * rhs if y.ndim == 2 else self.weights * rhs)
        w = np.linalg.solve(self.capacitance, rhs)
        return y - self._z @ w

    def residual(self, x: np.ndarray, b: np.ndarray) -> np.ndarray:
        return b - (self.operator.apply(x) - self.sigma * x)

    def solve(self, b: VectorLike) -> np.ndarray:
        rhs = np.asarray(as_vector(b, self.operator.dim, "right-hand side"), dtype=complex)
        x = self._solve_once(rhs)
        r = self.residual(x, rhs)
        if self.refine:
            x = x + self._solve_once(r)
            r = self.residual(x, rhs)
        res = np.linalg.norm(r, axis=0)
        bound = SOLVE_RESIDUAL_TOL * np.linalg.norm(rhs, axis=0)
        if np.any(res > bound):
            raise SingularShiftError(self.sigma, f"solve residual {np.max(res):.3e} exceeds {np.max(bound):.3e}")
        return x

    def as_linear_operator(self) -> spla.LinearOperator:
        n = self.operator.dim
        return spla.LinearOperator((n, n), matvec=self.solve, dtype=complex)


def apply_perturbed(operator: PerturbedOperator, v: VectorLike) -> np.ndarray:
    return operator.apply(v)


def shifted_solve(operator: PerturbedOperator, sigma: complex, b: VectorLike) -> np.ndarray:
    return operator.shifted_solve(sigma, b)


def spectrum_dense(operator: PerturbedOperator, cap: int = DEFAULT_DENSE_CAP) -> DenseSpectrum:
    return operator.spectrum_dense(cap)
