"""
Operator Primitives
Matrix-free self-adjoint operators, dense materialization, the dense
eigendecomposition oracle and orthonormalization
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ConvergenceError, DenseCapExceededError, DimensionMismatchError

logger = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 4096
DROP_TOL = 1e-10
HERMITIAN_CHECK_TOL = 1e-12

Matrix = Union[np.ndarray, sp.spmatrix]
VectorLike = Union[np.ndarray, Sequence[complex]]


class OperatorStructure(Enum):
    DENSE = "dense"
    SPARSE = "sparse"
    DIAGONAL = "diagonal"
    MATRIX_FREE = "matrix_free"


def as_vector(v: VectorLike, dim: Optional[int] = None, what: str = "vector") -> np.ndarray:
    """Coerce to a numpy array and check the leading dimension"""
    arr = np.asarray(v)
    if arr.ndim not in (1, 2):
        raise ValueError(f"Expected a vector or a block of column vectors, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatchError(dim, arr.shape[0], what)
    return arr


class HermitianOperator:
    """Self-adjoint linear map on C^n.

    Matrix-backed operators (dense, sparse, diagonal) keep their matrix so that
    shifted systems can be factored; matrix-free operators only expose
    ``apply`` and fall back to iterative solves.
    """

    def __init__(self,
                 dim: int,
                 matvec: Callable[[np.ndarray], np.ndarray],
                 structure: OperatorStructure,
                 is_real: bool,
                 matrix: Optional[Matrix] = None,
                 diagonal: Optional[np.ndarray] = None,
                 name: str = ""):
        if dim <= 0:
            raise ValueError(f"Operator dimension must be positive, got {dim}")
        self.dim = int(dim)
        self._matvec = matvec
        self.structure = structure
        self.is_real = bool(is_real)
        self.name = name or structure.value
        self._matrix = matrix
        self._diagonal = diagonal

    @classmethod
    def from_matrix(cls, matrix: Matrix, name: str = "", check: bool = True) -> "HermitianOperator":
        """Wrap a dense or sparse Hermitian matrix"""
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"Operator matrix must be square, got shape {matrix.shape}")
        if sp.issparse(matrix):
            mat = sp.csr_matrix(matrix)
            structure = OperatorStructure.SPARSE
            is_real = not np.iscomplexobj(mat.data) or not np.any(mat.data.imag)
            if check:
                defect = abs(mat - mat.conj().T).max() if mat.nnz else 0.0
                scale = max(1.0, abs(mat).max() if mat.nnz else 0.0)
                if defect > HERMITIAN_CHECK_TOL * scale:
                    raise ValueError(f"Sparse operator is not Hermitian (defect {defect:.3e})")
        else:
            mat = np.asarray(matrix)
            structure = OperatorStructure.DENSE
            is_real = not np.iscomplexobj(mat) or not np.any(mat.imag)
            if check:
                if not np.all(np.isfinite(mat)):
                    raise ValueError("Operator matrix has non-finite entries")
                defect = np.abs(mat - mat.conj().T).max()
                scale = max(1.0, np.abs(mat).max())
                if defect > HERMITIAN_CHECK_TOL * scale:
                    raise ValueError(f"Dense operator is not Hermitian (defect {defect:.3e})")
        if is_real and np.iscomplexobj(mat):
            mat = mat.real
        return cls(dim=mat.shape[0],
                   matvec=lambda v: mat @ v,
                   structure=structure,
                   is_real=is_real,
                   matrix=mat,
                   name=name)

    @classmethod
    def from_diagonal(cls, values: VectorLike, name: str = "") -> "HermitianOperator":
        diag = np.asarray(values)
        if diag.ndim != 1:
            raise ValueError("Diagonal must be one-dimensional")
        if np.iscomplexobj(diag):
            if np.any(np.abs(diag.imag) > 0):
                raise ValueError("Diagonal of a Hermitian operator must be real")
            diag = diag.real
        diag = diag.astype(float)

        def matvec(v: np.ndarray) -> np.ndarray:
            return diag[:, None] * v if v.ndim == 2 else diag * v

        return cls(dim=diag.size,
                   matvec=matvec,
                   structure=OperatorStructure.DIAGONAL,
                   is_real=True,
                   matrix=sp.diags(diag, format="csr"),
                   diagonal=diag,
                   name=name)

    @classmethod
    def from_callable(cls,
                      dim: int,
                      matvec: Callable[[np.ndarray], np.ndarray],
                      is_real: bool = False,
                      name: str = "") -> "HermitianOperator":
        """Matrix-free operator; ``matvec`` only has to handle single vectors"""
        return cls(dim=dim,
                   matvec=matvec,
                   structure=OperatorStructure.MATRIX_FREE,
                   is_real=is_real,
                   name=name)

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls.from_diagonal(np.ones(dim), name="identity")

    @property
    def matrix(self) -> Optional[Matrix]:
        return self._matrix

    @property
    def diagonal(self) -> Optional[np.ndarray]:
        return self._diagonal

    @property
    def can_factor(self) -> bool:
        return self._matrix is not None

    def apply(self, v: VectorLike) -> np.ndarray:
        arr = as_vector(v, self.dim)
        if arr.ndim == 2 and self.structure is OperatorStructure.MATRIX_FREE:
            return np.column_stack([self._matvec(arr[:, j]) for j in range(arr.shape[1])])
        return np.asarray(self._matvec(arr))

    def __matmul__(self, v: VectorLike) -> np.ndarray:
        return self.apply(v)

    def as_linear_operator(self, dtype=complex) -> spla.LinearOperator:
        return spla.LinearOperator((self.dim, self.dim), matvec=self.apply, rmatvec=self.apply, dtype=dtype)

    @cached_property
    def norm_estimate(self) -> float:
        """Upper bound on the spectral norm (exact inf-norm for matrix forms)"""
        if self._diagonal is not None:
            return float(np.abs(self._diagonal).max())
        if self._matrix is not None:
            if sp.issparse(self._matrix):
                return float(abs(self._matrix).sum(axis=1).max()) if self._matrix.nnz else 0.0
            return float(np.abs(self._matrix).sum(axis=1).max())
        # power iteration for the matrix-free case
        rng = np.random.default_rng(0)
        x = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        x /= np.linalg.norm(x)
        estimate = 0.0
        for _ in range(50):
            y = self.apply(x)
            ny = np.linalg.norm(y)
            if ny == 0.0:
                return 0.0
            estimate = ny
            x = y / ny
        return float(1.05 * estimate)

    def __repr__(self) -> str:
        return f"HermitianOperator(name={self.name!r}, dim={self.dim}, structure={self.structure.value}, is_real={self.is_real})"


@dataclass(frozen=True)
class DenseSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual_bound: float
    hermitian: bool

    def __len__(self) -> int:
        return self.eigenvalues.size

    def pairs(self) -> Iterator[Tuple[complex, np.ndarray]]:
        for j in range(self.eigenvalues.size):
            yield self.eigenvalues[j], self.eigenvectors[:, j]

    def distance_to(self, z: complex) -> float:
        """Distance from ``z`` to the spectrum"""
        return float(np.min(np.abs(self.eigenvalues - z)))


def apply(op: HermitianOperator, v: VectorLike) -> np.ndarray:
    return op.apply(v)


def dense_materialize(op: HermitianOperator, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Column j of the result is ``op`` applied to e_j"""
    if op.dim > cap:
        raise DenseCapExceededError(op.dim, cap)
    if op.matrix is not None:
        return op.matrix.toarray() if sp.issparse(op.matrix) else np.array(op.matrix)
    return op.apply(np.eye(op.dim, dtype=complex))


def dense_eig(matrix: np.ndarray, hermitian: bool, cap: int = DEFAULT_DENSE_CAP) -> DenseSpectrum:
    """Full eigendecomposition, sorted by (Re, Im), with unit eigenvectors"""
    mat = np.asarray(matrix)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"dense_eig expects a square matrix, got shape {mat.shape}")
    if mat.shape[0] > cap:
        raise DenseCapExceededError(mat.shape[0], cap)
    if not np.all(np.isfinite(mat)):
        raise ValueError("dense_eig: matrix has non-finite entries")

    try:
        if hermitian:
            values, vectors = sla.eigh(mat)
        else:
            values, vectors = sla.eig(mat)
            vectors = vectors / np.linalg.norm(vectors, axis=0)
    except (sla.LinAlgError, ValueError) as err:
        residual = float(np.linalg.norm(mat)) if mat.size else 0.0
        raise ConvergenceError(f"Dense eigensolver failed: {err}", best_residual=residual) from err

    order = np.lexsort((np.imag(values), np.real(values)))
    values = values[order]
    vectors = vectors[:, order]
    residuals = np.linalg.norm(mat @ vectors - vectors * values, axis=0) if values.size else np.zeros(0)
    return DenseSpectrum(eigenvalues=values,
                         eigenvectors=vectors,
                         residual_bound=float(residuals.max()) if residuals.size else 0.0,
                         hermitian=hermitian)


def _as_columns(vectors: Union[np.ndarray, Sequence[VectorLike]]) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return vectors[:, None] if vectors.ndim == 1 else vectors
    if len(vectors) == 0:
        raise ValueError("orthonormalize needs at least one vector")
    dims = {np.asarray(v).shape for v in vectors}
    if len(dims) != 1:
        raise ValueError(f"All vectors must have the same shape, got {sorted(dims)}")
    return np.column_stack([np.asarray(v) for v in vectors])


def orthonormalize(vectors: Union[np.ndarray, Sequence[VectorLike]],
                   drop_tol: float = DROP_TOL) -> Tuple[np.ndarray, int]:
    """Orthonormal basis of the column span by rank-revealing (pivoted) QR.

    Directions whose R diagonal falls below ``drop_tol`` times the largest
    input norm are dropped. Each column is phased so its largest entry is
    real and positive; real input stays real.
    """
    columns = _as_columns(vectors)
    if columns.shape[1] == 0:
        raise ValueError("orthonormalize needs at least one vector")
    dtype = np.result_type(columns.dtype, float)
    norms = np.linalg.norm(columns, axis=0)
    largest = norms.max()
    if largest == 0.0:
        raise ValueError("orthonormalize: all input vectors are zero")

    q, r, _ = sla.qr(columns.astype(dtype, copy=False), mode="economic", pivoting=True)
    rank = int(np.count_nonzero(np.abs(np.diag(r)) > drop_tol * largest))
    basis = q[:, :rank]
    lead = basis[np.argmax(np.abs(basis), axis=0), np.arange(rank)]
    basis = basis * (lead.conj() / np.abs(lead))
    if rank < columns.shape[1]:
        logger.debug("orthonormalize dropped %d of %d dependent vectors", columns.shape[1] - rank, columns.shape[1])
    return np.ascontiguousarray(basis), rank


def random_complex_vector(dim: int, rng: np.random.Generator, count: Optional[int] = None) -> np.ndarray:
    shape = (dim,) if count is None else (dim, count)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def check_self_adjoint(op: HermitianOperator, trials: int = 100, seed: int = 0) -> float:
    """Largest relative defect |<Lu,v> - <u,Lv>| / (|u||v| max(1,|L|)) over random pairs"""
    rng = np.random.default_rng(seed)
    scale = max(1.0, op.norm_estimate)
    worst = 0.0
    for _ in range(trials):
        u = random_complex_vector(op.dim, rng)
        v = random_complex_vector(op.dim, rng)
        defect = abs(np.vdot(op.apply(u), v) - np.vdot(u, op.apply(v)))
        worst = max(worst, defect / (np.linalg.norm(u) * np.linalg.norm(v) * scale))
    return float(worst)
