"""
Zernike Functions
Z_n^m(r, theta) = R_n^|m|(r) exp(i m theta) sampled on a grid domain and
orthonormalized there
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from ..linalg.linop import orthonormalize
from ..linalg.projectors import OrthoProjector, span_projector
from .grids import GridDomain

logger = logging.getLogger(__name__)

MFilter = Callable[[int], bool]
DISK_TOLERANCE = 1e-12
ORIENTATION_TOL = 1e-9


def radial_polynomial(n: int, m: int, r: np.ndarray) -> np.ndarray:
    """R_n^|m| by the explicit factorial sum; zero when n - |m| is odd"""
    m = abs(m)
    if m > n or (n - m) % 2:
        return np.zeros_like(np.asarray(r, dtype=float))
    r = np.asarray(r, dtype=float)
    total = np.zeros_like(r)
    for k in range((n - m) // 2 + 1):
        coeff = ((-1) ** k * math.factorial(n - k)
                 / (math.factorial(k) * math.factorial((n + m) // 2 - k) * math.factorial((n - m) // 2 - k)))
        total = total + coeff * r ** (n - 2 * k)
    return total


def zernike_function(n: int, m: int, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return radial_polynomial(n, m, r) * np.exp(1j * m * np.asarray(theta))


def zernike_indices(n_max: int, m_filter: Optional[MFilter] = None) -> List[Tuple[int, int]]:
    """(n, m) with |m| <= n <= n_max and n - |m| even, ordered by n then m"""
    if n_max < 0:
        raise ValueError(f"n_max must be nonnegative, got {n_max}")
    keep = m_filter or (lambda m: True)
    return [(n, m) for n in range(n_max + 1) for m in range(-n, n + 1, 2) if keep(m)]


def analytic_disk_norm(n: int, m: int) -> float:
    """Squared L2 norm of Z_n^m over the unit disk"""
    return math.pi / (n + 1)


@dataclass
class ZernikeBasis:
    n_max: int
    indices: List[Tuple[int, int]]
    samples: np.ndarray
    columns: np.ndarray
    rank: int
    filter_label: str = "all"
    normalization: dict = field(default_factory=dict)

    def projector(self) -> OrthoProjector:
        return span_projector(self.columns, name=f"zernike(n<={self.n_max}, {self.filter_label})")

    def oriented_projector(self, tol: float = ORIENTATION_TOL) -> OrthoProjector:
        """Projector onto the part of span + conj(span) where this span outweighs its conjugate.

        The result is orthogonal to its own complex conjugate, so a real
        vector never has more than half its squared norm inside it.
        """
        columns = oriented_columns(self.columns, self.columns.conj(), tol)
        return span_projector(columns, name=f"zernike(n<={self.n_max}, {self.filter_label}, oriented)")


def oriented_columns(primary: np.ndarray, rival: np.ndarray, tol: float = ORIENTATION_TOL) -> np.ndarray:
    """Positive eigenspace of P P^H - R R^H on the joint span of two orthonormal column sets"""
    joint, _ = orthonormalize(np.hstack([primary, rival]))
    a = joint.conj().T @ primary
    b = joint.conj().T @ rival
    values, vectors = sla.eigh(a @ a.conj().T - b @ b.conj().T)
    keep = values > tol
    if not np.any(keep):
        raise ValueError("The primary span has no direction that outweighs the rival span")
    logger.debug("oriented span: kept %d of %d directions, smallest weight %.3g",
                 int(keep.sum()), values.size, values[keep].min())
    return joint @ vectors[:, keep]


def zernike_basis(domain: GridDomain,
                  n_max: int,
                  m_filter: Optional[MFilter] = None,
                  filter_label: str = "all") -> ZernikeBasis:
    """Sample the filtered Zernike functions at active cell centers and orthonormalize on the domain"""
    indices = zernike_indices(n_max, m_filter)
    if not indices:
        raise ValueError(f"No Zernike functions with n <= {n_max} pass the filter {filter_label!r}")
    x, y = domain.coordinates()
    r = np.hypot(x, y)
    if r.max() > 1.0 + DISK_TOLERANCE:
        raise ValueError(f"Domain is not inscribed in the unit disk (max radius {r.max():.4f})")
    theta = np.arctan2(y, x)
    samples = np.column_stack([zernike_function(n, m, r, theta) for n, m in indices])
    columns, rank = orthonormalize(samples)
    if rank < len(indices):
        logger.warning("Zernike basis lost %d of %d functions to dependence on the domain", len(indices) - rank, len(indices))
    normalization = {
        "convention": "orthonormalized on the domain",
        "disk_norm_fraction": domain.area / math.pi,
        "analytic_disk_norms": [analytic_disk_norm(n, m) for n, m in indices],
    }
    logger.info("Zernike basis: %d functions (n <= %d, %s), rank %d", len(indices), n_max, filter_label, rank)
    return ZernikeBasis(n_max=n_max, indices=indices, samples=samples, columns=columns, rank=rank,
                        filter_label=filter_label, normalization=normalization)


def m_multiple_of(k: int) -> MFilter:
    return lambda m: m % k == 0


def m_at_most(bound: int) -> MFilter:
    return lambda m: m <= bound
