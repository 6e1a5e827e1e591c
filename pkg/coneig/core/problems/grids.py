"""
Grid Domains
Masked cell-centered grids on the box [-1, 1]^2, the Neumann finite-difference
Schrodinger operator and the probability current of a mode
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

from ..errors import DimensionMismatchError, DisconnectedDomainError
from ..linalg.linop import HermitianOperator

logger = logging.getLogger(__name__)

BOX = (-1.0, 1.0)


class Geometry(Enum):
    SQUARE = "square"
    DISK_WITH_HOLE = "disk_with_hole"
    HEX_ANNULUS = "hex_annulus"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Cell-centered grid; mask[row, col] marks the cells of the domain (row = y index)"""
    nx: int
    ny: int
    h: float
    mask: np.ndarray
    geometry: Geometry = Geometry.CUSTOM
    x0: float = BOX[0]
    y0: float = BOX[0]

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (self.ny, self.nx):
            raise ValueError(f"Mask shape {mask.shape} does not match grid ({self.ny}, {self.nx})")
        if self.h <= 0:
            raise ValueError(f"Grid spacing must be positive, got {self.h}")
        if not mask.any():
            raise DisconnectedDomainError("Domain mask has no active cells")
        _, components = ndimage.label(mask)
        if components != 1:
            raise DisconnectedDomainError(f"Active cells form {components} connected components, expected 1")
        index = np.full(mask.shape, -1, dtype=np.intp)
        index[mask] = np.arange(int(mask.sum()))
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "_index", index)

    @property
    def index(self) -> np.ndarray:
        """Vector coordinate of each cell, -1 outside the domain"""
        return self._index

    @property
    def n_active(self) -> int:
        return int(self.mask.sum())

    @property
    def area(self) -> float:
        return self.n_active * self.h ** 2

    @property
    def x_centers(self) -> np.ndarray:
        return self.x0 + (np.arange(self.nx) + 0.5) * self.h

    @property
    def y_centers(self) -> np.ndarray:
        return self.y0 + (np.arange(self.ny) + 0.5) * self.h

    def cell_grid(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x_centers, self.y_centers)

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """(x, y) of the active cells in vector order"""
        xx, yy = self.cell_grid()
        return xx[self.mask], yy[self.mask]

    def restrict(self, grid_values: np.ndarray) -> np.ndarray:
        values = np.asarray(grid_values)
        if values.shape != self.mask.shape:
            raise DimensionMismatchError(self.mask.size, values.size, "grid field")
        return values[self.mask]

    def to_grid(self, values: np.ndarray) -> np.ndarray:
        """Scatter a domain vector onto the full grid, NaN outside the domain"""
        values = np.asarray(values)
        if values.shape != (self.n_active,):
            raise DimensionMismatchError(self.n_active, values.size, "domain vector")
        grid = np.full(self.mask.shape, np.nan, dtype=np.result_type(values.dtype, float))
        grid[self.mask] = values
        return grid

    @classmethod
    def from_mask(cls, mask: np.ndarray, h: float, geometry: Geometry = Geometry.CUSTOM,
                  x0: float = BOX[0], y0: float = BOX[0]) -> "GridDomain":
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim == 1:
            mask = mask[None, :]
        return cls(nx=mask.shape[1], ny=mask.shape[0], h=h, mask=mask, geometry=geometry, x0=x0, y0=y0)

    @classmethod
    def _box(cls, n: int, geometry: Geometry, inside) -> "GridDomain":
        if n < 2:
            raise ValueError(f"Need at least 2 cells per side, got {n}")
        h = (BOX[1] - BOX[0]) / n
        centers = BOX[0] + (np.arange(n) + 0.5) * h
        xx, yy = np.meshgrid(centers, centers)
        return cls(nx=n, ny=n, h=h, mask=inside(xx, yy), geometry=geometry)

    @classmethod
    def square(cls, n: int) -> "GridDomain":
        return cls._box(n, Geometry.SQUARE, lambda x, y: np.ones_like(x, dtype=bool))

    @classmethod
    def disk_with_hole(cls, n: int, hole_center: Tuple[float, float] = (0.0, 0.5),
                       hole_radius: float = 0.2) -> "GridDomain":
        cx, cy = hole_center

        def inside(x, y):
            return (x ** 2 + y ** 2 <= 1.0) & ((x - cx) ** 2 + (y - cy) ** 2 > hole_radius ** 2)

        return cls._box(n, Geometry.DISK_WITH_HOLE, inside)

    @classmethod
    def hex_annulus(cls, n: int, outer: float = 1.0, inner: float = 0.5) -> "GridDomain":
        def inside(x, y):
            return in_hexagon(x, y, outer) & ~in_hexagon(x, y, inner)

        return cls._box(n, Geometry.HEX_ANNULUS, inside)


def in_hexagon(x: np.ndarray, y: np.ndarray, circumradius: float) -> np.ndarray:
    """Regular hexagon centered at the origin with vertices on the x-axis"""
    apothem = circumradius * np.sqrt(3.0) / 2.0
    inside = np.ones(np.shape(x), dtype=bool)
    for angle in (np.pi / 6, np.pi / 2, 5 * np.pi / 6):
        inside &= np.abs(x * np.cos(angle) + y * np.sin(angle)) <= apothem
    return inside


def _neighbor_pairs(domain: GridDomain) -> Tuple[np.ndarray, np.ndarray]:
    mask, index = domain.mask, domain.index
    horizontal = mask[:, :-1] & mask[:, 1:]
    vertical = mask[:-1, :] & mask[1:, :]
    first = np.concatenate([index[:, :-1][horizontal], index[:-1, :][vertical]])
    second = np.concatenate([index[:, 1:][horizontal], index[1:, :][vertical]])
    return first, second


def fd_operator(domain: GridDomain,
                potential: Optional[Union[np.ndarray, float]] = None,
                bc: str = "neumann",
                name: str = "") -> HermitianOperator:
    """5-point -Laplacian plus a diagonal potential; no flux across inactive or boundary edges"""
    if bc != "neumann":
        raise ValueError(f"Unsupported boundary condition {bc!r}; only 'neumann' is available")
    n = domain.n_active
    first, second = _neighbor_pairs(domain)
    degree = np.bincount(first, minlength=n) + np.bincount(second, minlength=n)
    rows = np.concatenate([np.arange(n), first, second])
    cols = np.concatenate([np.arange(n), second, first])
    data = np.concatenate([degree.astype(float), -np.ones(first.size), -np.ones(first.size)])
    laplacian = sp.csr_matrix((data, (rows, cols)), shape=(n, n)) / domain.h ** 2

    if potential is not None:
        values = np.asarray(potential, dtype=float)
        if values.ndim == 0:
            values = np.full(n, float(values))
        elif values.shape == domain.mask.shape:
            values = domain.restrict(values)
        elif values.shape != (n,):
            raise DimensionMismatchError(n, values.size, "potential")
        if not np.all(np.isfinite(values)):
            raise ValueError("Potential has non-finite values")
        laplacian = laplacian + sp.diags(values, format="csr")

    logger.info("assembled %s FD operator: %d cells, %d edges", domain.geometry.value, n, first.size)
    return HermitianOperator.from_matrix(sp.csr_matrix(laplacian), name=name or f"fd_{domain.geometry.value}", check=False)


@dataclass
class CurrentField:
    jx: np.ndarray
    jy: np.ndarray
    angular: np.ndarray
    density: np.ndarray

    def uniform_sign_fraction(self, sign: int = -1, rel_tol: float = 1e-8) -> float:
        """Share of cells (ignoring negligible ones) whose angular density has the given sign"""
        significant = np.abs(self.angular) > rel_tol * np.abs(self.angular).max()
        if not significant.any():
            return 0.0
        return float(np.mean(np.sign(self.angular[significant]) == sign))


def _gradient_axis(values: np.ndarray, mask: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Centered differences, one-sided where a neighbor is missing, zero for isolated cells"""
    grid = np.where(mask, values, 0)
    active = mask.astype(bool)
    forward = np.zeros_like(grid)
    backward = np.zeros_like(grid)
    has_next = np.zeros_like(active)
    has_prev = np.zeros_like(active)
    lead = [slice(None)] * 2
    trail = [slice(None)] * 2
    lead[axis] = slice(1, None)
    trail[axis] = slice(None, -1)
    lead, trail = tuple(lead), tuple(trail)

    forward[trail] = grid[lead]
    has_next[trail] = active[lead]
    backward[lead] = grid[trail]
    has_prev[lead] = active[trail]

    grad = np.zeros_like(grid)
    both = active & has_next & has_prev
    only_next = active & has_next & ~has_prev
    only_prev = active & has_prev & ~has_next
    grad[both] = (forward[both] - backward[both]) / (2 * h)
    grad[only_next] = (forward[only_next] - grid[only_next]) / h
    grad[only_prev] = (grid[only_prev] - backward[only_prev]) / h
    return grad


def probability_current(domain: GridDomain, phi: np.ndarray) -> CurrentField:
    """J = Im(conj(phi) grad phi) and the angular density x*J_y - y*J_x on active cells"""
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (domain.n_active,):
        raise DimensionMismatchError(domain.n_active, phi.size, "mode")
    grid = np.zeros(domain.mask.shape, dtype=complex)
    grid[domain.mask] = phi
    dphi_dx = _gradient_axis(grid, domain.mask, domain.h, axis=1)
    dphi_dy = _gradient_axis(grid, domain.mask, domain.h, axis=0)
    jx = np.imag(np.conj(grid) * dphi_dx)[domain.mask]
    jy = np.imag(np.conj(grid) * dphi_dy)[domain.mask]
    x, y = domain.coordinates()
    return CurrentField(jx=jx, jy=jy, angular=x * jy - y * jx, density=np.abs(phi) ** 2)
