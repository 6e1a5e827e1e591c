"""
Experiment Builders
Operators, target subspaces and search settings for the localized square
well, the five-fold symmetric disk, the hexagonal annulus and a diagonal demo
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Optional

import numpy as np

from ..linalg.linop import HermitianOperator
from ..linalg.projectors import OrthoProjector, indicator_projector, localized_perturbation_projector
from ..solvers.eigensolve import RegionSpec
from ..solvers.pipeline import CandidateScope, SearchSpec
from .grids import GridDomain, fd_operator
from .zernike import m_at_most, m_multiple_of, zernike_basis

logger = logging.getLogger(__name__)

DEFAULT_S = 0.1
WELL_DEPTH = 18.0 * math.pi ** 2


def delta_from_tau2(tau2_threshold: float) -> float:
    if not 0.0 <= tau2_threshold < 1.0:
        raise ValueError(f"tau^2 threshold must lie in [0, 1), got {tau2_threshold}")
    return math.sqrt(1.0 - tau2_threshold)


@dataclass
class ConstrainedProblem:
    """Operator, projector and default search settings; unpacks as (operator, projector, spec)"""
    name: str
    operator: HermitianOperator
    projector: OrthoProjector
    spec: Optional[SearchSpec] = None
    domain: Optional[GridDomain] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __iter__(self) -> Iterator[Any]:
        return iter((self.operator, self.projector, self.spec))

    def describe(self) -> Dict[str, Any]:
        return {"name": self.name,
                "dim": self.operator.dim,
                "operator": self.operator.name,
                "projector": self.projector.name,
                "projector_kind": self.projector.kind.value,
                "projector_rank": self.projector.rank,
                **self.metadata}


def square_well_problem(n_per_side: int = 129,
                        depth: float = WELL_DEPTH,
                        s: float = DEFAULT_S,
                        tau2_threshold: float = 0.9,
                        a: float = -180.0,
                        b: float = 30.0) -> ConstrainedProblem:
    """-Laplacian on (-1,1)^2 with a well of the given depth on (-1/2,1/2)^2; W = constant outside the well"""
    if n_per_side < 33:
        raise ValueError(f"square_well_problem needs n_per_side >= 33, got {n_per_side}")
    domain = GridDomain.square(n_per_side)
    xx, yy = domain.cell_grid()
    well = (np.abs(xx) < 0.5) & (np.abs(yy) < 0.5)
    operator = fd_operator(domain, potential=np.where(well, -depth, 0.0), name="square_well")
    mask_k = domain.restrict(well).astype(float)
    projector = localized_perturbation_projector(mask_k, np.ones(domain.n_active), name="constant outside the well")
    spec = SearchSpec(region=RegionSpec(a=a, b=b, s=s, delta_star=delta_from_tau2(tau2_threshold)),
                      scope=CandidateScope.WINDOW)
    return ConstrainedProblem(name="square_well", operator=operator, projector=projector, spec=spec, domain=domain,
                              metadata={"n_per_side": n_per_side, "depth": depth, "well_cells": int(mask_k.sum())})


def c5_symmetry_problem(n_grid: int = 129,
                        n_max: int = 15,
                        s: float = DEFAULT_S,
                        tau2_threshold: float = 0.9,
                        a: float = -1.0,
                        b: float = 260.0) -> ConstrainedProblem:
    """Neumann Laplacian on the unit disk minus a small off-center disk; W = five-fold symmetric Zernike span"""
    if n_grid < 65:
        raise ValueError(f"c5_symmetry_problem needs n_grid >= 65, got {n_grid}")
    domain = GridDomain.disk_with_hole(n_grid)
    operator = fd_operator(domain, name="disk_with_hole")
    basis = zernike_basis(domain, n_max, m_multiple_of(5), filter_label="m % 5 == 0")
    spec = SearchSpec(region=RegionSpec(a=a, b=b, s=s, delta_star=delta_from_tau2(tau2_threshold)),
                      scope=CandidateScope.WINDOW)
    return ConstrainedProblem(name="c5_symmetry", operator=operator, projector=basis.projector(), spec=spec,
                              domain=domain,
                              metadata={"n_grid": n_grid, "zernike_functions": len(basis.indices),
                                        "zernike_rank": basis.rank, **basis.normalization})


def hex_annulus_problem(n_grid: int = 129,
                        n_max: int = 8,
                        s: float = DEFAULT_S,
                        tau2_threshold: float = 0.55,
                        a: float = -1.0,
                        b: float = 150.0) -> ConstrainedProblem:
    """Neumann Laplacian on a hexagonal annulus; W = clockwise-dominant part of the m != 0 Zernike span.

    Degenerate pairs are ordered by imaginary part, so the clockwise member of
    each rotating pair comes second.
    """
    if n_grid < 65:
        raise ValueError(f"hex_annulus_problem needs n_grid >= 65, got {n_grid}")
    domain = GridDomain.hex_annulus(n_grid)
    operator = fd_operator(domain, name="hex_annulus")
    basis = zernike_basis(domain, n_max, m_at_most(-1), filter_label="m <= -1")
    projector = basis.oriented_projector()
    spec = SearchSpec(region=RegionSpec(a=a, b=b, s=s, delta_star=delta_from_tau2(tau2_threshold)),
                      rescale_real=False,
                      scope=CandidateScope.WINDOW,
                      cluster_width=s)
    return ConstrainedProblem(name="hex_annulus", operator=operator, projector=projector, spec=spec,
                              domain=domain,
                              metadata={"n_grid": n_grid, "zernike_functions": len(basis.indices),
                                        "zernike_rank": basis.rank, "oriented_rank": projector.rank,
                                        **basis.normalization})


def diag_demo() -> ConstrainedProblem:
    operator = HermitianOperator.from_diagonal([1.0, 2.0, 3.0], name="diag(1,2,3)")
    projector = indicator_projector([1, 1, 0], name="first two coordinates")
    spec = SearchSpec(region=RegionSpec(a=0.5, b=2.5, s=DEFAULT_S, delta_star=0.3))
    return ConstrainedProblem(name="diag_demo", operator=operator, projector=projector, spec=spec)
