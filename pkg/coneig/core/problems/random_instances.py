"""
Random Instances
Seeded Hermitian operators and projectors of every kind, for oracle sweeps
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from ..linalg.linop import HermitianOperator
from ..linalg.projectors import (
    GroupAction,
    OrthoProjector,
    complement,
    generate_group,
    group_average_projector,
    indicator_projector,
    localized_perturbation_projector,
    span_projector,
)
from .experiments import ConstrainedProblem

logger = logging.getLogger(__name__)

PROJECTOR_KINDS = ("indicator", "span", "localized", "group", "complement")


def random_hermitian(n: int,
                     rng: np.random.Generator,
                     real: bool = False,
                     sparse: bool = False,
                     density: float = 0.05) -> HermitianOperator:
    """GOE/GUE-like dense matrix, or a sparse one with a diagonal added for a spread spectrum"""
    if sparse:
        upper = sp.random(n, n, density=density, random_state=rng, format="csr")
        if not real:
            phases = sp.random(n, n, density=density, random_state=rng, format="csr")
            upper = upper + 1j * phases
        matrix = sp.triu(upper, k=1)
        matrix = matrix + matrix.conj().T + sp.diags(rng.standard_normal(n) * 2.0)
        return HermitianOperator.from_matrix(sp.csr_matrix(matrix), name=f"random_sparse_{n}")
    block = rng.standard_normal((n, n))
    if not real:
        block = block + 1j * rng.standard_normal((n, n))
    matrix = (block + block.conj().T) / (2.0 * np.sqrt(n))
    return HermitianOperator.from_matrix(matrix, name=f"random_dense_{n}")


def random_projector(kind: str,
                     n: int,
                     rng: np.random.Generator,
                     real: bool = True,
                     rank: int = 3) -> OrthoProjector:
    def vectors(count: int) -> np.ndarray:
        block = rng.standard_normal((n, count))
        if not real:
            block = block + 1j * rng.standard_normal((n, count))
        return block

    if kind == "indicator":
        mask = (rng.random(n) < 0.4).astype(float)
        mask[0] = 1.0
        return indicator_projector(mask, name="random indicator")
    if kind == "span":
        return span_projector(vectors(rank), name=f"random span rank {rank}")
    if kind == "localized":
        mask = np.zeros(n)
        mask[: max(1, n // 3)] = 1.0
        return localized_perturbation_projector(mask, vectors(min(2, rank)), name="random localized")
    if kind == "group":
        block = max(2, n // 4)
        # cyclic shift on the first block of indices, identity elsewhere
        perm = np.arange(n)
        perm[:block] = np.roll(perm[:block], -1)
        return group_average_projector(generate_group([GroupAction(perm=perm, phase=np.ones(n))]),
                                       name=f"cyclic average on {block} indices")
    if kind == "complement":
        return complement(span_projector(vectors(rank), name=f"random span rank {rank}"))
    raise ValueError(f"Unknown projector kind {kind!r}; expected one of {PROJECTOR_KINDS}")


def random_instance(seed: int,
                    n: int = 60,
                    kind: str = "span",
                    real: bool = True,
                    sparse: bool = False,
                    rank: int = 3) -> ConstrainedProblem:
    rng = np.random.default_rng(seed)
    operator = random_hermitian(n, rng, real=real, sparse=sparse)
    projector = random_projector(kind, n, rng, real=real, rank=rank)
    return ConstrainedProblem(name=f"random_{kind}_{seed}", operator=operator, projector=projector,
                              metadata={"seed": seed, "kind": kind, "real": real, "sparse": sparse})


def random_suite(count: int,
                 seed: int = 0,
                 n: int = 60,
                 kinds: Optional[Sequence[str]] = None) -> List[ConstrainedProblem]:
    """count instances cycling through projector kinds, alternating real and complex operators"""
    kinds = list(kinds or PROJECTOR_KINDS)
    suite = []
    for j in range(count):
        suite.append(random_instance(seed + j, n=n, kind=kinds[j % len(kinds)], real=(j // len(kinds)) % 2 == 0))
    logger.info("built %d random instances (n=%d)", count, n)
    return suite
