"""
Orthogonal Projectors
Projectors Q onto the target subspace W, with the mask / sparse / low-rank
split that shifted solves rely on
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionMismatchError, ProjectorError
from .linop import HermitianOperator, VectorLike, as_vector, orthonormalize, random_complex_vector

logger = logging.getLogger(__name__)

EXTERIOR_NORM_TOL = 1e-12
PHASE_TOL = 1e-12
PHASE_DECIMALS = 9


class ProjectorKind(Enum):
    INDICATOR = "indicator"
    SPAN = "span"
    INDICATOR_PLUS_SPAN = "indicator_plus_span"
    GROUP_AVERAGE = "group_average"
    COMPLEMENT = "complement"


@dataclass(frozen=True)
class GroupAction:
    """Phased index permutation: (g v)[i] = phase[i] * v[perm[i]]"""
    perm: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.intp)
        phase = np.asarray(self.phase)
        if perm.ndim != 1 or phase.shape != perm.shape:
            raise ProjectorError(f"Group action needs matching 1-D perm and phase, got {perm.shape} and {phase.shape}")
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "phase", phase)

    @property
    def dim(self) -> int:
        return self.perm.size

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.phase) or not np.any(self.phase.imag)

    @property
    def key(self) -> bytes:
        phase = np.round(self.phase.astype(complex), PHASE_DECIMALS) + 0j
        return self.perm.tobytes() + phase.tobytes()

    def is_unitary(self) -> bool:
        is_perm = np.array_equal(np.sort(self.perm), np.arange(self.dim))
        return bool(is_perm and np.allclose(np.abs(self.phase), 1.0, atol=PHASE_TOL, rtol=0.0))

    def apply(self, v: np.ndarray) -> np.ndarray:
        if v.ndim == 2:
            return self.phase[:, None] * v[self.perm]
        return self.phase * v[self.perm]

    def compose(self, other: "GroupAction") -> "GroupAction":
        """self after other"""
        return GroupAction(perm=other.perm[self.perm], phase=self.phase * other.phase[self.perm])

    def same_as(self, other: "GroupAction") -> bool:
        return (np.array_equal(self.perm, other.perm)
                and np.allclose(self.phase, other.phase, atol=PHASE_TOL, rtol=0.0))

    def matrix(self) -> sp.csr_matrix:
        n = self.dim
        return sp.csr_matrix((self.phase, (np.arange(n), self.perm)), shape=(n, n))

    @classmethod
    def identity(cls, dim: int) -> "GroupAction":
        return cls(perm=np.arange(dim), phase=np.ones(dim))

    @classmethod
    def cyclic_shift(cls, dim: int, k: int = 1) -> "GroupAction":
        return cls(perm=(np.arange(dim) + k) % dim, phase=np.ones(dim))

    @classmethod
    def reflection(cls, dim: int) -> "GroupAction":
        return cls(perm=np.arange(dim)[::-1].copy(), phase=np.ones(dim))

    @classmethod
    def swap(cls, dim: int, i: int, j: int) -> "GroupAction":
        perm = np.arange(dim)
        perm[[i, j]] = perm[[j, i]]
        return cls(perm=perm, phase=np.ones(dim))


def cyclic_group(dim: int) -> List[GroupAction]:
    """All cyclic shifts of a length-``dim`` index set"""
    return [GroupAction.cyclic_shift(dim, k) for k in range(dim)]


def generate_group(generators: Sequence[GroupAction], max_order: int = 10000) -> List[GroupAction]:
    """Close a set of generators under composition"""
    if not generators:
        raise ProjectorError("At least one generator is required")
    dim = generators[0].dim
    elements: Dict[bytes, GroupAction] = {}
    frontier = [GroupAction.identity(dim)]
    while frontier:
        g = frontier.pop()
        if g.key in elements:
            continue
        elements[g.key] = g
        if len(elements) > max_order:
            raise ProjectorError(f"Generated group exceeds {max_order} elements")
        frontier.extend(h.compose(g) for h in generators)
    return list(elements.values())


def check_group_closure(actions: Sequence[GroupAction]) -> None:
    """Raise unless ``actions`` is closed under composition and every element is unitary"""
    if not actions:
        raise ProjectorError("Group action list is empty")
    dim = actions[0].dim
    table: Dict[bytes, GroupAction] = {}
    for g in actions:
        if g.dim != dim:
            raise DimensionMismatchError(dim, g.dim, "group action")
        if not g.is_unitary():
            raise ProjectorError("Group action is not unitary (perm must be a permutation, |phase| = 1)")
        table[g.key] = g
    if len(table) != len(actions):
        raise ProjectorError("Group action list contains duplicates")
    for g in actions:
        for h in actions:
            gh = g.compose(h)
            match = table.get(gh.key)
            if match is None or not match.same_as(gh):
                raise ProjectorError("Group action list is not closed under composition")


@dataclass
class RankStructure:
    """Q v = mask * v + sparse_part @ v + factor @ (weights * factor^H v)"""
    dim: int
    mask: Optional[np.ndarray] = None
    sparse_part: Optional[sp.csr_matrix] = None
    factor: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.factor.size == 0:
            self.factor = np.zeros((self.dim, 0))
            self.weights = np.zeros(0)

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    def diagonal_sparse(self) -> Optional[sp.csr_matrix]:
        """Mask plus sparse part as one sparse matrix (None when both are absent)"""
        parts = []
        if self.mask is not None:
            parts.append(sp.diags(self.mask, format="csr"))
        if self.sparse_part is not None:
            parts.append(self.sparse_part)
        if not parts:
            return None
        total = parts[0]
        for p in parts[1:]:
            total = total + p
        return sp.csr_matrix(total)

    def apply(self, v: np.ndarray) -> np.ndarray:
        dtypes = [v.dtype, self.factor.dtype, float]
        if self.sparse_part is not None:
            dtypes.append(self.sparse_part.dtype)
        out = np.zeros(v.shape, dtype=np.result_type(*dtypes))
        if self.mask is not None:
            out += self.mask[:, None] * v if v.ndim == 2 else self.mask * v
        if self.sparse_part is not None:
            out += self.sparse_part @ v
        if self.rank:
            coeffs = self.factor.conj().T @ v
            coeffs = self.weights[:, None] * coeffs if v.ndim == 2 else self.weights * coeffs
            out += self.factor @ coeffs
        return out

    def negated_plus_identity(self) -> "RankStructure":
        mask = np.ones(self.dim) if self.mask is None else 1.0 - self.mask
        sparse_part = None if self.sparse_part is None else -self.sparse_part
        return RankStructure(dim=self.dim,
                             mask=mask,
                             sparse_part=sparse_part,
                             factor=self.factor,
                             weights=-self.weights)


class OrthoProjector:
    """Orthogonal projector onto a subspace W of C^n"""

    def __init__(self,
                 dim: int,
                 kind: ProjectorKind,
                 structure: RankStructure,
                 is_real: bool,
                 mask: Optional[np.ndarray] = None,
                 basis: Optional[np.ndarray] = None,
                 actions: Optional[List[GroupAction]] = None,
                 inner: Optional["OrthoProjector"] = None,
                 name: str = ""):
        self.dim = dim
        self.kind = kind
        self.structure = structure
        self.is_real = is_real
        self.mask = mask
        self.basis = basis
        self.actions = actions or []
        self.inner = inner
        self.name = name or kind.value

    @property
    def rank(self) -> int:
        return self.structure.rank

    def apply(self, v: VectorLike) -> np.ndarray:
        arr = as_vector(v, self.dim, "projector input")
        if self.kind is ProjectorKind.COMPLEMENT:
            return arr - self.inner.apply(arr)
        return self.structure.apply(arr)

    def __matmul__(self, v: VectorLike) -> np.ndarray:
        return self.apply(v)

    def as_hermitian_operator(self) -> HermitianOperator:
        return HermitianOperator.from_callable(self.dim, self.apply, is_real=self.is_real, name=f"Q[{self.name}]")

    def __repr__(self) -> str:
        return f"OrthoProjector(kind={self.kind.value}, dim={self.dim}, rank={self.rank}, is_real={self.is_real})"


def indicator_projector(mask: VectorLike, name: str = "") -> OrthoProjector:
    """Diagonal 0/1 projector onto vectors supported where mask is 1"""
    arr = np.asarray(mask)
    if arr.ndim != 1 or arr.size == 0:
        raise ProjectorError(f"Indicator mask must be a non-empty 1-D array, got shape {arr.shape}")
    if arr.dtype == bool:
        arr = arr.astype(float)
    if not np.all((arr == 0) | (arr == 1)):
        raise ProjectorError("Indicator mask entries must be 0 or 1")
    values = np.real(arr).astype(float)
    return OrthoProjector(dim=values.size,
                          kind=ProjectorKind.INDICATOR,
                          structure=RankStructure(dim=values.size, mask=values),
                          is_real=True,
                          mask=values,
                          name=name)


def indicator_from_indices(dim: int, indices: Sequence[int], name: str = "") -> OrthoProjector:
    mask = np.zeros(dim)
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= dim):
        raise ProjectorError(f"Indicator index out of range for dimension {dim}")
    mask[idx] = 1.0
    return indicator_projector(mask, name=name)


def span_projector(vectors: Union[np.ndarray, Sequence[VectorLike]], name: str = "") -> OrthoProjector:
    """Q = U U^H for an orthonormal basis U of span(vectors)"""
    try:
        basis, rank = orthonormalize(vectors)
    except ValueError as err:
        raise ProjectorError(f"Cannot build span projector: {err}") from err
    dim = basis.shape[0]
    logger.debug("span projector of rank %d in dimension %d", rank, dim)
    return OrthoProjector(dim=dim,
                          kind=ProjectorKind.SPAN,
                          structure=RankStructure(dim=dim, factor=basis, weights=np.ones(rank)),
                          is_real=not np.iscomplexobj(basis),
                          basis=basis,
                          name=name)


def localized_perturbation_projector(mask_k: VectorLike,
                                     exterior_refs: Union[np.ndarray, Sequence[VectorLike]],
                                     name: str = "") -> OrthoProjector:
    """Free inside K, restricted to span of the references outside K"""
    mask = indicator_projector(mask_k).mask
    refs = np.asarray(exterior_refs)
    refs = refs[:, None] if refs.ndim == 1 else refs
    if refs.shape[0] != mask.size:
        raise DimensionMismatchError(mask.size, refs.shape[0], "exterior reference")
    exterior = refs * (1.0 - mask)[:, None]
    total = np.linalg.norm(refs, axis=0)
    outside = np.linalg.norm(exterior, axis=0)
    for j in range(refs.shape[1]):
        if total[j] == 0.0 or outside[j] < EXTERIOR_NORM_TOL * total[j]:
            raise ProjectorError(f"Reference {j} has no support outside K")
    basis, rank = orthonormalize(exterior)
    dim = mask.size
    return OrthoProjector(dim=dim,
                          kind=ProjectorKind.INDICATOR_PLUS_SPAN,
                          structure=RankStructure(dim=dim, mask=mask, factor=basis, weights=np.ones(rank)),
                          is_real=not np.iscomplexobj(basis),
                          mask=mask,
                          basis=basis,
                          name=name)


def group_average_projector(actions: Sequence[GroupAction], name: str = "") -> OrthoProjector:
    """Q v = mean of g v over the group; projects onto the invariant vectors"""
    actions = list(actions)
    check_group_closure(actions)
    dim = actions[0].dim
    order = len(actions)
    rows = np.tile(np.arange(dim), order)
    cols = np.concatenate([g.perm for g in actions])
    data = np.concatenate([g.phase for g in actions]) / order
    averaging = sp.csr_matrix((data, (rows, cols)), shape=(dim, dim))
    averaging.sum_duplicates()
    averaging.eliminate_zeros()
    return OrthoProjector(dim=dim,
                          kind=ProjectorKind.GROUP_AVERAGE,
                          structure=RankStructure(dim=dim, sparse_part=averaging),
                          is_real=all(g.is_real for g in actions),
                          actions=actions,
                          name=name)


def complement(inner: OrthoProjector) -> OrthoProjector:
    """I - Q; the complement of a complement is the original projector"""
    if inner.kind is ProjectorKind.COMPLEMENT:
        return inner.inner
    return OrthoProjector(dim=inner.dim,
                          kind=ProjectorKind.COMPLEMENT,
                          structure=inner.structure.negated_plus_identity(),
                          is_real=inner.is_real,
                          inner=inner,
                          name=f"complement({inner.name})")


def tau_delta(q: OrthoProjector, v: VectorLike) -> Tuple[float, float]:
    """(||Qv|| / ||v||, ||(I-Q)v|| / ||v||)"""
    arr = as_vector(v, q.dim)
    if arr.ndim != 1:
        raise ValueError("tau_delta expects a single vector")
    norm_v = np.linalg.norm(arr)
    if norm_v == 0.0:
        raise ValueError("tau_delta is undefined for the zero vector")
    qv = q.apply(arr)
    tau = np.linalg.norm(qv) / norm_v
    delta = np.linalg.norm(arr - qv) / norm_v
    return float(min(tau, 1.0)), float(min(delta, 1.0))


def rank_structure(q: OrthoProjector) -> RankStructure:
    return q.structure


@dataclass
class ProjectorCheck:
    idempotency: float
    self_adjointness: float
    contraction: float
    pythagoras: float
    realness: Optional[float]

    def worst(self) -> float:
        values = [self.idempotency, self.self_adjointness, self.contraction, self.pythagoras]
        if self.realness is not None:
            values.append(self.realness)
        return max(values)


def check_projector(q: OrthoProjector, trials: int = 100, seed: int = 0) -> ProjectorCheck:
    """Largest relative defects of the projector identities over random vectors"""
    rng = np.random.default_rng(seed)
    idem = adj = contr = pyth = 0.0
    real_defect = 0.0 if q.is_real else None
    for _ in range(trials):
        u = random_complex_vector(q.dim, rng)
        v = random_complex_vector(q.dim, rng)
        qv = q.apply(v)
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        idem = max(idem, np.linalg.norm(q.apply(qv) - qv) / nv)
        adj = max(adj, abs(np.vdot(q.apply(u), v) - np.vdot(u, qv)) / (nu * nv))
        contr = max(contr, max(0.0, np.linalg.norm(qv) / nv - 1.0))
        tau, delta = tau_delta(q, v)
        pyth = max(pyth, abs(tau ** 2 + delta ** 2 - 1.0))
        if real_defect is not None:
            real_defect = max(real_defect, np.abs(np.imag(q.apply(v.real))).max() / nv)
    return ProjectorCheck(idempotency=float(idem),
                          self_adjointness=float(adj),
                          contraction=float(contr),
                          pythagoras=float(pyth),
                          realness=None if real_defect is None else float(real_defect))
