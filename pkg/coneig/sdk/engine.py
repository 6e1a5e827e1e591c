"""
coneig SDK - Engine
Builds problems from a run configuration, runs the constrained eigensolver
and the bound validators, and writes artifacts.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from ..core.errors import ConfigError, ConvergenceError
from ..core.linalg.linop import HermitianOperator
from ..core.linalg.perturb import PerturbedOperator
from ..core.linalg.projectors import (
    GroupAction,
    OrthoProjector,
    complement,
    group_average_projector,
    indicator_from_indices,
    localized_perturbation_projector,
    span_projector,
)
from ..core.problems.catalog import ProblemCatalog, default_catalog
from ..core.problems.experiments import ConstrainedProblem
from ..core.problems.graphs import graph_problem, read_edge_list
from ..core.problems.random_instances import random_suite
from ..core.solvers.eigensolve import RegionEigensolver, RegionSpec, RitzPair, SolverMethod, SolverParams
from ..core.solvers.pipeline import (
    CandidateScope,
    PostProcess,
    RunReport,
    SearchMode,
    SearchSpec,
    metrics,
    run as run_pipeline,
)
from ..core.solvers.validators import identity_defects, validate_decoding, validate_encoding
from . import report as writers
from .config import ProjectorBlock, RunConfig

logger = logging.getLogger(__name__)

SPECTRUM_DENSE_LIMIT = 1500


def load_operator(path: Path) -> HermitianOperator:
    """.npz holds a scipy sparse matrix, .npy a dense one"""
    if not path.exists():
        raise ConfigError("operator file not found", path=str(path))
    if path.suffix == ".npz":
        matrix = sp.load_npz(path)
    elif path.suffix == ".npy":
        matrix = np.load(path)
    else:
        raise ConfigError(f"unsupported operator format {path.suffix!r} (use .npz or .npy)", path=str(path))
    return HermitianOperator.from_matrix(matrix, name=path.stem)


def load_vectors(path: Path, dim: int) -> np.ndarray:
    if not path.exists():
        raise ConfigError("vector file not found", path=str(path))
    vectors = np.load(path)
    vectors = vectors[:, None] if vectors.ndim == 1 else vectors
    if vectors.shape[0] != dim:
        raise ConfigError(f"vectors have {vectors.shape[0]} rows, operator dimension is {dim}", path=str(path))
    return vectors


def build_projector(block: ProjectorBlock, dim: int, base_dir: Path) -> OrthoProjector:
    if block.dim is not None and block.dim != dim:
        raise ConfigError(f"projector dim {block.dim} does not match operator dimension {dim}")
    if block.kind == "indicator":
        return indicator_from_indices(dim, block.indices)
    if block.kind == "span":
        return span_projector(load_vectors(base_dir / block.vectors, dim))
    if block.kind == "localized":
        mask = indicator_from_indices(dim, block.indices).mask
        return localized_perturbation_projector(mask, load_vectors(base_dir / block.vectors, dim))
    if block.kind == "group":
        phases = block.phases or [[1.0] * dim for _ in block.permutations]
        actions = [GroupAction(perm=np.array(p), phase=np.array(ph)) for p, ph in zip(block.permutations, phases)]
        return group_average_projector(actions)
    return complement(build_projector(block.inner, dim, base_dir))


def _spectrum_row(operator: PerturbedOperator, pair: RitzPair, source: str) -> Dict[str, Any]:
    return {"source": source, "re_mu": pair.mu.real, "im_mu": pair.mu.imag, "tau2": metrics(operator, pair).tau2}


class ConstrainedEigenEngine:
    """Facade tying a RunConfig to the solver stack"""

    def __init__(self, config: RunConfig, base_dir: Optional[Path] = None, catalog: Optional[ProblemCatalog] = None):
        self.config = config
        self.base_dir = base_dir or Path.cwd()
        self.catalog = catalog or default_catalog()
        self._problem: Optional[ConstrainedProblem] = None

    @property
    def output_dir(self) -> Path:
        return Path(self.config.output.directory)

    @property
    def is_suite(self) -> bool:
        return self.config.problem.builtin == "random_suite"

    def problem(self) -> ConstrainedProblem:
        if self._problem is None:
            self._problem = self._build_problem()
        return self._problem

    def _build_problem(self) -> ConstrainedProblem:
        block = self.config.problem
        if block.builtin is not None:
            if self.is_suite:
                raise ConfigError("random_suite is only available to the validate command")
            try:
                self.catalog.get(block.builtin)
                unknown = set(block.params) - set(self.catalog.parameters(block.builtin))
            except ValueError as err:
                raise ConfigError(f"problem.builtin: {err}") from err
            if unknown:
                raise ConfigError(f"problem.params: unknown parameters {sorted(unknown)} for {block.builtin}")
            return self.catalog.build(block.builtin, dict(block.params))
        if block.edges is not None:
            graph = read_edge_list(self.base_dir / block.edges)
            return graph_problem(graph, potential=block.potential, subset=block.subset, name=Path(block.edges).stem)
        operator = load_operator(self.base_dir / block.operator)
        if block.potential is not None:
            raise ConfigError("problem.potential only applies to graph problems")
        projector = build_projector(block.projector, operator.dim, self.base_dir)
        return ConstrainedProblem(name=operator.name, operator=operator, projector=projector)

    def search_spec(self) -> SearchSpec:
        block = self.config.search
        if block is None:
            spec = self.problem().spec
            if spec is None:
                raise ConfigError("problem has no default search settings; add a search block")
            return spec
        region = RegionSpec(a=block.a, b=block.b, s=block.s, delta_star=block.resolved_delta_star())
        return SearchSpec(region=region,
                          mode=SearchMode(block.mode),
                          post_process=PostProcess(block.post_process),
                          post_process_steps=block.post_process_steps,
                          rescale_real=block.rescale_real,
                          scope=CandidateScope(block.scope),
                          cluster_width=block.cluster_width)

    def solver_params(self) -> SolverParams:
        block = self.config.solver
        return SolverParams(krylov_dim=block.krylov_dim,
                            max_restarts=block.max_restarts,
                            tol=block.tol,
                            seed=block.seed,
                            method=SolverMethod(block.method),
                            dense_threshold=block.dense_threshold,
                            initial_nev=block.initial_nev,
                            max_nev=block.max_nev,
                            max_subinterval_width=block.max_subinterval_width)

    def run(self) -> RunReport:
        problem = self.problem()
        report = run_pipeline(problem.operator, problem.projector, self.search_spec(), self.solver_params())
        report.problem = problem.describe()
        return report

    def write_run(self, report: RunReport) -> Dict[str, Any]:
        """Write the configured artifacts; returns the paths written, keyed by kind"""
        out = self.config.output
        directory = self.output_dir
        directory.mkdir(parents=True, exist_ok=True)
        problem = self._problem
        artifacts: Dict[str, Any] = {}
        if "csv" in out.formats:
            artifacts["eigenvalues"] = str(writers.write_eigenvalues_csv(directory / "eigenvalues.csv", report))
        domain = problem.domain if problem is not None else None
        if out.dump_fields and report.accepted:
            if domain is not None:
                fields = []
                for pair in report.accepted[:out.max_modes]:
                    fields.extend(str(p) for p in writers.write_mode_fields(directory, domain, pair.candidate_index, pair.vector))
                artifacts["fields"] = fields
            else:
                artifacts["vectors"] = str(writers.write_vectors_npz(directory / "vectors.npz", report, out.max_modes))
        elif "npz" in out.formats:
            artifacts["vectors"] = str(writers.write_vectors_npz(directory / "vectors.npz", report, out.max_modes))
        if "html" in out.formats:
            from .visualization import write_report_figures
            artifacts["figures"] = [str(p) for p in write_report_figures(report, directory, domain, out.max_modes)]
        document = report.to_dict()
        document["artifacts"] = artifacts
        if "json" in out.formats:
            artifacts["report"] = str(directory / "report.json")
            writers.write_json(directory / "report.json", document)
        logger.info("wrote %d artifact groups to %s", len(artifacts), directory)
        return artifacts

    def _validation_targets(self) -> List[Tuple[str, ConstrainedProblem]]:
        if self.is_suite:
            suite = self.config.validate_.suite
            params = dict(self.config.problem.params)
            count = params.get("count", suite.count if suite else 20)
            n = params.get("n", suite.n if suite else 60)
            seed = params.get("seed", suite.seed if suite else 0)
            kinds = params.get("kinds", suite.kinds if suite else None)
            return [(p.name, p) for p in random_suite(count, seed=seed, n=n, kinds=kinds)]
        problem = self.problem()
        return [(problem.name, problem)]

    def validate(self) -> Dict[str, Any]:
        """Dense-oracle bound checks; all_hold is False if any applicable bound fails"""
        block = self.config.validate_
        s_values = list(block.s_values)
        cap = self.solver_params().dense_cap
        results = []
        all_hold = True
        for name, problem in self._validation_targets():
            entry: Dict[str, Any] = {"problem": name, "dim": problem.operator.dim}
            if block.encoding:
                encoding = validate_encoding(problem.operator, problem.projector, s_values, cap=cap)
                entry["encoding"] = encoding.to_dict()
                all_hold &= encoding.all_hold
            if block.decoding:
                decoding = [validate_decoding(problem.operator, problem.projector, s, cap=cap) for s in s_values if s > 0]
                entry["decoding"] = [d.to_dict() for d in decoding]
                all_hold &= all(d.all_hold for d in decoding)
            if block.identities:
                entry["identities"] = {str(s): identity_defects(PerturbedOperator(problem.operator, problem.projector, s), cap).to_dict()
                                       for s in s_values if s > 0}
            results.append(entry)
        return {"schema": "v1", "all_hold": all_hold, "s_values": s_values, "results": results}

    def spectrum(self) -> List[Dict[str, Any]]:
        """Eigenvalues of L(s) near the region, plus the full dense spectrum for small problems"""
        problem = self.problem()
        spec = self.search_spec()
        operator = PerturbedOperator(problem.operator, problem.projector, spec.region.s)
        solver = RegionEigensolver(operator, self.solver_params())
        try:
            window = solver.find_in_window(spec.region)
        except ConvergenceError as err:
            partial = [_spectrum_row(operator, pair, "partial") for pair in err.partial or []]
            raise ConvergenceError(str(err), partial=partial, diagnostics=solver.diagnostics.to_dict(),
                                   best_residual=err.best_residual) from err
        rows = [_spectrum_row(operator, pair, "window") for pair in window]
        if operator.dim <= SPECTRUM_DENSE_LIMIT:
            rows.extend(_spectrum_row(operator, pair, "dense") for pair in solver.dense_pairs())
        logger.info("spectrum: %d points", len(rows))
        return rows
