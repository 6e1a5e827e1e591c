"""
Run Configuration
JSON run documents validated with pydantic, plus .env / environment overrides
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..core.errors import ConfigError

logger = logging.getLogger(__name__)

ENV_OUTPUT_DIR = "CONEIG_OUTPUT_DIR"
ENV_THREADS = "CONEIG_THREADS"
ENV_SEED = "CONEIG_SEED"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProjectorBlock(StrictModel):
    kind: Literal["indicator", "span", "localized", "group", "complement"]
    dim: Optional[int] = Field(default=None, gt=0)
    indices: Optional[List[int]] = None
    vectors: Optional[str] = None
    permutations: Optional[List[List[int]]] = None
    phases: Optional[List[List[float]]] = None
    inner: Optional["ProjectorBlock"] = None

    @model_validator(mode="after")
    def check_inputs(self) -> "ProjectorBlock":
        needs = {
            "indicator": ("indices",),
            "span": ("vectors",),
            "localized": ("indices", "vectors"),
            "group": ("permutations",),
            "complement": ("inner",),
        }[self.kind]
        missing = [name for name in needs if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.kind} projector needs {', '.join(missing)}")
        if self.phases is not None and self.permutations is not None and len(self.phases) != len(self.permutations):
            raise ValueError("phases must have one row per permutation")
        return self


ProjectorBlock.model_rebuild()


class ProblemBlock(StrictModel):
    builtin: Optional[str] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    operator: Optional[str] = None
    edges: Optional[str] = None
    potential: Optional[List[float]] = None
    subset: Optional[List[int]] = None
    projector: Optional[ProjectorBlock] = None

    @model_validator(mode="after")
    def check_source(self) -> "ProblemBlock":
        sources = [name for name in ("builtin", "operator", "edges") if getattr(self, name) is not None]
        if len(sources) != 1:
            raise ValueError("problem needs exactly one of builtin, operator or edges")
        if self.operator is not None and self.projector is None:
            raise ValueError("an operator file needs a projector block")
        if self.edges is not None and not self.subset:
            raise ValueError("a graph problem needs a nonempty subset")
        return self


class SearchBlock(StrictModel):
    a: float
    b: float
    s: float = Field(default=0.1, gt=0)
    delta_star: Optional[float] = Field(default=None, gt=0, le=1)
    tau2_threshold: Optional[float] = Field(default=None, ge=0, lt=1)
    mode: Literal["near", "avoid"] = "near"
    post_process: Literal["off", "inverse_iteration"] = "off"
    post_process_steps: int = Field(default=1, ge=1)
    rescale_real: bool = True
    scope: Literal["region", "window"] = "region"
    cluster_width: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def check_tolerance(self) -> "SearchBlock":
        if (self.delta_star is None) == (self.tau2_threshold is None):
            raise ValueError("give exactly one of delta_star or tau2_threshold")
        if self.a > self.b:
            raise ValueError(f"interval is empty: a={self.a} > b={self.b}")
        return self

    def resolved_delta_star(self) -> float:
        if self.delta_star is not None:
            return self.delta_star
        return (1.0 - self.tau2_threshold) ** 0.5


class SolverBlock(StrictModel):
    tol: float = Field(default=1e-9, gt=0)
    krylov_dim: Optional[int] = Field(default=None, ge=3)
    seed: int = 0
    max_restarts: int = Field(default=1000, ge=1)
    method: Literal["auto", "arnoldi", "dense"] = "auto"
    dense_threshold: int = Field(default=64, ge=0)
    initial_nev: int = Field(default=16, ge=1)
    max_nev: int = Field(default=160, ge=1)
    max_subinterval_width: Optional[float] = Field(default=None, gt=0)


class OutputBlock(StrictModel):
    directory: str = "results"
    formats: List[Literal["json", "csv", "npz", "html"]] = Field(default_factory=lambda: ["json", "csv"])
    dump_fields: bool = False
    max_modes: int = Field(default=20, ge=0)


class SuiteBlock(StrictModel):
    count: int = Field(default=20, ge=1)
    n: int = Field(default=60, ge=4)
    seed: int = 0
    kinds: Optional[List[Literal["indicator", "span", "localized", "group", "complement"]]] = None


class ValidateBlock(StrictModel):
    encoding: bool = True
    decoding: bool = True
    identities: bool = True
    s_values: List[float] = Field(default_factory=lambda: [0.01, 0.05, 0.1])
    suite: Optional[SuiteBlock] = None


class RunConfig(StrictModel):
    problem: ProblemBlock
    search: Optional[SearchBlock] = None
    solver: SolverBlock = Field(default_factory=SolverBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)
    validate_: ValidateBlock = Field(default_factory=ValidateBlock, alias="validate")

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def check_search(self) -> "RunConfig":
        if self.search is None and self.problem.builtin is None:
            raise ValueError("a search block is required unless the problem is builtin")
        return self


def _key_line(text: str, loc: Sequence[Union[str, int]]) -> Optional[int]:
    """Line of the deepest key of loc that appears in the document, scanning in order"""
    pos = 0
    found = None
    for key in loc:
        if not isinstance(key, str):
            continue
        hit = text.find(f'"{key}"', pos)
        if hit < 0:
            break
        pos = hit
        found = hit
    return None if found is None else text.count("\n", 0, found) + 1


def parse_config(text: str, path: Optional[str] = None) -> RunConfig:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err.msg} (column {err.colno})", path=path, line=err.lineno) from err
    try:
        return RunConfig.model_validate(document)
    except ValidationError as err:
        first = err.errors()[0]
        loc = tuple(first.get("loc", ()))
        dotted = ".".join(str(part) for part in loc) or "<root>"
        raise ConfigError(f"{dotted}: {first.get('msg', 'invalid value')}", path=path, line=_key_line(text, loc)) from err


def load_config(path: Union[str, Path]) -> Tuple[RunConfig, Path]:
    """Read and validate a run document; returns it with its directory for resolving relative paths"""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err.strerror or err}", path=str(path)) from err
    config = parse_config(text, str(path))
    logger.info("loaded config %s", path)
    return config, path.resolve().parent


def environment_overrides() -> Dict[str, Any]:
    """Values from the process environment (and a .env file, if present)"""
    load_dotenv()
    overrides: Dict[str, Any] = {}
    if os.getenv(ENV_OUTPUT_DIR):
        overrides["output_dir"] = os.getenv(ENV_OUTPUT_DIR)
    for key, name in (("seed", ENV_SEED), ("threads", ENV_THREADS)):
        raw = os.getenv(name)
        if raw:
            try:
                overrides[key] = int(raw)
            except ValueError as err:
                raise ConfigError(f"{name} must be an integer, got {raw!r}") from err
    return overrides


def apply_overrides(config: RunConfig,
                    output_dir: Optional[str] = None,
                    seed: Optional[int] = None) -> RunConfig:
    """CLI flags beat the environment, which beats the file"""
    env = environment_overrides()
    output_dir = output_dir if output_dir is not None else env.get("output_dir")
    seed = seed if seed is not None else env.get("seed")
    updates: Dict[str, Any] = {}
    if output_dir is not None:
        updates["output"] = config.output.model_copy(update={"directory": str(output_dir)})
    if seed is not None:
        updates["solver"] = config.solver.model_copy(update={"seed": int(seed)})
    return config.model_copy(update=updates) if updates else config
