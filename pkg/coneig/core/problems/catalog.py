"""
Problem Catalog
Builtin problems addressable by name from a run configuration
"""

import inspect
import logging
from typing import Any, Callable, Dict, List

from .experiments import ConstrainedProblem, c5_symmetry_problem, diag_demo, hex_annulus_problem, square_well_problem
from .graphs import barbell_problem
from .random_instances import random_instance

logger = logging.getLogger(__name__)

Builder = Callable[..., ConstrainedProblem]


class ProblemCatalog:
    """Name -> builder registry"""

    def __init__(self):
        self.builders: Dict[str, Builder] = {}

    def register(self, name: str, builder: Builder) -> None:
        if name in self.builders:
            raise ValueError(f"Problem {name} already registered")
        self.builders[name] = builder

    def names(self) -> List[str]:
        return sorted(self.builders)

    def parameters(self, name: str) -> List[str]:
        return list(inspect.signature(self.get(name)).parameters)

    def get(self, name: str) -> Builder:
        if name not in self.builders:
            raise ValueError(f"Problem {name} not found; available: {', '.join(self.names())}")
        return self.builders[name]

    def build(self, name: str, params: Dict[str, Any]) -> ConstrainedProblem:
        builder = self.get(name)
        unknown = set(params) - set(self.parameters(name))
        if unknown:
            raise ValueError(f"Unknown parameters for problem {name}: {', '.join(sorted(unknown))}")
        logger.info("building problem %s with %s", name, params)
        return builder(**params)


def default_catalog() -> ProblemCatalog:
    catalog = ProblemCatalog()
    catalog.register("diag_demo", diag_demo)
    catalog.register("square_well", square_well_problem)
    catalog.register("c5_symmetry", c5_symmetry_problem)
    catalog.register("hex_annulus", hex_annulus_problem)
    catalog.register("barbell", barbell_problem)
    catalog.register("random", random_instance)
    return catalog
