"""
Graph Problems
Graph Laplacian (plus vertex potential) with an indicator projector on a
vertex subset, for localization on subgraphs
"""

import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import scipy.sparse as sp

from ..errors import ProjectorError
from ..linalg.linop import HermitianOperator
from ..linalg.projectors import indicator_from_indices
from ..solvers.eigensolve import RegionSpec
from ..solvers.pipeline import SearchSpec
from .experiments import DEFAULT_S, ConstrainedProblem

logger = logging.getLogger(__name__)

Edge = Tuple[int, int, float]


def build_graph(edges: Iterable[Sequence], n_vertices: Optional[int] = None) -> nx.Graph:
    """Undirected weighted graph on vertices 0..n-1; edges are (u, v) or (u, v, w)"""
    graph = nx.Graph()
    weighted = []
    for edge in edges:
        if len(edge) == 2:
            u, v = edge
            w = 1.0
        elif len(edge) == 3:
            u, v, w = edge
        else:
            raise ValueError(f"Edge must be (u, v) or (u, v, w), got {edge!r}")
        if float(w) < 0:
            raise ValueError(f"Edge ({u}, {v}) has negative weight {w}")
        weighted.append((int(u), int(v), float(w)))
    top = max((max(u, v) for u, v, _ in weighted), default=-1) + 1
    n = n_vertices if n_vertices is not None else top
    if n < top:
        raise ValueError(f"Edge list references vertex {top - 1} but n_vertices={n}")
    graph.add_nodes_from(range(n))
    graph.add_weighted_edges_from(weighted)
    return graph


def graph_laplacian(graph: nx.Graph, potential: Optional[Sequence[float]] = None) -> HermitianOperator:
    nodes = sorted(graph.nodes())
    laplacian = sp.csr_matrix(nx.laplacian_matrix(graph, nodelist=nodes, weight="weight"), dtype=float)
    if potential is not None:
        values = np.asarray(potential, dtype=float)
        if values.shape != (len(nodes),):
            raise ValueError(f"Potential needs {len(nodes)} entries, got {values.size}")
        laplacian = laplacian + sp.diags(values, format="csr")
    return HermitianOperator.from_matrix(laplacian, name="graph_laplacian", check=False)


def graph_problem(edges: Union[nx.Graph, Iterable[Sequence]],
                  potential: Optional[Sequence[float]] = None,
                  subset: Sequence[int] = (),
                  n_vertices: Optional[int] = None,
                  name: str = "graph") -> ConstrainedProblem:
    """L = graph Laplacian + diag(potential), Q = indicator of the subset"""
    graph = edges if isinstance(edges, nx.Graph) else build_graph(edges, n_vertices)
    if len(subset) == 0:
        raise ProjectorError("Graph problem needs a nonempty vertex subset")
    connected = graph.number_of_nodes() > 0 and nx.is_connected(graph)
    if not connected:
        logger.warning("graph %s is disconnected (%d components)", name, nx.number_connected_components(graph))
    operator = graph_laplacian(graph, potential)
    projector = indicator_from_indices(operator.dim, subset, name=f"{len(subset)} vertices")
    return ConstrainedProblem(name=name, operator=operator, projector=projector,
                              metadata={"vertices": graph.number_of_nodes(), "edges": graph.number_of_edges(),
                                        "connected": connected, "subset_size": len(subset)})


def _unit_edges(graph: nx.Graph) -> List[Edge]:
    return [(int(u), int(v), 1.0) for u, v in graph.edges()]


def path_graph_edges(n: int) -> List[Edge]:
    return _unit_edges(nx.path_graph(n))


def complete_graph_edges(n: int) -> List[Edge]:
    return _unit_edges(nx.complete_graph(n))


def barbell_graph_edges(bell_size: int, path_length: int) -> List[Edge]:
    """Two complete graphs on bell_size vertices joined by a path of path_length vertices"""
    return _unit_edges(nx.barbell_graph(bell_size, path_length))


def barbell_problem(bell_size: int = 10,
                    path_length: int = 3,
                    s: float = DEFAULT_S,
                    delta_star: float = 0.5,
                    a: float = 9.5,
                    b: float = 10.5) -> ConstrainedProblem:
    """Barbell graph with W = vectors supported on the first bell"""
    problem = graph_problem(nx.barbell_graph(bell_size, path_length), subset=list(range(bell_size)), name="barbell")
    problem.spec = SearchSpec(region=RegionSpec(a=a, b=b, s=s, delta_star=delta_star))
    problem.metadata.update({"bell_size": bell_size, "path_length": path_length})
    return problem


def read_edge_list(path: Union[str, Path]) -> nx.Graph:
    """Whitespace-separated 'u v w' lines; '#' starts a comment"""
    path = Path(path)
    try:
        graph = nx.read_edgelist(path, nodetype=int, data=(("weight", float),), comments="#")
    except (TypeError, ValueError, IndexError) as err:
        raise ValueError(f"{path}: malformed edge list ({err})") from err
    if graph.number_of_nodes() == 0:
        raise ValueError(f"{path}: edge list is empty")
    return build_graph(((u, v, d["weight"]) for u, v, d in graph.edges(data=True)),
                       n_vertices=max(graph.nodes()) + 1)
