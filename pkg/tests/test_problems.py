import logging
import math

import networkx as nx
import numpy as np
import pytest
import scipy.sparse.linalg as spla

from coneig.core.errors import DisconnectedDomainError, ProjectorError
from coneig.core.linalg.linop import dense_materialize
from coneig.core.linalg.projectors import check_projector, tau_delta
from coneig.core.problems.catalog import ProblemCatalog, default_catalog
from coneig.core.problems.experiments import (
    c5_symmetry_problem,
    delta_from_tau2,
    diag_demo,
    hex_annulus_problem,
    square_well_problem,
)
from coneig.core.problems.graphs import (
    barbell_problem,
    build_graph,
    complete_graph_edges,
    graph_laplacian,
    graph_problem,
    path_graph_edges,
    read_edge_list,
)
from coneig.core.problems.grids import Geometry, GridDomain, fd_operator, probability_current
from coneig.core.problems.random_instances import PROJECTOR_KINDS, random_instance, random_suite
from coneig.core.problems.zernike import (
    m_at_most,
    m_multiple_of,
    oriented_columns,
    radial_polynomial,
    zernike_basis,
    zernike_indices,
)
from coneig.core.solvers.pipeline import run


def _lowest(op, k):
    values = spla.eigsh(op.matrix, k=k, sigma=-1.0, which="LM", return_eigenvectors=False)
    return np.sort(values)


# grids

def test_square_domain():
    domain = GridDomain.square(4)
    assert domain.n_active == 16
    assert domain.h == pytest.approx(0.5)
    assert domain.geometry is Geometry.SQUARE
    assert np.allclose(domain.x_centers, [-0.75, -0.25, 0.25, 0.75])


def test_hex_annulus_has_hole():
    domain = GridDomain.hex_annulus(65)
    assert not domain.mask[32, 32]
    assert 0 < domain.n_active < 65 * 65


def test_disk_with_hole_is_inscribed():
    domain = GridDomain.disk_with_hole(65)
    x, y = domain.coordinates()
    assert np.hypot(x, y).max() <= 1.0
    assert np.hypot(x, y - 0.5).min() > 0.2


def test_disconnected_mask_rejected():
    with pytest.raises(DisconnectedDomainError):
        GridDomain.from_mask([[1, 0, 1]], h=1.0)
    with pytest.raises(DisconnectedDomainError):
        GridDomain.from_mask([[0, 0]], h=1.0)


def test_to_grid_marks_outside_with_nan():
    domain = GridDomain.from_mask([[1, 1], [1, 0]], h=1.0)
    grid = domain.to_grid(np.array([1.0, 2.0, 3.0]))
    assert np.isnan(grid[1, 1])
    assert grid[0, 1] == 2.0
    assert np.allclose(domain.restrict(np.nan_to_num(grid)), [1.0, 2.0, 3.0])


def test_fd_chain_stencil():
    domain = GridDomain.from_mask([1, 1, 1], h=0.5)
    m = dense_materialize(fd_operator(domain))
    expected = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]]) / 0.25
    assert np.allclose(m, expected)


def test_fd_constant_is_null_vector():
    domain = GridDomain.disk_with_hole(33)
    op = fd_operator(domain)
    assert np.abs(op.apply(np.ones(domain.n_active))).max() <= 1e-9
    m = op.matrix
    assert abs(m - m.T).max() == 0.0
    diag = m.diagonal()
    off = np.asarray(abs(m).sum(axis=1)).ravel() - np.abs(diag)
    assert np.all(diag >= off - 1e-9)


def test_fd_potential_forms():
    domain = GridDomain.square(3)
    scalar = fd_operator(domain, potential=2.0)
    grid = fd_operator(domain, potential=np.full((3, 3), 2.0))
    v = np.arange(9, dtype=float)
    assert np.allclose(scalar.apply(v), grid.apply(v))
    with pytest.raises(ValueError):
        fd_operator(domain, potential=np.full(9, np.inf))
    with pytest.raises(ValueError):
        fd_operator(domain, bc="dirichlet")


def test_fd_first_neumann_mode():
    op = fd_operator(GridDomain.square(65))
    values = _lowest(op, 3)
    assert values[0] == pytest.approx(0.0, abs=1e-8)
    assert values[1] == pytest.approx(math.pi ** 2 / 4, rel=0.02)


def test_fd_second_order_convergence():
    exact = np.array([1, 1, 2, 4]) * math.pi ** 2 / 4
    errors = []
    for n in (17, 33, 65):
        values = _lowest(fd_operator(GridDomain.square(n)), 5)[1:]
        errors.append(np.abs(values - exact).max())
    assert 3.0 <= errors[0] / errors[1] <= 5.0
    assert 3.0 <= errors[1] / errors[2] <= 5.0


def test_current_of_real_field_vanishes(rng):
    domain = GridDomain.hex_annulus(33)
    current = probability_current(domain, rng.standard_normal(domain.n_active))
    assert np.abs(current.jx).max() <= 1e-12
    assert np.abs(current.jy).max() <= 1e-12


def test_current_of_plane_wave():
    domain = GridDomain.square(33)
    x, _ = domain.coordinates()
    current = probability_current(domain, np.exp(2j * x))
    jx = domain.to_grid(current.jx)[:, 1:-1]
    assert np.allclose(jx, 2.0, rtol=1e-2)
    assert np.abs(current.jy).max() <= 1e-12


def test_current_of_clockwise_field():
    domain = GridDomain.hex_annulus(65)
    x, y = domain.coordinates()
    current = probability_current(domain, np.exp(-1j * np.arctan2(y, x)))
    assert current.uniform_sign_fraction(-1) >= 0.9
    assert np.median(current.angular) == pytest.approx(-1.0, rel=0.05)


# zernike

def test_radial_polynomials():
    r = np.linspace(0.0, 1.0, 5)
    assert np.allclose(radial_polynomial(0, 0, r), 1.0)
    assert np.allclose(radial_polynomial(1, 1, r), r)
    assert np.allclose(radial_polynomial(2, 0, r), 2 * r ** 2 - 1)
    assert np.allclose(radial_polynomial(3, 1, r), 3 * r ** 3 - 2 * r)
    assert np.allclose(radial_polynomial(3, 0, r), 0.0)
    for n, m in zernike_indices(8):
        assert radial_polynomial(n, m, np.array([1.0]))[0] == pytest.approx(1.0)


def test_zernike_counts():
    assert len(zernike_indices(8)) == 45
    assert len(zernike_indices(8, m_at_most(-1))) == 20
    assert len(zernike_indices(15, m_multiple_of(5))) == 28


def test_zernike_basis_on_disk():
    domain = GridDomain.disk_with_hole(65)
    basis = zernike_basis(domain, 4)
    assert basis.rank == len(basis.indices) == 15
    cols = basis.columns
    assert np.abs(cols.conj().T @ cols - np.eye(basis.rank)).max() <= 1e-10
    assert basis.normalization["disk_norm_fraction"] == pytest.approx(domain.area / math.pi)
    assert check_projector(basis.projector(), trials=20).worst() <= 1e-10


def test_zernike_basis_errors():
    with pytest.raises(ValueError):
        zernike_basis(GridDomain.square(8), 2)
    with pytest.raises(ValueError):
        zernike_basis(GridDomain.disk_with_hole(33), 2, lambda m: m > 10)


def test_conjugate_spans_give_same_closeness(rng):
    domain = GridDomain.hex_annulus(65)
    clockwise = zernike_basis(domain, 8, m_at_most(-1)).projector()
    counter = zernike_basis(domain, 8, lambda m: m >= 1).projector()
    v = rng.standard_normal(domain.n_active)
    assert tau_delta(clockwise, v)[0] == pytest.approx(tau_delta(counter, v)[0], abs=1e-10)


def test_rotating_field_is_close_to_clockwise_span():
    problem = hex_annulus_problem(65)
    x, y = problem.domain.coordinates()
    r = np.hypot(x, y)
    tau, _ = tau_delta(problem.projector, r * np.exp(-r) * np.exp(-1j * np.arctan2(y, x)))
    assert tau ** 2 >= 0.75
    assert problem.spec.rescale_real is False
    assert problem.spec.cluster_width == pytest.approx(problem.spec.region.s)


def test_real_fields_stay_out_of_oriented_span(rng):
    problem = hex_annulus_problem(65)
    x, y = problem.domain.coordinates()
    r = np.hypot(x, y)
    for field in (rng.standard_normal(problem.operator.dim), r * np.cos(np.arctan2(y, x)), np.ones(problem.operator.dim)):
        tau, _ = tau_delta(problem.projector, field)
        assert tau ** 2 <= 0.5 + 1e-9
    assert check_projector(problem.projector, trials=10).worst() <= 1e-10


def test_oriented_columns_prefers_primary():
    primary = np.array([[1.0], [1j]]) / np.sqrt(2.0)
    columns = oriented_columns(primary, primary.conj())
    assert columns.shape == (2, 1)
    assert abs(np.vdot(primary[:, 0], columns[:, 0])) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        oriented_columns(np.array([[1.0], [0.0]]), np.array([[1.0], [0.0]]))


def test_five_fold_field_is_close_to_symmetric_span():
    problem = c5_symmetry_problem(65)
    x, y = problem.domain.coordinates()
    r = np.hypot(x, y)
    tau, _ = tau_delta(problem.projector, r ** 5 * np.cos(5 * np.arctan2(y, x)))
    assert tau ** 2 >= 0.8
    assert tau_delta(problem.projector, np.ones(problem.operator.dim))[0] == pytest.approx(1.0)
    assert problem.metadata["zernike_functions"] == 28


# experiment builders

def test_delta_from_tau2():
    assert delta_from_tau2(0.9) == pytest.approx(math.sqrt(0.1))
    with pytest.raises(ValueError):
        delta_from_tau2(1.0)


def test_square_well_subspace():
    problem = square_well_problem(33)
    op, q, spec = problem
    assert tau_delta(q, np.ones(op.dim))[0] == pytest.approx(1.0)
    xx, yy = problem.domain.cell_grid()
    well = problem.domain.restrict((np.abs(xx) < 0.5) & (np.abs(yy) < 0.5))
    bump = np.where(well, np.arange(op.dim, dtype=float), 0.0)
    assert tau_delta(q, bump)[0] == pytest.approx(1.0)
    assert spec.delta_star == pytest.approx(math.sqrt(0.1))
    assert spec.region.s == pytest.approx(0.1)


def test_builders_check_resolution():
    with pytest.raises(ValueError):
        square_well_problem(32)
    with pytest.raises(ValueError):
        c5_symmetry_problem(64)
    with pytest.raises(ValueError):
        hex_annulus_problem(33)


def test_diag_demo_run():
    op, q, spec = diag_demo()
    report = run(op, q, spec)
    assert [round(a.eigenvalue, 12) for a in report.accepted] == [1.0, 2.0]


# graphs

def test_path_graph_problem():
    problem = graph_problem(path_graph_edges(3), subset=[1])
    expected = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    assert np.allclose(dense_materialize(problem.operator), expected)
    assert np.allclose(dense_materialize(problem.projector.as_hermitian_operator()), np.diag([0.0, 1.0, 0.0]))


@pytest.mark.parametrize("n", [3, 5, 8])
def test_complete_graph_spectrum(n):
    op = graph_laplacian(build_graph(complete_graph_edges(n)))
    values = np.linalg.eigvalsh(dense_materialize(op))
    assert values[0] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(values[1:], n)


def test_graph_potential_and_weights():
    op = graph_laplacian(build_graph([(0, 1, 2.0)]), potential=[1.0, 0.0])
    assert np.allclose(dense_materialize(op), [[3.0, -2.0], [-2.0, 2.0]])


def test_graph_input_errors():
    with pytest.raises(ValueError):
        build_graph([(0, 1, -1.0)])
    with pytest.raises(ValueError):
        build_graph([(0,)])
    with pytest.raises(ValueError):
        build_graph([(0, 5)], n_vertices=3)
    with pytest.raises(ProjectorError):
        graph_problem(path_graph_edges(3), subset=[])


def test_disconnected_graph_is_flagged(caplog):
    with caplog.at_level(logging.WARNING):
        problem = graph_problem([(0, 1), (2, 3)], subset=[0])
    assert problem.metadata["connected"] is False
    assert "disconnected" in caplog.text


def test_read_edge_list(tmp_path):
    path = tmp_path / "graph.txt"
    path.write_text("# triangle plus tail\n0 1 1.0\n1 2 2.5\n2 0 1.0\n2 3 1.0\n")
    graph = read_edge_list(path)
    assert graph.number_of_nodes() == 4
    assert graph[1][2]["weight"] == 2.5
    assert nx.is_connected(graph)


def test_read_edge_list_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 x 1.0\n")
    with pytest.raises(ValueError):
        read_edge_list(bad)
    empty = tmp_path / "empty.txt"
    empty.write_text("# nothing\n")
    with pytest.raises(ValueError):
        read_edge_list(empty)


def test_barbell_localizes_on_one_bell():
    problem = barbell_problem()
    op, q, spec = problem
    assert op.dim == 23
    report = run(op, q, spec)
    assert report.accepted
    for pair in report.accepted:
        assert pair.tau2 >= spec.tau2_threshold - 1e-12
        assert np.linalg.norm(pair.vector[10:]) <= 0.5


# random instances and catalog

@pytest.mark.parametrize("kind", PROJECTOR_KINDS)
def test_random_instance_kinds(kind):
    problem = random_instance(7, n=30, kind=kind)
    assert problem.projector.dim == 30
    assert check_projector(problem.projector, trials=20).worst() <= 1e-10
    again = random_instance(7, n=30, kind=kind)
    assert np.allclose(dense_materialize(problem.operator), dense_materialize(again.operator))


def test_random_instance_sparse_complex():
    problem = random_instance(3, n=50, kind="span", real=False, sparse=True)
    assert not problem.operator.is_real
    with pytest.raises(ValueError):
        random_instance(0, kind="nonsense")


def test_random_suite_cycles_kinds():
    suite = random_suite(10, n=20)
    assert [p.metadata["kind"] for p in suite[:5]] == list(PROJECTOR_KINDS)
    assert all(p.metadata["real"] for p in suite[:5])
    assert not any(p.metadata["real"] for p in suite[5:])


def test_catalog():
    catalog = default_catalog()
    assert {"diag_demo", "square_well", "c5_symmetry", "hex_annulus", "barbell", "random"} <= set(catalog.names())
    assert "seed" in catalog.parameters("random")
    assert catalog.build("barbell", {"bell_size": 4, "path_length": 1}).operator.dim == 9
    with pytest.raises(ValueError):
        catalog.get("missing")
    with pytest.raises(ValueError):
        catalog.build("diag_demo", {"size": 3})


def test_catalog_rejects_duplicates():
    catalog = ProblemCatalog()
    catalog.register("demo", diag_demo)
    with pytest.raises(ValueError):
        catalog.register("demo", diag_demo)


# experiment reproductions

@pytest.mark.slow
def test_square_well_reproduction():
    op, q, spec = square_well_problem()
    report = run(op, q, spec)
    first = report.candidates[:20]
    flags = [c.accepted for c in first]
    assert flags[0]
    block = flags.index(False)
    assert block >= 4
    isolated = [c for c in report.candidates[10:17] if c.accepted]
    assert [c.index for c in isolated] == [13]
    assert 0.9 <= isolated[0].tau2 <= 1.0
    assert not report.candidates[12].accepted
    assert not report.candidates[14].accepted


@pytest.mark.slow
def test_c5_symmetry_reproduction():
    op, q, spec = c5_symmetry_problem()
    report = run(op, q, spec)
    first = report.candidates[:60]
    assert 4 <= sum(c.accepted for c in first) <= 8
    rejected = [c.tau2 for c in first if not c.accepted]
    assert min(rejected) <= 0.05
    assert any(0.25 <= t <= 0.85 for t in rejected)


@pytest.mark.slow
def test_hex_annulus_reproduction():
    problem = hex_annulus_problem()
    op, q, spec = problem
    report = run(op, q, spec)
    accepted = [c for c in report.candidates[:20] if c.accepted]
    assert [c.index for c in accepted] == [2, 4, 8, 15]
    for cand in accepted:
        assert cand.residual_complex <= 0.1
        current = probability_current(problem.domain, cand.phi)
        assert current.uniform_sign_fraction(-1) >= 0.9

