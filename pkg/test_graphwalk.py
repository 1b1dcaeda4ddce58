"""
Tests for graphs, one-step matrices and the subordinated walk
"""
from pathlib import Path

import numpy as np
import pytest

from pdtp.counting import state_distribution
from pdtp.errors import GraphError, IntegrityError
from pdtp.graphwalk import (
    NAMED_GRAPHS,
    Graph,
    StochasticMatrix,
    complete_graph,
    ct_transition_matrix,
    dtrw_matrix,
    from_edge_list,
    named_graph,
    occupation_row,
    one_step_matrix,
    random_connected_graph,
    read_edge_list,
    star_graph,
    stationary_distribution,
    triangle,
    write_matrix_csv,
)
from pdtp.models import CtParams, PdtpParams, Route

FIXTURES = Path(__file__).parent / "fixtures"
PARAMS = PdtpParams(alpha=0.5, nu=1.0, xi=0.5)


def test_edge_list_examples():
    k2 = from_edge_list([(0, 1)], 2)
    np.testing.assert_array_equal(k2.degrees, [1, 1])
    tri = from_edge_list([(0, 1), (1, 2), (2, 0), (1, 0)], 3)
    np.testing.assert_array_equal(tri.degrees, [2, 2, 2])
    assert tri.edges() == [(0, 1), (0, 2), (1, 2)]


@pytest.mark.parametrize("edges, N", [
    ([(0, 1)], 3),
    ([(0, 0), (0, 1)], 2),
    ([(0, 2)], 2),
    ([], 1),
])
def test_invalid_graphs(edges, N):
    with pytest.raises(GraphError):
        from_edge_list(edges, N)


def test_adjacency_validation():
    with pytest.raises(GraphError):
        Graph(np.array([[0, 1], [0, 0]]))
    with pytest.raises(GraphError):
        Graph(np.array([[0, 2], [2, 0]]))


@pytest.mark.parametrize("name, N, degrees", [
    ("k2", 2, [1, 1]),
    ("triangle", 3, [2, 2, 2]),
    ("star3", 4, [3, 1, 1, 1]),
    ("cycle5", 5, [2, 2, 2, 2, 2]),
])
def test_read_fixtures(name, N, degrees):
    g = read_edge_list(FIXTURES / f"{name}.edges")
    assert g.N == N
    assert g.name == name
    np.testing.assert_array_equal(g.degrees, degrees)


def test_read_disconnected_fixture():
    with pytest.raises(GraphError) as info:
        read_edge_list(FIXTURES / "disconnected.edges")
    assert "disconnected" in info.value.message


@pytest.mark.parametrize("text", ["0 1\n", "N 3\n0 1 2\n", "N x\n", "# only a comment\n"])
def test_malformed_edge_files(tmp_path, text):
    path = tmp_path / "bad.edges"
    path.write_text(text)
    with pytest.raises(GraphError):
        read_edge_list(path)


def test_named_graphs():
    for name in NAMED_GRAPHS:
        g = named_graph(name)
        assert g.N >= 2
    assert named_graph("gnp10").N == 10
    np.testing.assert_array_equal(
        random_connected_graph(10, 0.4, seed=0).adjacency, named_graph("gnp10").adjacency
    )
    with pytest.raises(GraphError):
        named_graph("petersen")


def test_one_step_examples():
    np.testing.assert_array_equal(one_step_matrix(complete_graph(2)).values, [[0.0, 1.0], [1.0, 0.0]])
    h = one_step_matrix(triangle()).values
    np.testing.assert_allclose(h, [[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])
    star = one_step_matrix(star_graph(3)).values
    np.testing.assert_allclose(star[0], [0.0, 1 / 3, 1 / 3, 1 / 3])
    np.testing.assert_allclose(star[1], [1.0, 0.0, 0.0, 0.0])


def test_stationary_distribution():
    np.testing.assert_allclose(stationary_distribution(star_graph(3)), [0.5, 1 / 6, 1 / 6, 1 / 6])
    np.testing.assert_allclose(stationary_distribution(named_graph("cycle5")), np.full(5, 0.2))
    for name in NAMED_GRAPHS:
        g = named_graph(name)
        pi = stationary_distribution(g)
        np.testing.assert_allclose(pi @ one_step_matrix(g).values, pi, atol=1e-14)


def test_stochastic_matrix_checks():
    with pytest.raises(IntegrityError):
        StochasticMatrix(np.array([[0.5, 0.4], [0.5, 0.5]]))
    with pytest.raises(IntegrityError):
        StochasticMatrix(np.array([[1.1, -0.1], [0.5, 0.5]]))
    clamped = StochasticMatrix(np.array([[1.0 + 1e-13, -1e-13], [0.5, 0.5]]))
    assert clamped.values.min() == 0.0


@pytest.mark.parametrize("name", list(NAMED_GRAPHS))
def test_walk_starts_at_identity(name):
    g = named_graph(name)
    np.testing.assert_array_equal(dtrw_matrix(g, PARAMS, 0).values, np.eye(g.N))


@pytest.mark.parametrize("name", list(NAMED_GRAPHS))
@pytest.mark.parametrize("t", [1, 7, 30])
def test_walk_matrix_integrity(name, t):
    g = named_graph(name)
    pt = dtrw_matrix(g, PARAMS, t)
    assert pt.row_sum_residual() <= 1e-10
    assert pt.detailed_balance_residual(g.degrees) <= 1e-10
    assert pt.spectral_radius() <= 1.0 + 1e-10
    assert pt.commutator_residual(one_step_matrix(g)) <= 1e-10
    assert np.all(pt.values >= 0)


@pytest.mark.slow
@pytest.mark.parametrize("name", list(NAMED_GRAPHS))
def test_walk_matrix_integrity_full_range(name):
    g = named_graph(name)
    np.testing.assert_array_equal(dtrw_matrix(g, PARAMS, 0).values, np.eye(g.N))
    for t in range(1, 65):
        pt = dtrw_matrix(g, PARAMS, t)
        assert pt.row_sum_residual() <= 1e-10
        assert pt.detailed_balance_residual(g.degrees) <= 1e-10
        assert np.all(pt.values >= 0)


def test_k2_parity():
    g = complete_graph(2)
    for t in (1, 4, 9):
        probs = state_distribution(PARAMS, t).probs
        pt = dtrw_matrix(g, PARAMS, t).values
        assert pt[0, 0] == pytest.approx(probs[0::2].sum(), abs=1e-13)
        assert pt[0, 1] == pytest.approx(probs[1::2].sum(), abs=1e-13)


def test_triangle_binomial_case():
    g = triangle()
    p = PdtpParams(alpha=1.0, nu=1.0, xi=1.0)
    h = one_step_matrix(g).values
    expected = 0.25 * np.eye(3) + 0.5 * h + 0.25 * h @ h
    np.testing.assert_allclose(dtrw_matrix(g, p, 2).values, expected, atol=1e-15)


def test_occupation_row():
    g = complete_graph(2)
    p = PdtpParams(alpha=1.0, nu=1.0, xi=1.0)
    np.testing.assert_array_equal(occupation_row(g, p, 0, 1), [0.0, 1.0])
    np.testing.assert_allclose(occupation_row(g, p, 1, 0), [0.5, 0.5], atol=1e-15)
    with pytest.raises(GraphError):
        occupation_row(g, p, 1, 2)


def _distance_to_stationary(g, p, t):
    pt = dtrw_matrix(g, p, t, Route.ORACLE).values
    return float(np.max(np.abs(pt - stationary_distribution(g)[None, :])))


@pytest.mark.slow
def test_walk_approaches_stationarity():
    g = triangle()
    far = _distance_to_stationary(g, PARAMS, 128)
    near = _distance_to_stationary(g, PARAMS, 512)
    assert near < far
    assert near <= 0.025
    assert _distance_to_stationary(g, PARAMS, 1024) <= 0.02


def test_ct_transition_matrix_poisson_limit():
    g = complete_graph(2)
    ct = CtParams(alpha=1.0, nu=1.0, xi0=1.0)
    pt = ct_transition_matrix(g, ct, 1.0)
    # Poisson(1) parity: P(N even) = (1 + e^-2) / 2
    assert pt.values[0, 0] == pytest.approx((1.0 + np.exp(-2.0)) / 2.0, abs=1e-9)
    assert pt.row_sum_residual() <= 1e-9


def test_matrix_csv(tmp_path):
    target = tmp_path / "p.csv"
    write_matrix_csv(one_step_matrix(triangle()), target)
    rows = target.read_text().splitlines()
    assert rows[0] == "0,0.5,0.5"
    assert len(rows) == 3
