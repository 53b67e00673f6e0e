from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from covsbm.model import (Box, ConstantPi, FunctionEdgeField, LinearPi, LogisticHomophily, ModelSpec,
                          PlantedPartition, builtin_fields, check_simplex, generate_network, make_model,
                          sample_adjacency, sample_communities, sigmoid, unit_ball_volume)


def _spec(edge, pi, d=1):
    return ModelSpec(edge.G, d, edge, pi, Box.unit(d))


def test_unit_ball_volume_known_values():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(np.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * np.pi / 3)


def test_degenerate_pi_gives_single_label():
    spec = _spec(PlantedPartition(2, 0.5, 0.1), ConstantPi([1.0, 0.0]))
    X = spec.sample_covariates(200, 1)
    g, theta = sample_communities(spec, X, 2)
    assert np.all(g == 0)
    assert np.all(theta.sum(axis=1) == 1)


def test_balanced_pi_label_fraction():
    spec = make_model("planted-partition", {"p": 0.5, "q": 0.1})
    X = spec.sample_covariates(100_000, 3)
    g, _ = sample_communities(spec, X, 4)
    # binomial sd is 0.0016 at this N
    assert abs(np.mean(g == 1) - 0.5) < 0.01


def test_linear_pi_regression_slope():
    pi = LinearPi([1.0, 0.0], [[-1.0], [1.0]])
    spec = _spec(PlantedPartition(2, 0.5, 0.1), pi)
    X = spec.sample_covariates(100_000, 5)
    g, _ = sample_communities(spec, X, 6)
    slope = np.polyfit(X[:, 0], (g == 1).astype(float), 1)[0]
    assert abs(slope - 1.0) < 0.05


def test_non_simplex_pi_rejected():
    with pytest.raises(ValueError, match="row"):
        check_simplex(np.array([[0.5, 0.5], [0.7, 0.7]]))


@pytest.mark.parametrize("value", [0.0, 1.0])
def test_deterministic_edges(value):
    spec = _spec(PlantedPartition(1, value, value), ConstantPi([1.0]))
    X = spec.sample_covariates(30, 0)
    A = sample_adjacency(spec, X, np.zeros(30, dtype=int), 1)
    expected = (np.ones((30, 30)) - np.eye(30)) * value
    assert np.array_equal(A, expected)


def test_edge_density_constant_field():
    spec = _spec(PlantedPartition(1, 0.3, 0.3), ConstantPi([1.0]))
    X = spec.sample_covariates(2000, 0)
    A = sample_adjacency(spec, X, np.zeros(2000, dtype=int), 7)
    density = A[np.triu_indices(2000, 1)].mean()
    assert abs(density - 0.3) < 0.01


def test_out_of_range_probability_names_pair():
    field = FunctionEdgeField(lambda x, xp: np.array([[1.5]]), 1, symmetrize=False)
    spec = _spec(field, ConstantPi([1.0]))
    with pytest.raises(ValueError, match=r"pair \(0, 1\)"):
        sample_adjacency(spec, np.zeros((3, 1)), np.zeros(3, dtype=int), 0)


def test_user_field_symmetrised_with_warning():
    with pytest.warns(UserWarning):
        field = FunctionEdgeField(lambda x, xp: np.array([[0.1, 0.2], [0.3, 0.4]]) + 0 * x.sum(), 2)
    B = field.matrix(np.array([0.1]), np.array([0.2]))
    assert np.allclose(B, B.T)


def test_planted_partition_constants():
    spec = make_model("planted-partition", {"p": 0.5, "q": 0.1, "rho": 1.0})
    assert spec.constants["Delta"] == 0.5
    assert spec.constants["l_B"] == 0.0
    assert np.array_equal(spec.B([0.1], [0.9]), spec.B([0.5], [0.5]))


def test_logistic_beta_zero_collapses_to_planted():
    edge, _ = builtin_fields("logistic-homophily", {"alpha": [[1.0, -1.0], [-1.0, 1.0]], "beta": 0.0})
    p, q = sigmoid(1.0), sigmoid(-1.0)
    planted = PlantedPartition(2, float(p), float(q))
    for x, xp in [([0.0], [1.0]), ([0.3], [0.4])]:
        assert np.allclose(edge.matrix(x, xp), planted.matrix(x, xp), atol=1e-15)
    assert edge.lipschitz(Box.unit(1)) == 0.0


def test_logistic_lipschitz_certified_on_grid():
    edge = LogisticHomophily([[0.0]], beta=1.0)
    lip = edge.lipschitz(Box.unit(1))
    grid = np.linspace(0, 1, 100)
    xx, yy = np.meshgrid(grid, grid, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    vals = sigmoid(-np.abs(pts[:, 0] - pts[:, 1]))
    # all pairs of grid pairs in the concatenated 2-d norm, on a random subsample
    rng = np.random.default_rng(0)
    i, j = rng.integers(0, len(pts), (2, 200_000))
    keep = i != j
    dist = np.linalg.norm(pts[i[keep]] - pts[j[keep]], axis=1)
    ratio = np.abs(vals[i[keep]] - vals[j[keep]]) / dist
    # neighbouring grid points give the steepest ratios
    step = grid[1] - grid[0]
    nb = np.abs(np.diff(vals.reshape(100, 100), axis=0)) / step
    assert lip >= ratio.max()
    assert lip >= nb.max()


def test_logistic_delta_bounds_grid_minmax(logistic):
    grid = np.linspace(0, 1, 25)
    worst = min(np.min(np.max(logistic.B([a], [b]), axis=1)) for a in grid for b in grid)
    assert logistic.constants["Delta"] <= worst + 1e-15


def test_rejects_asymmetric_alpha():
    with pytest.raises(ValueError):
        LogisticHomophily([[1.0, 0.0], [1.0, 1.0]], 1.0)


def test_unknown_model_name():
    with pytest.raises(ValueError, match="unknown model"):
        builtin_fields("nope", {})


@given(st.integers(0, 2**31 - 1), st.integers(5, 40))
def test_adjacency_symmetric_binary_zero_diagonal(seed, N):
    spec = make_model("logistic-homophily", {"alpha": [[1.0, -1.0], [-1.0, 1.0]], "beta": 1.0})
    net = generate_network(spec, N, seed)
    A = net.A
    assert np.array_equal(A, A.T)
    assert set(np.unique(A)) <= {0, 1}
    assert np.all(np.diag(A) == 0)
    assert np.all(net.theta.sum(axis=1) == 1)


@given(st.integers(0, 2**31 - 1))
def test_generation_is_bitwise_reproducible(seed):
    spec = make_model("planted-partition", {"p": 0.5, "q": 0.1})
    a, b = generate_network(spec, 50, seed), generate_network(spec, 50, seed)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.A, b.A) and np.array_equal(a.g, b.g)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 1), st.integers(0, 1))
def test_builtin_symmetry_constraint(x, xp, g, h):
    spec = make_model("logistic-homophily", {"alpha": [[1.5, -0.5], [-0.5, 0.5]], "beta": 3.0})
    assert spec.B([x], [xp])[g, h] == spec.B([xp], [x])[h, g]


def test_induced_subgraph_sampling_matches_full_law():
    spec = make_model("planted-partition", {"p": 0.6, "q": 0.2})
    X = spec.sample_covariates(40, 0)
    g, _ = sample_communities(spec, X, 1)
    nodes = np.array([3, 7, 11, 20])
    A = sample_adjacency(spec, X, g, 2, nodes=nodes)
    assert A.shape == (4, 4)
    assert np.all(np.diag(A) == 0) and np.array_equal(A, A.T)


def test_generator_matches_edge_probabilities_in_bins():
    """Empirical edge frequencies per (community pair, covariate bin pair) within 3 binomial SE."""
    spec = make_model("logistic-homophily", {"alpha": [[1.0, -1.0], [-1.0, 1.0]], "beta": 2.0})
    net = generate_network(spec, 5000, 2024)
    X, g = net.X[:, 0], net.g
    iu, ju = np.triu_indices(net.N, 1)
    a = net.A[iu, ju].astype(float)
    p = spec.edge.pairwise(X[:, None], g, X[:, None], g)[iu, ju]
    bins = np.minimum((X * 4).astype(int), 3)
    # unordered cell key (community, bin) x (community, bin)
    ki, kj = g[iu] * 4 + bins[iu], g[ju] * 4 + bins[ju]
    cell = np.minimum(ki, kj) * 8 + np.maximum(ki, kj)
    n = np.bincount(cell, minlength=64)
    obs = np.bincount(cell, weights=a, minlength=64)
    exp = np.bincount(cell, weights=p, minlength=64)
    var = np.bincount(cell, weights=p * (1 - p), minlength=64)
    live = n > 0
    z = np.abs(obs[live] - exp[live]) / np.sqrt(var[live])
    assert live.sum() == 36
    # 36 cells; more than two 3-SE excursions would be a generator bug
    assert np.sum(z > 3) <= 2, z


def test_model_dict_roundtrip(logistic):
    again = ModelSpec.from_dict(logistic.to_dict())
    assert again.to_dict() == logistic.to_dict()
    assert np.array_equal(again.B([0.2], [0.7]), logistic.B([0.2], [0.7]))
