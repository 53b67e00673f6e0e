from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from covsbm.clustering import ClusteringConfig, cluster_neighborhoods, kmeans_rows, procrustes, top_svd
from covsbm.estimators import align_to_truth
from covsbm.laplacian import build_localized, laplacian, population_laplacians
from covsbm.model import generate_network, make_model
from covsbm.neighbors import knn_radius


def test_top_svd_rank_one():
    dec = top_svd(0.5 * np.ones((2, 2)), 1)
    assert dec.sigma[0] == pytest.approx(1.0)
    assert np.allclose(dec.U[:, 0], np.ones(2) / np.sqrt(2))


def test_top_svd_diagonal():
    dec = top_svd(np.diag([0.9, 0.4]), 2)
    assert np.allclose(dec.sigma, [0.9, 0.4])
    assert np.allclose(dec.U, np.eye(2)) and np.allclose(dec.V, np.eye(2))


def test_top_svd_matches_dense_oracle():
    L = np.random.default_rng(3).normal(size=(8, 8))
    dec = top_svd(L, 3)
    s = np.linalg.svd(L, compute_uv=False)
    assert np.allclose(dec.sigma, s[:3], atol=1e-9)
    assert dec.next_sigma == pytest.approx(s[3])
    # subspaces agree with the oracle projector
    U, _, Vt = np.linalg.svd(L)
    assert np.allclose(dec.U @ dec.U.T, U[:, :3] @ U[:, :3].T, atol=1e-9)
    assert np.allclose(dec.V @ dec.V.T, Vt[:3].T @ Vt[:3], atol=1e-9)


def test_top_svd_rank_deficient_flagged():
    dec = top_svd(np.outer([1.0, 2.0, 3.0], [1.0, 0.0, 1.0]), 2)
    assert dec.rank_deficient and dec.sigma[1] == pytest.approx(0.0, abs=1e-12)


def test_top_svd_too_many_components():
    with pytest.raises(ValueError):
        top_svd(np.eye(2), 3)


@given(st.integers(2, 10), st.integers(2, 10), st.integers(0, 2**32 - 1), st.data())
def test_svd_orthonormal_and_consistent(m, n, seed, data):
    G = data.draw(st.integers(1, min(m, n)))
    L = np.random.default_rng(seed).normal(size=(m, n))
    dec = top_svd(L, G)
    assert np.allclose(dec.U.T @ dec.U, np.eye(G), atol=1e-10)
    assert np.allclose(dec.V.T @ dec.V, np.eye(G), atol=1e-10)
    assert np.allclose(L @ dec.V, dec.U * dec.sigma, atol=1e-8)
    assert np.all(np.diff(dec.sigma) <= 0)
    for c in range(G):
        col = dec.U[:, c]
        assert col[np.flatnonzero(np.abs(col) > 1e-12)[0]] > 0


def test_kmeans_separated_points():
    res = kmeans_rows(np.array([[0.0], [0.0], [10.0], [10.0]]), ClusteringConfig(2))
    assert res.labels[0] == res.labels[1] != res.labels[2] == res.labels[3]
    assert res.objective == 0.0


def test_kmeans_identical_rows_reseeds():
    res = kmeans_rows(np.ones((5, 2)), ClusteringConfig(2, restarts=3))
    assert res.objective == 0.0
    assert res.reseeded >= 1
    assert set(res.labels.tolist()) == {0, 1}


def test_kmeans_too_few_rows():
    with pytest.raises(ValueError):
        kmeans_rows(np.zeros((1, 2)), ClusteringConfig(2))


def test_config_rejects_zero_restarts():
    with pytest.raises(ValueError):
        ClusteringConfig(2, restarts=0)


def test_kmeans_recovers_separated_blobs():
    centers = np.array([[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]])
    for seed in range(100):
        rng = np.random.default_rng(seed)
        truth = rng.integers(0, 3, 60)
        truth[:3] = [0, 1, 2]
        M = centers[truth] + rng.normal(scale=0.5, size=(60, 2))
        res = kmeans_rows(M, ClusteringConfig(3, restarts=20, seed=seed))
        assert align_to_truth(res.labels, truth, 3).measure == 0.0


def test_kmeans_epsilon_report():
    rng = np.random.default_rng(0)
    res = kmeans_rows(rng.normal(size=(50, 2)), ClusteringConfig(4, restarts=8, seed=1))
    assert res.epsilon >= 0
    assert res.objective == min(res.restart_objectives)
    assert res.within(res.epsilon) == 1.0


def test_kmeans_deterministic():
    M = np.random.default_rng(5).normal(size=(40, 3))
    a, b = kmeans_rows(M, ClusteringConfig(3, seed=9)), kmeans_rows(M, ClusteringConfig(3, seed=9))
    assert np.array_equal(a.labels, b.labels) and a.objective == b.objective


def test_single_community():
    co = cluster_neighborhoods(np.random.default_rng(0).random((6, 6)), ClusteringConfig(1))
    assert np.all(co.labels_x == 0) and np.all(co.labels_xp == 0)


def _population(spec, seed, k=40):
    net = generate_network(spec, 300, seed)
    ex, exp_ = knn_radius(net.X, [0.3], k).members, knn_radius(net.X, [0.7], k).members
    pop = population_laplacians(spec, net.X, net.g, ex, exp_, [0.3], [0.7], 1.0)
    return pop


def test_noiseless_population_recovers_truth(planted):
    pop = _population(planted, 1)
    co = cluster_neighborhoods(pop.L_xx, ClusteringConfig(2))
    assert align_to_truth(co.labels_x, pop.labels_x, 2).measure == 0.0
    assert align_to_truth(co.labels_xp, pop.labels_xp, 2).measure == 0.0
    # rows of the population singular vectors are constant within communities
    assert co.kmeans_x.objective == pytest.approx(0.0, abs=1e-20)


def test_population_centroid_distance(planted):
    pop = _population(planted, 2)
    dec = top_svd(pop.L_xx, 2)
    n = np.bincount(pop.labels_x, minlength=2)
    c0 = dec.U[pop.labels_x == 0][0]
    c1 = dec.U[pop.labels_x == 1][0]
    assert np.linalg.norm(c0 - c1) == pytest.approx(np.sqrt(1 / n[0] + 1 / n[1]), abs=1e-9)


def test_procrustes_recovers_rotation():
    rng = np.random.default_rng(4)
    B = np.linalg.qr(rng.normal(size=(10, 3)))[0]
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    A = B @ Q
    assert np.allclose(procrustes(A, B), Q, atol=1e-10)


def test_centroid_chain_inequality(planted):
    """||Ubar - Upop Q||_F <= 2 ||U - Upop Q||_F for the K-means centroid matrix."""
    spec = planted
    for seed in range(10):
        net = generate_network(spec, 600, seed)
        ex, exp_ = knn_radius(net.X, [0.3], 60).members, knn_radius(net.X, [0.7], 60).members
        lap = laplacian(build_localized(net.A, ex, exp_), 0.0)
        pop = population_laplacians(spec, net.X, net.g, ex, exp_, [0.3], [0.7], 0.0)
        co = cluster_neighborhoods(lap.L, ClusteringConfig(2, seed=seed))
        P = top_svd(pop.L_xx, 2).U
        U = co.decomposition.U
        Q = procrustes(U, P)
        U_bar = co.kmeans_x.centroids[co.labels_x]
        assert np.linalg.norm(U_bar - P @ Q) <= 2 * np.linalg.norm(U - P @ Q) + 1e-12
