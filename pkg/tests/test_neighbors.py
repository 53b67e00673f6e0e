from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from covsbm.neighbors import kth_distances, knn_radius, radius_envelopes, subgroup_radius

LINE = np.array([1.0, 2.0, 3.0, 4.0, 5.0])[:, None]


def test_symmetric_line():
    nb = knn_radius(LINE, [3.0], 3)
    assert nb.radius == 1.0
    assert nb.members.tolist() == [1, 2, 3]


def test_all_points():
    nb = knn_radius(LINE, [3.0], 5)
    assert nb.radius == 2.0
    assert nb.members.tolist() == [0, 1, 2, 3, 4]


def test_midpoint_tie_broken_by_index():
    nb = knn_radius(LINE, [2.5], 2)
    assert nb.radius == 0.5
    assert nb.members.tolist() == [1, 2]
    # three candidates at distance 1.5/0.5/0.5/1.5: k=3 takes the lower index of the tie
    nb3 = knn_radius(LINE, [2.5], 3)
    assert nb3.members.tolist() == [0, 1, 2]


def test_query_on_sample_point_is_member():
    nb = knn_radius(LINE, [4.0], 1)
    assert nb.radius == 0.0 and nb.members.tolist() == [3]


@pytest.mark.parametrize("k", [0, 6])
def test_k_out_of_range(k):
    with pytest.raises(ValueError):
        knn_radius(LINE, [3.0], k)


def test_empty_covariates():
    with pytest.raises(ValueError):
        knn_radius(np.empty((0, 1)), [0.0], 1)


def test_subgroup_radius_cases():
    labels = np.array([0, 1, 0, 1, 0])
    assert subgroup_radius(LINE, np.zeros(5, int), 0, [3.0], 3) == knn_radius(LINE, [3.0], 3).radius
    with pytest.raises(ValueError):
        subgroup_radius(LINE, labels, 2, [3.0], 1)
    # interleaved groups: brute force over members of group 1 (points 2 and 4)
    assert subgroup_radius(LINE, labels, 1, [3.0], 2) == 1.0
    assert subgroup_radius(LINE, labels, 0, [2.0], 2) == 1.0


def test_group_counts_sum_to_k():
    rng = np.random.default_rng(1)
    X = rng.random((100, 2))
    labels = rng.integers(0, 3, 100)
    nb = knn_radius(X, [0.5, 0.5], 17, labels, 3)
    assert nb.group_counts.sum() == 17
    assert np.array_equal(nb.group_counts, np.bincount(labels[nb.members], minlength=3))


points = arrays(np.float64, st.tuples(st.integers(1, 40), st.integers(1, 3)),
                elements=st.floats(-5, 5, allow_nan=False))


@given(points, st.data())
def test_members_and_radius_consistent(X, data):
    N, d = X.shape
    k = data.draw(st.integers(1, N))
    x = data.draw(arrays(np.float64, d, elements=st.floats(-5, 5)))
    nb = knn_radius(X, x, k)
    dist = np.sqrt(np.sum((X - x) ** 2, axis=1))
    assert len(nb.members) == k == len(set(nb.members.tolist()))
    inside = np.zeros(N, bool)
    inside[nb.members] = True
    assert np.all(dist[inside] <= nb.radius)
    assert np.all(dist[~inside] >= nb.radius)
    assert dist[nb.members].max() == nb.radius
    # brute force: k-th smallest distance
    assert nb.radius == np.sort(dist)[k - 1]


@given(points, st.data())
def test_radius_monotone_in_k(X, data):
    x = data.draw(arrays(np.float64, X.shape[1], elements=st.floats(-5, 5)))
    radii = [knn_radius(X, x, k).radius for k in range(1, len(X) + 1)]
    assert all(a <= b for a, b in zip(radii, radii[1:]))


@given(points, st.data())
def test_subgroup_radius_dominates(X, data):
    N = len(X)
    labels = np.asarray(data.draw(st.lists(st.integers(0, 1), min_size=N, max_size=N)))
    x = data.draw(arrays(np.float64, X.shape[1], elements=st.floats(-5, 5)))
    for h in (0, 1):
        for l in range(1, int(np.sum(labels == h)) + 1):
            assert subgroup_radius(X, labels, h, x, l) >= knn_radius(X, x, l).radius


def test_kth_distances_matches_knn_radius():
    rng = np.random.default_rng(2)
    X = rng.random((300, 2))
    Q = rng.random((20, 2))
    got = kth_distances(X, Q, 9)
    assert np.array_equal(got, [knn_radius(X, q, 9).radius for q in Q])


def test_upper_envelope_substitution():
    consts = {"c": 1.0, "T": 1.0, "b_X": 1.0, "U_X_bar": 1.0}
    env = radius_envelopes(consts, N=100, k=2, delta=0.1, d=1)
    assert env.R_upper == pytest.approx(0.02)


def test_lower_envelope_undefined_below_log_threshold():
    consts = {"c": 0.5, "T": 1.0, "b_X": 1.0, "U_X_bar": 1.0}
    env = radius_envelopes(consts, N=1000, k=50, delta=0.1, d=1)
    assert 12 * math.log(12 * 1000 / 0.1) > 50
    assert env.R_lower is None and not env.lower_applicable


def test_envelope_formulas_and_flags():
    consts = {"c": 0.5, "T": 1.0, "b_X": 1.0, "U_X_bar": 1.0}
    N, k, delta = 1000, 300, 0.1
    env = radius_envelopes(consts, N, k, delta, d=1)
    assert env.R_upper == pytest.approx(2 * k / (N * 1.0 * 0.5 * 2.0))
    assert env.R_lower == pytest.approx((k - 12 * math.log(12 * N / delta)) / (4 * N * 2.0))
    # 24 ln(120000) = 280.6 <= 300 <= T N b_X c V_1 / 2 = 500
    assert env.upper_applicable
