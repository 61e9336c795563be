import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asmr_fl.geometry import (
    DegenerateUpdateError,
    UpdateVector,
    cosine_distance,
    flatten,
    normalize,
    pairwise_distances,
    unflatten,
)

import oracles


def test_flatten_row_major_concatenation():
    u = flatten([np.array([[1, 2], [3, 4]]), np.array([5, 6])])
    np.testing.assert_array_equal(u.values, [1, 2, 3, 4, 5, 6])


def test_flatten_mapping_keeps_declared_order():
    u = flatten({"b": np.array([9.0]), "a": np.array([1.0, 2.0])})
    np.testing.assert_array_equal(u.values, [9, 1, 2])


def test_flatten_unflatten_round_trip(rng):
    params = [rng.standard_normal((3, 4)), rng.standard_normal(3), rng.standard_normal((2, 2, 2))]
    back = unflatten(flatten(params), [p.shape for p in params])
    for p, q in zip(params, back):
        assert np.array_equal(p, q)


def test_flatten_empty_rejected():
    with pytest.raises(ValueError):
        flatten([])


def test_flatten_non_finite_names_tensor():
    with pytest.raises(DegenerateUpdateError, match="bias"):
        flatten({"weights": np.ones(2), "bias": np.array([np.nan])})


def test_unflatten_size_mismatch():
    with pytest.raises(ValueError):
        unflatten(np.arange(5.0), [(2, 2)])


def test_update_vector_invariants():
    with pytest.raises(DegenerateUpdateError):
        UpdateVector(0, [])
    with pytest.raises(DegenerateUpdateError):
        UpdateVector(0, [1.0, np.inf])
    u = UpdateVector("a", [1, 2], round=3)
    assert len(u) == 2 and u.values.dtype == np.float64
    with pytest.raises(ValueError):
        u.values[0] = 5.0


def test_normalize_examples():
    np.testing.assert_allclose(normalize(np.array([3.0, 4.0])), [0.6, 0.8], atol=1e-15)
    e = np.array([0.0, 1.0, 0.0])
    np.testing.assert_array_equal(normalize(e), e)
    with pytest.raises(DegenerateUpdateError):
        normalize(np.zeros(2))


def test_normalize_keeps_update_identity():
    u = normalize(UpdateVector("c7", [0.0, 2.0], round=4))
    assert u.client_id == "c7" and u.round == 4
    np.testing.assert_array_equal(u.values, [0.0, 1.0])


@pytest.mark.parametrize("a, b, expected", [
    ([1, 0], [1, 0], 0.0),
    ([1, 0], [-1, 0], 2.0),
    ([1, 0], [0, 1], 1.0),
    ([1, 1], [1, 0], 1 - 1 / math.sqrt(2)),
])
def test_cosine_distance_examples(a, b, expected):
    assert cosine_distance(a, b) == pytest.approx(expected, abs=1e-12)
    assert cosine_distance(a, b) == pytest.approx(oracles.cos_dist(a, b), abs=1e-12)


def test_cosine_distance_errors():
    with pytest.raises(DegenerateUpdateError):
        cosine_distance([0, 0], [1, 0])
    with pytest.raises(ValueError):
        cosine_distance([1, 0], [1, 0, 0])


def test_pairwise_examples():
    np.testing.assert_allclose(pairwise_distances([np.array([1.0, 2.0])] * 2), np.zeros((2, 2)), atol=1e-15)
    D = pairwise_distances(list(np.eye(3)))
    np.testing.assert_allclose(D, 1.0 - np.eye(3), atol=1e-15)


def test_pairwise_matches_brute_force(rng):
    X = rng.standard_normal((5, 20))
    D = pairwise_distances(list(X))
    np.testing.assert_allclose(D, oracles.distance_matrix(X.tolist()), atol=1e-12)


def test_pairwise_names_offending_client():
    ups = [UpdateVector("ok", [1.0, 0.0]), UpdateVector("bad", [1.0, 0.0, 1.0])]
    with pytest.raises(ValueError, match="bad"):
        pairwise_distances(ups)
    with pytest.raises(DegenerateUpdateError, match="zero"):
        pairwise_distances([np.ones(2), np.zeros(2)])


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(2, 12), st.integers(2, 40))
def test_distance_matrix_invariants(seed, n, d):
    X = np.random.default_rng(seed).standard_normal((n, d))
    D = pairwise_distances(list(X))
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)
    assert D.min() >= 0 and D.max() <= 2


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_positive_scale_invariance(seed, alpha, beta):
    a, b = np.random.default_rng(seed).standard_normal((2, 30))
    assert cosine_distance(alpha * a, beta * b) == pytest.approx(cosine_distance(a, b), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(1e-6, 1e6))
def test_normalize_idempotent(seed, scale):
    v = scale * np.random.default_rng(seed).standard_normal(17)
    once = normalize(v)
    assert np.linalg.norm(once) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(normalize(once), once, atol=1e-12)
