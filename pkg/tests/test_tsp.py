import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obstacle_realize.metric import FiniteMetric, random_metric, uniform_metric
from obstacle_realize.tsp import (
    TooLarge, Tour, check_tour, reduction_harness, tour_length, tsp_bruteforce, tsp_exact,
    tsp_heuristic, tsp_with_obstacles,
)
from obstacle_realize.walls import ObstacleSet


def euclid(P):
    P = np.asarray(P, float)
    return np.linalg.norm(P[:, None] - P[None], axis=2)


def test_unit_square():
    t = tsp_exact(euclid([[0, 0], [1, 1], [1, 0], [0, 1]]))
    assert t.length == pytest.approx(4.0)
    assert t.order == [0, 2, 1, 3]


def test_uniform():
    for n in (2, 3, 5, 9):
        assert tsp_exact(uniform_metric(n)).length == pytest.approx(n if n > 2 else 2)


def test_tiny():
    assert tsp_exact(np.zeros((1, 1))).length == 0.0
    assert tsp_exact(np.array([[0, 3.0], [3.0, 0]])).length == 6.0


@settings(max_examples=100)
@given(st.integers(3, 8), st.integers(0, 10**6))
def test_matches_bruteforce(n, seed):
    D = euclid(np.random.default_rng(seed).uniform(size=(n, 2)))
    a, b = tsp_exact(D), tsp_bruteforce(D)
    assert a.length == pytest.approx(b.length, rel=1e-12)
    check_tour(D, a)


@settings(max_examples=20)
@given(st.integers(4, 12), st.integers(0, 10**6))
def test_heuristic_quality(n, seed):
    D = euclid(np.random.default_rng(seed).uniform(size=(n, 2)))
    h = tsp_heuristic(D, seed=seed)
    check_tour(D, h)
    assert h.length <= 1.5 * tsp_exact(D).length + 1e-12
    assert h.length <= h.certificate["nearest_neighbour"] + 1e-12


def test_heuristic_deterministic():
    D = euclid(np.random.default_rng(3).uniform(size=(40, 2)))
    assert tsp_heuristic(D, seed=7).order == tsp_heuristic(D, seed=7).order


def test_limits_and_checks():
    with pytest.raises(TooLarge):
        tsp_exact(uniform_metric(19))
    D = uniform_metric(4).dist
    with pytest.raises(ValueError):
        check_tour(D, Tour([0, 1, 1, 2], 4.0, "x"))
    with pytest.raises(ValueError):
        check_tour(D, Tour([0, 1, 2, 3], 5.0, "x"))
    assert tour_length(D, [0, 1, 2, 3]) == 4.0


def test_exact_n16_fast():
    import time

    D = euclid(np.random.default_rng(0).uniform(size=(16, 2)))
    t0 = time.perf_counter()
    tsp_exact(D)
    assert time.perf_counter() - t0 < 30


def test_tour_with_obstacles():
    sq = np.array([[[-0.5, -0.5, 0], [0.5, -0.5, 0], [0.5, 0.5, 0], [-0.5, 0.5, 0]]], float)
    obs = ObstacleSet(squares=sq)
    t = tsp_with_obstacles([[0, 0, -1], [0, 0, 1]], obs, h=0.1)
    assert t.length == pytest.approx(2 * math.sqrt(5))
    assert t.certificate["graph_nodes"] > 2
    free = tsp_with_obstacles([[0, 0, -1], [0, 0, 1]], ObstacleSet(), h=0.1)
    assert free.length == pytest.approx(4.0)


@settings(max_examples=10)
@given(st.integers(2, 6), st.floats(0.1, 0.9), st.integers(0, 10**6))
def test_reduction_harness(n, eps, seed):
    m = random_metric(n, np.random.default_rng(seed))
    art, rep = reduction_harness(m, eps)
    assert rep["within"]
    assert rep["opt_metric"] == pytest.approx(tsp_exact(m).length, rel=1e-9)
    assert np.all(art["upper"] >= art["lower"] - 1e-9)
    assert rep["eta"] == 0.0


def test_harness_spread_guard():
    D = np.array([[0, 1, 1e6], [1, 0, 1e6], [1e6, 1e6, 0]], float)
    with pytest.raises(ValueError):
        reduction_harness(FiniteMetric([0, 1, 2], D), 0.5, max_spread_exponent=2)
