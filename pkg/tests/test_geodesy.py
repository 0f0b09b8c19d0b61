import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obstacle_realize.geodesy import (
    BudgetExceeded, InvalidDimension, Unreachable, Visibility, apsp, approx_geodesic, beta,
    covering_template, doubling_cover, falsify_separation, geodesic_matrix, visible,
)
from obstacle_realize.metric import validate_metric
from obstacle_realize.walls import ObstacleSet, flat_wall


def square_obstacle(half=1.0, z=0.0):
    c = np.array([[-half, -half, z], [half, -half, z], [half, half, z], [-half, half, z]])
    return ObstacleSet(squares=c[None])


def random_boxes(rng, k, lo=-4, hi=4):
    """k disjoint axis-parallel boxes by rejection sampling."""
    out = []
    while len(out) < k:
        a = rng.uniform(lo, hi, 3)
        b = a + rng.uniform(0.3, 1.5, 3)
        if all(np.any(b + 0.05 < o[0]) or np.any(o[1] + 0.05 < a) for o in out):
            out.append((a, b))
    return ObstacleSet(boxes=np.array(out))


def test_beta_values():
    assert beta(2, 1) == pytest.approx(1 + 4 / math.pi)
    assert beta(3, 1) == 1 + 8 * 27
    assert beta(3, 0.5) == 1 + 16 * 27
    with pytest.raises(InvalidDimension):
        beta(1, 1)
    with pytest.raises(InvalidDimension):
        beta(2.5, 1)
    with pytest.raises(ValueError):
        beta(3, 0)


def test_visibility_predicates():
    obs = square_obstacle()
    assert not visible([0, 0, 1], [0, 0, -1], obs)
    assert visible([0, 0, 1], [0, 0, 0.5], obs)
    assert visible([2, 0, 1], [2, 0, -1], obs)
    vis = Visibility(ObstacleSet(boxes=np.array([[[0, 0, 0], [1, 1, 1]]], float)))
    assert vis.inside_solid(np.array([[0.5, 0.5, 0.5], [2, 2, 2]])).tolist() == [True, False]


def test_square_calibration_exact():
    r = approx_geodesic([0, 0, 1], [0, 0, -1], square_obstacle(), h=0.5)
    assert r.length == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    assert len(r.polyline) == 3


def test_offcentre_calibration():
    # the optimal bend point (1, 0, 0) is a sample for h = 1/2**k
    r = approx_geodesic([0, 0, 1], [0.5, 0, -2], square_obstacle(), h=0.25)
    exact = math.hypot(1, 1) + math.hypot(0.5, 2)
    assert r.length == pytest.approx(exact, abs=1e-12)


def test_monotone_in_h():
    obs = square_obstacle()
    p, q = [0.3, 0.1, 1.0], [-0.2, 0.4, -0.7]
    lengths = [approx_geodesic(p, q, obs, h=2.0**-k).length for k in range(0, 5)]
    assert all(b <= a + 1e-12 for a, b in zip(lengths, lengths[1:]))
    assert lengths[-1] >= np.linalg.norm(np.subtract(p, q))


def test_no_obstacles_is_euclidean():
    r = approx_geodesic([0, 0, 0], [3, 4, 0], ObstacleSet(), h=0.1)
    assert r.length == 5.0


def test_unreachable_inside_box():
    obs = ObstacleSet(boxes=np.array([[[-1, -1, -1], [1, 1, 1]]], float))
    with pytest.raises(Unreachable):
        approx_geodesic([0, 0, 0], [3, 0, 0], obs, h=0.5)


def test_budget():
    with pytest.raises(BudgetExceeded):
        approx_geodesic([0, 0, 1], [0, 0, -1], square_obstacle(), h=1e-3, node_cap=100)


def test_flat_wall_falsification():
    wall = flat_wall(2)
    g = np.linspace(0, 1, 6)
    base = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    inner = np.c_[base, np.zeros(len(base))]
    outer = np.c_[base, np.full(len(base), 0.05)]
    short = falsify_separation(inner, outer, wall, L=0.24, h=0.01)
    assert not short.falsified and "NotFalsifiedAt" in str(short)
    long = falsify_separation(inner, outer, wall, L=0.6, h=0.01)
    assert long.falsified and long.length < 0.6
    assert long.length >= 0.24


def test_apsp_equals_pairwise():
    obs = square_obstacle()
    sites = np.array([[0, 0, 1], [0, 0, -1], [2, 0, 0], [0.5, 0.5, 2]], float)
    D = apsp(sites, obs, h=0.5)
    assert D[0, 1] == pytest.approx(2 * math.sqrt(2))
    for i in range(4):
        for j in range(i + 1, 4):
            assert D[i, j] == pytest.approx(approx_geodesic(sites[i], sites[j], obs, 0.5).length, abs=1e-9)


@settings(max_examples=8)
@given(st.integers(0, 10_000))
def test_apsp_is_metric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    obs = random_boxes(rng, 3)
    vis = Visibility(obs)
    sites = []
    while len(sites) < 5:
        s = rng.uniform(-5, 6, 3)
        if not vis.inside_solid(s[None])[0]:
            sites.append(s)
    sites = np.array(sites)
    D = apsp(sites, obs, h=0.5)
    validate_metric(D)
    E = np.linalg.norm(sites[:, None] - sites[None], axis=2)
    iu = np.triu_indices(5, 1)
    ratio = D[iu] / E[iu]
    assert np.all(ratio >= 1 - 1e-12)
    # boxes of aspect <= 5 are at least 1/5-fat
    assert np.all(ratio <= beta(3, 1 / 5))


def test_geodesic_matrix_sources():
    obs = square_obstacle()
    pts = np.array([[0, 0, 1], [0, 0, -1], [3, 0, 0]], float)
    D, nodes = geodesic_matrix(pts, obs, 0.5, sources=[1])
    assert D.shape == (1, 3) and D[0, 1] == 0 and nodes > 3


def test_covering_template():
    T = covering_template(1.0)
    rng = np.random.default_rng(1)
    v = rng.normal(size=(20000, 3))
    v *= (rng.uniform(size=(20000, 1)) ** (1 / 3)) / np.linalg.norm(v, axis=1, keepdims=True)
    from scipy.spatial import cKDTree

    assert cKDTree(T).query(v)[0].max() <= 0.5 + 1e-12
    assert 30 <= len(T) <= 60


def test_doubling_cover_free_space():
    reps, rep = doubling_cover(np.zeros(3), 1.0, ObstacleSet(), alpha=1.0, h=0.1)
    assert rep["covered"] == 1.0 and rep["levels"] == 1
    assert len(reps) <= rep["bound"]


def test_doubling_cover_with_obstacle():
    obs = ObstacleSet(boxes=np.array([[[0.2, -0.3, -0.3], [0.6, 0.3, 0.3]]], float))
    reps, rep = doubling_cover(np.zeros(3), 1.0, obs, alpha=0.5, h=0.2, beta_value=2.0, verify_samples=60)
    assert rep["covered"] == 1.0
    assert rep["levels"] == math.ceil(math.log2(4)) + 1
    assert not Visibility(obs).inside_solid(reps).any()
