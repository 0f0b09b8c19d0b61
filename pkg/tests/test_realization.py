import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obstacle_realize.metric import FiniteMetric, random_metric, rescale_to_min, uniform_metric
from obstacle_realize.realization import (
    JOINT_PATH, MissingTangencyMetadata, VertLengthNonpositive, hole_y, layout_surface, one_hop_lower_bound,
    path_length, plan_tubes, realize, site, tetrahedralize, vert_length, witness_length, witness_path,
)
from obstacle_realize.walls import ObstacleSet, check_band_containment, check_disjoint


def test_layout_constants_n3():
    assert site(3, 1).tolist() == [360.0, 0.0, -90.0]
    assert hole_y(3, 1, 2) == -60.0
    m, _ = rescale_to_min(uniform_metric(3), 3, 0.5)
    plan = plan_tubes(m)
    assert plan[(1, 2)].l_hor == 360.0
    assert plan[(1, 3)].l_hor == 720.0
    w = witness_path(plan, 1, 2)
    assert w[1].tolist() == [360.0, -60.0, 0.0]
    assert np.linalg.norm(w[1] - w[0]) == pytest.approx(108.1665, abs=1e-4)


def test_vert_length():
    assert vert_length(10000, 360) == pytest.approx(4814.1716, abs=1e-4)
    assert vert_length(360 + 2 * JOINT_PATH + 1e-9, 360) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(VertLengthNonpositive):
        vert_length(360 + 2 * JOINT_PATH, 360)


@settings(max_examples=100)
@given(st.floats(1.0, 1e6), st.floats(0.0, 1e6))
def test_vert_length_identity(extra, l_hor):
    d = l_hor + 2 * JOINT_PATH + extra
    lv = vert_length(d, l_hor)
    # two joints, two vertical runs of lv - 1 and the horizontal run add back to d
    assert 2 * (lv - 1) + 2 * JOINT_PATH + l_hor == pytest.approx(d, rel=1e-12)


def test_hole_positions():
    for n in range(2, 9):
        for i in range(1, n + 1):
            ys = sorted(hole_y(n, min(i, k), max(i, k)) for k in range(1, n + 1) if k != i)
            assert ys[0] >= -10 * n * n + 10 * n and ys[-1] <= -10 * n
            assert np.all(np.diff(ys) >= 10)


@settings(max_examples=30)
@given(st.integers(2, 7), st.floats(0.05, 0.95), st.integers(0, 10_000))
def test_witness_within_budget(n, eps, seed):
    m = random_metric(n, np.random.default_rng(seed))
    scaled, _ = rescale_to_min(m, n, eps)
    plan = plan_tubes(scaled)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            d = scaled.dist[i - 1, j - 1]
            w = witness_path(plan, i, j)
            assert np.allclose(w[0], site(n, i)) and np.allclose(w[-1], site(n, j))
            L = path_length(w)
            assert L == pytest.approx(witness_length(plan, i, j), rel=1e-12)
            assert d <= L <= (1 + eps) * d
            assert one_hop_lower_bound(plan, i, j) >= d


def test_connectors_clear():
    m, _ = rescale_to_min(uniform_metric(5), 5, 0.5)
    plan = plan_tubes(m)
    recs = list(plan.records.values())
    for a in recs:
        for b in recs:
            if a is b or not ({a.i, a.j} & {b.i, b.j}):
                continue
            if abs(a.y - b.y) < 12:
                assert abs(a.connector_z - b.connector_z) >= 12 - 1e-9


def test_witness_inside_surface():
    m = FiniteMetric(["a", "b"], np.array([[0, 1.0], [1.0, 0]]))
    S, emb, plan = layout_surface(m, 0.5)
    assert emb.scale_factor == pytest.approx(41 * 8 / 0.5)
    w = witness_path(plan, 1, 2)
    pts = []
    for a, b in zip(w[:-1], w[1:]):
        k = max(2, int(np.linalg.norm(b - a) / 2))
        pts.append(a + np.linspace(0, 1, k)[:, None] * (b - a))
    pts = np.vstack(pts)
    off = S.signed_offsets(pts)["delta"]
    assert np.all(off == -np.inf)


def test_layout_rejects_bad_input():
    with pytest.raises(ValueError):
        layout_surface(uniform_metric(2), 1.0)
    with pytest.raises(ValueError):
        layout_surface(uniform_metric(1), 0.5)


def test_tetrahedralize():
    tri = np.array([[[0, 0, 0], [1, 0, 0], [0.5, math.sqrt(3) / 2, 0]]], float)
    ts = ObstacleSet(triangles=tri, meta={"normal": np.array([[0, 0, 1.0]])})
    tet = tetrahedralize(ts).tetrahedra[0]
    assert tet[3, 2] == pytest.approx(math.sqrt(2 / 3))
    edges = [np.linalg.norm(tet[a] - tet[b]) for a in range(4) for b in range(a + 1, 4)]
    assert np.allclose(edges, 1.0)
    # inradius / circumradius of a regular tetrahedron
    c = tet.mean(axis=0)
    R = np.linalg.norm(tet[0] - c)
    r = abs(c[2] - 0.0)
    assert r / R == pytest.approx(1 / 3)
    with pytest.raises(MissingTangencyMetadata):
        tetrahedralize(ObstacleSet(triangles=tri))


def test_windowed_realize():
    m = uniform_metric(2)
    win = ((155.0, -27.0, -2.0), (165.0, -17.0, 6.0))
    r = realize(m, 0.5, window=win)
    assert r.partial and len(r.obstacles.triangles) > 0
    assert r.count.count > 10**7
    assert check_disjoint(r.obstacles)["ok"]
    s = np.linalg.norm(np.diff(r.obstacles.triangles, axis=1, append=r.obstacles.triangles[:, :1]), axis=2)
    assert s.max() - s.min() <= 1e-12 * s.max()
    assert check_band_containment(r.surface, r.obstacles)["ok"]


def test_realize_count_only():
    r = realize(uniform_metric(2), 0.5, materialize=False)
    assert r.obstacles is None and r.summary()["obstacle_count"] == r.count.count
