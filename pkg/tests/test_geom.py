import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from obstacle_realize import geom

coords = st.floats(-3, 3, allow_nan=False)
point = st.tuples(coords, coords, coords).map(np.array)


def _brute_seg_seg(p1, q1, p2, q2):
    s = np.linspace(0, 1, 401)
    A = p1 + s[:, None] * (q1 - p1)
    B = p2 + s[:, None] * (q2 - p2)
    coarse = np.linalg.norm(A[:, None] - B[None], axis=-1)
    i, j = np.unravel_index(np.argmin(coarse), coarse.shape)
    f = lambda x: np.linalg.norm(p1 + x[0] * (q1 - p1) - p2 - x[1] * (q2 - p2))
    r = minimize(f, [s[i], s[j]], bounds=[(0, 1), (0, 1)], method="L-BFGS-B", options={"ftol": 1e-14})
    return min(float(r.fun), float(coarse.min()))


@given(point, point, point, point)
def test_segment_distance_matches_optimiser(p1, q1, p2, q2):
    if np.linalg.norm(q1 - p1) < 1e-3 or np.linalg.norm(q2 - p2) < 1e-3:
        return
    d = geom.segment_segment_distance(p1[None], q1[None], p2[None], q2[None])[0]
    ref = _brute_seg_seg(p1, q1, p2, q2)
    assert d <= ref + 1e-9
    assert d >= ref - 1e-6 * max(1, ref) - 1e-6


@given(point, point, point, point)
def test_point_triangle_distance_lower_bounds_samples(p, a, b, c):
    if np.linalg.norm(np.cross(b - a, c - a)) < 1e-2:
        return
    d = geom.point_triangle_distance(p[None], a[None], b[None], c[None])[0]
    u, v = np.meshgrid(np.linspace(0, 1, 60), np.linspace(0, 1, 60))
    keep = u + v <= 1
    pts = a + u[keep, None] * (b - a) + v[keep, None] * (c - a)
    sampled = np.linalg.norm(pts - p, axis=1).min()
    assert d <= sampled + 1e-9
    assert d >= sampled - 0.05 * np.linalg.norm(b - a) - 0.05 * np.linalg.norm(c - a) - 1e-9


def test_triangle_distance_known_configs():
    A = np.array([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]], float)
    B = A + np.array([0, 0, 0.5])
    assert geom.triangle_triangle_distance(A, B)[0] == pytest.approx(0.5)
    pierce = np.array([[[0.2, 0.2, -1], [0.3, 0.2, 1], [0.2, 0.3, 1]]], float)
    assert geom.triangle_triangle_distance(A, pierce)[0] == 0.0
    side = np.array([[[2, 0, 0], [3, 0, 0], [2, 1, 0]]], float)
    assert geom.triangle_triangle_distance(A, side)[0] == pytest.approx(1.0)


def test_crossing_predicates():
    sq = np.array([[[-.5, -.5, 0], [.5, -.5, 0], [.5, .5, 0], [-.5, .5, 0]]], float)
    p, q = np.array([[0, 0, -1.0]]), np.array([[0, 0, 1.0]])
    assert geom.segment_crosses_polygon(p, q, sq, 1e-12)[0]
    # grazing an edge exactly does not block
    p2, q2 = np.array([[0.5, 0, -1.0]]), np.array([[0.5, 0, 1.0]])
    assert not geom.segment_crosses_polygon(p2, q2, sq, 1e-12)[0]
    # sliding in the plane does not block
    assert not geom.segment_crosses_polygon(np.array([[-1, 0, 0.0]]), np.array([[1, 0, 0.0]]), sq, 1e-12)[0]


def test_solid_predicate_and_fatness():
    t = np.array([[[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]], float)
    N, O = geom.tetra_planes(t)
    assert geom.segment_enters_solid(np.array([[0, 0, -3.0]]), np.array([[0, 0, 3.0]]), N, O, 1e-12)[0]
    assert not geom.segment_enters_solid(np.array([[5, 0, -3.0]]), np.array([[5, 0, 3.0]]), N, O, 1e-12)[0]
    assert geom.tetra_fatness(t)[0] == pytest.approx(1 / 3, rel=1e-12)
    bN, bO = geom.box_planes(np.array([[[0, 0, 0], [1, 1, 1]]], float))
    assert geom.segment_enters_solid(np.array([[0.5, 0.5, -1]]), np.array([[0.5, 0.5, 2.0]]), bN, bO, 1e-12)[0]
