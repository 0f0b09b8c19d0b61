import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from obstacle_realize.nets import (
    ArcTooSmall, SegmentTooShort, TooManyClassesNeeded, ZetaTooLarge, arc_net, class_bound,
    neighbour_counts, offset_net, partition_classes, patch_net, patchwork_net, patchwork_net_count_report,
    segment_net, verify_net,
)
from obstacle_realize.patches import Cylinder, Joint, SphericalTriangle, Square, make_frame
from obstacle_realize.patchwork import Patchwork

I3 = make_frame("+x", "+y", "+z")
Z = 1 / 8


@pytest.mark.parametrize("length, zeta, count, spacing", [
    (1.0, 1 / 8, 9, 0.125), (1.0, 1 / 9, 10, 1 / 9), (1.05, 1 / 8, 9, 0.13125),
])
def test_segment_net_examples(length, zeta, count, spacing):
    pts = segment_net([0, 0, 0], [length, 0, 0], zeta)
    assert len(pts) == count
    gaps = np.diff(pts[:, 0])
    assert np.allclose(gaps, spacing, rtol=1e-12)
    assert zeta - 1e-15 <= gaps.min() and gaps.max() < 1.2 * zeta


@pytest.mark.parametrize("radius, span, count", [(1.0, math.pi / 2, 11), (1.0, 2 * math.pi, 41),
                                                 (2.0, math.pi / 2, 21)])
def test_arc_net_examples(radius, span, count):
    pts = arc_net([0, 0, 0], radius, [1, 0, 0], [0, 1, 0], Z, span)
    assert len(pts) == count
    closed = np.vstack([pts, pts[:1]]) if span > 4 else pts
    chords = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    assert chords.min() >= Z and chords.max() < 2 * Z


def test_net_errors():
    with pytest.raises(SegmentTooShort):
        segment_net([0, 0, 0], [0.5, 0, 0], Z)
    with pytest.raises(ArcTooSmall):
        arc_net([0, 0, 0], 0.1, [1, 0, 0], [0, 1, 0], Z)
    with pytest.raises(ZetaTooLarge):
        segment_net([0, 0, 0], [2, 0, 0], 0.2)


def test_patch_net_counts():
    assert len(patch_net(Square((0, 0, 0), I3, 1.0), Z)[0]) == 81
    q = Cylinder((0, 0, 0), I3, 1.0, span=math.pi / 2)
    assert len(patch_net(q, Z)[0]) == 99


def _samples(patch, spacing):
    return patch.sample(spacing)[1]


@pytest.mark.parametrize("patch", [
    Square((0, 0, 0), I3, 12.0, holes=[(6.0, 6.0)]),
    Cylinder((0, 0, 0), I3, 3.0),
    Cylinder((0, 0, 0), I3, 2.0, span=math.pi / 2),
    SphericalTriangle((0, 0, 0), I3),
    Joint((0, 0, 0), I3),
], ids=lambda p: p.kind)
def test_each_kind_is_a_net(patch):
    _, pos, _ = patch_net(patch, Z)
    r = verify_net(pos, _samples(patch, Z / 4), Z, 8 * Z)
    assert r.ok, (r.min_distance, r.cover_radius)


def test_rounded_cube_net_and_count(cube6):
    N = patchwork_net(cube6, Z)
    count, exact = patchwork_net_count_report(cube6, Z)
    assert exact and count == len(N)
    _, _, pos, _ = cube6.sample(Z / 4)
    r = verify_net(N.pos, pos, Z, 8 * Z)
    assert r.ok
    assert len(N) <= 64 * cube6.area() / Z**2


def test_holed_surface_net_count(dumbbell):
    N = patchwork_net(dumbbell, Z)
    count, exact = patchwork_net_count_report(dumbbell, Z)
    assert exact and count == len(N)
    _, _, pos, _ = dumbbell.sample(Z / 3)
    assert verify_net(N.pos, pos, Z, 8 * Z).ok


@pytest.mark.parametrize("delta", [-0.4, -0.2, 0.2, 0.4])
def test_offset_nets(cube6, delta):
    N = offset_net(patchwork_net(cube6, Z), delta)
    assert (N.a, N.b) == (Z / 2, 12 * Z)
    _, _, pos, nrm = cube6.sample(Z / 3)
    assert verify_net(N.pos, pos + delta * nrm, N.a, N.b).ok


def test_offset_scaling_on_sphere_and_square():
    S = Patchwork([SphericalTriangle((0, 0, 0), I3)], [])
    N = patchwork_net(S, Z)
    M = offset_net(N, 0.25)
    i, j = 3, 17
    assert np.linalg.norm(M.pos[i] - M.pos[j]) == pytest.approx(1.25 * np.linalg.norm(N.pos[i] - N.pos[j]), rel=1e-12)
    Q = Patchwork([Square((0, 0, 0), I3, 2.0)], [])
    Nq = patchwork_net(Q, Z)
    Mq = offset_net(Nq, 0.25)
    assert np.allclose(np.diff(Mq.pos, axis=0), np.diff(Nq.pos, axis=0), atol=1e-15)
    assert np.array_equal(offset_net(Nq, 0.0).pos, Nq.pos)


def test_verify_net_detects_problems():
    S = Patchwork([Square((0, 0, 0), I3, 2.0)], [])
    N = patchwork_net(S, Z)
    samples = S.sample(Z / 4)[2]
    interior = np.flatnonzero(np.all(np.abs(N.pos[:, :2] - 1) < 0.2, axis=1))
    holey = np.delete(N.pos, interior, axis=0)
    r = verify_net(holey, samples, Z, 1.2 * Z)
    assert not r.covering_ok
    bad = r.covering_violations
    assert np.all(np.abs(bad[:, :2] - 1) < 0.4)
    lone = verify_net(N.pos[:1], samples, Z, 8 * Z)
    assert lone.packing_ok and not lone.covering_ok


@pytest.mark.parametrize("t", [1, 2, 4])
def test_neighbour_count_bound(cube6, t):
    N = offset_net(patchwork_net(cube6, Z / 2 if t == 4 else Z), 0.25)
    counts = neighbour_counts(N.pos, t * N.zeta)
    assert counts.max() <= 35 * t * t


def test_partition_classes():
    S = Patchwork([Square((0, 0, 0), I3, 1.0)], [])
    N = patchwork_net(S, Z)
    part = partition_classes(N, 1.5)
    assert part.n_classes <= class_bound(1.5)
    for cls in part.classes:
        P = N.pos[cls]
        if len(P) > 1:
            d = np.linalg.norm(P[:, None] - P[None], axis=-1) + np.eye(len(P)) * 9
            assert d.min() >= 1.5 * Z - 1e-12
    assert sorted(np.concatenate(part.classes).tolist()) == list(range(len(N)))
    assert class_bound(2) == 141
    sparse = patchwork_net(S, Z)
    sparse.pos = sparse.pos[::20] * 10
    sparse.normal, sparse.patch_id, sparse.local = sparse.normal[::20], sparse.patch_id[::20], sparse.local[::20]
    assert partition_classes(sparse, 1.0).n_classes == 1
    with pytest.raises(ValueError):
        partition_classes(N, 2.0)
    with pytest.raises(TooManyClassesNeeded):
        partition_classes(N, 1.5, max_classes=2)


def test_determinism(cube6):
    a, b = patchwork_net(cube6, Z), patchwork_net(cube6, Z)
    assert np.array_equal(a.pos, b.pos)
    assert np.array_equal(partition_classes(a, 1.5).labels, partition_classes(b, 1.5).labels)


@given(st.floats(1.0, 6.0), st.floats(0.05, 0.125))
def test_square_net_property(side, zeta):
    p = Square((0, 0, 0), I3, side)
    _, pos, _ = patch_net(p, zeta)
    r = verify_net(pos, p.sample(zeta / 3)[1], zeta, 8 * zeta)
    assert r.ok
