"""Vectorised primitives: distances between segments and triangles, crossing tests.

All functions take stacked inputs (leading axis = independent queries).
"""

from __future__ import annotations

import numpy as np


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def point_segment_distance(p, a, b):
    ab = b - a
    t = np.clip(_dot(p - a, ab) / np.maximum(_dot(ab, ab), 1e-300), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)


def segment_segment_distance(p1, q1, p2, q2):
    """Closest distance between segments p1q1 and p2q2 (non-degenerate)."""
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e = _dot(d1, d1), _dot(d2, d2)
    b, c, f = _dot(d1, d2), _dot(d1, r), _dot(d2, r)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e
        lo, hi = t < 0, t > 1
        s = np.where(lo, np.clip(-c / a, 0.0, 1.0), s)
        s = np.where(hi, np.clip((b - c) / a, 0.0, 1.0), s)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm((p1 + s[..., None] * d1) - (p2 + t[..., None] * d2), axis=-1)


def _barycentric_inside(x, a, b, c, n, strict_tol=None):
    """Is ``x`` (in the plane of abc with normal n) inside the triangle."""
    s0 = _dot(np.cross(b - a, x - a), n)
    s1 = _dot(np.cross(c - b, x - b), n)
    s2 = _dot(np.cross(a - c, x - c), n)
    if strict_tol is None:
        return (s0 >= 0) & (s1 >= 0) & (s2 >= 0)
    return (s0 > strict_tol) & (s1 > strict_tol) & (s2 > strict_tol)


def point_triangle_distance(p, a, b, c):
    n = np.cross(b - a, c - a)
    nn = np.linalg.norm(n, axis=-1)
    h = _dot(p - a, n) / nn
    foot = p - (h / nn)[..., None] * n
    inside = _barycentric_inside(foot, a, b, c, n)
    edges = np.minimum(np.minimum(point_segment_distance(p, a, b), point_segment_distance(p, b, c)),
                       point_segment_distance(p, c, a))
    return np.where(inside, np.abs(h), edges)


def segment_hits_triangle(p, q, a, b, c):
    """Closed segment meets the closed triangle at a non-coplanar crossing."""
    n = np.cross(b - a, c - a)
    dp, dq = _dot(p - a, n), _dot(q - a, n)
    crossing = (dp * dq <= 0) & ((dp != 0) | (dq != 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = dp / (dp - dq)
    x = p + np.nan_to_num(t)[..., None] * (q - p)
    return crossing & _barycentric_inside(x, a, b, c, n)


def triangle_triangle_distance(A, B):
    """Euclidean distance between closed triangles A[i] and B[i] (shape (m, 3, 3)); 0 if they meet."""
    best = np.full(len(A), np.inf)
    for i in range(3):
        for j in range(3):
            d = segment_segment_distance(A[:, i], A[:, (i + 1) % 3], B[:, j], B[:, (j + 1) % 3])
            best = np.minimum(best, d)
        best = np.minimum(best, point_triangle_distance(A[:, i], B[:, 0], B[:, 1], B[:, 2]))
        best = np.minimum(best, point_triangle_distance(B[:, i], A[:, 0], A[:, 1], A[:, 2]))
    hit = np.zeros(len(A), bool)
    for i in range(3):
        hit |= segment_hits_triangle(A[:, i], A[:, (i + 1) % 3], B[:, 0], B[:, 1], B[:, 2])
        hit |= segment_hits_triangle(B[:, i], B[:, (i + 1) % 3], A[:, 0], A[:, 1], A[:, 2])
    return np.where(hit, 0.0, best)


def polygon_normals(V):
    """Unit normals of convex planar polygons V (m, k, 3) via Newell's method."""
    nxt = np.roll(V, -1, axis=1)
    n = np.sum(np.cross(V, nxt), axis=1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def segment_crosses_polygon(p, q, V, eps):
    """Transversal crossing of the relative interior of convex planar polygons.

    ``p, q`` have shape (m, 3), ``V`` (m, k, 3). Touching the boundary, having
    an endpoint on the plane or lying in the plane do not count.
    """
    n = polygon_normals(V)
    dp, dq = _dot(p - V[:, 0], n), _dot(q - V[:, 0], n)
    cross = ((dp > eps) & (dq < -eps)) | ((dp < -eps) & (dq > eps))
    if not cross.any():
        return cross
    idx = np.flatnonzero(cross)
    t = dp[idx] / (dp[idx] - dq[idx])
    x = p[idx] + t[:, None] * (q[idx] - p[idx])
    Vi, ni = V[idx], n[idx]
    inside = np.ones(len(idx), bool)
    k = V.shape[1]
    for e in range(k):
        a, b = Vi[:, e], Vi[:, (e + 1) % k]
        edge = b - a
        side = _dot(np.cross(edge, x - a), ni) / np.linalg.norm(edge, axis=-1)
        inside &= side > eps
    cross[idx] = inside
    return cross


def segment_enters_solid(p, q, normals, offsets, eps):
    """Segment passes through the interior of convex solids {x : n_f . x <= o_f for all f}.

    ``normals`` (m, F, 3) are unit outward normals. A segment counts only when
    a sub-segment of positive length lies at depth more than ``eps``.
    """
    d = q - p
    gp = np.einsum("mfi,mi->mf", normals, p) - offsets + eps
    gd = np.einsum("mfi,mi->mf", normals, d)
    t0 = np.zeros(len(p))
    t1 = np.ones(len(p))
    with np.errstate(divide="ignore", invalid="ignore"):
        tb = -gp / gd
    entering = gd < 0
    leaving = gd > 0
    parallel_out = (gd == 0) & (gp >= 0)
    t0 = np.maximum(t0, np.where(entering, tb, -np.inf).max(axis=1))
    t1 = np.minimum(t1, np.where(leaving, tb, np.inf).min(axis=1))
    length = np.linalg.norm(d, axis=-1)
    return (~parallel_out.any(axis=1)) & ((t1 - t0) * length > eps)


def tetra_planes(T):
    """Outward unit normals and offsets of tetrahedra T (m, 4, 3)."""
    faces = [(1, 2, 3, 0), (0, 3, 2, 1), (0, 1, 3, 2), (0, 2, 1, 3)]
    N, O = [], []
    for a, b, c, opp in faces:
        n = np.cross(T[:, b] - T[:, a], T[:, c] - T[:, a])
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        flip = _dot(T[:, opp] - T[:, a], n) > 0
        n[flip] *= -1
        N.append(n)
        O.append(_dot(n, T[:, a]))
    return np.stack(N, axis=1), np.stack(O, axis=1)


def box_planes(B):
    """Outward normals and offsets of axis-aligned boxes B (m, 2, 3) = (min, max)."""
    m = len(B)
    N = np.zeros((m, 6, 3))
    O = np.zeros((m, 6))
    for k in range(3):
        N[:, 2 * k, k] = -1.0
        O[:, 2 * k] = -B[:, 0, k]
        N[:, 2 * k + 1, k] = 1.0
        O[:, 2 * k + 1] = B[:, 1, k]
    return N, O


def tetra_fatness(T):
    """Inradius / circumradius of tetrahedra (m, 4, 3)."""
    vol = np.abs(_dot(np.cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0]), T[:, 3] - T[:, 0])) / 6.0
    area = 0.0
    for a, b, c in [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]:
        area = area + 0.5 * np.linalg.norm(np.cross(T[:, b] - T[:, a], T[:, c] - T[:, a]), axis=-1)
    r_in = 3 * vol / area
    # circumcentre solves 2 (v_k - v_0) . x = |v_k|^2 - |v_0|^2
    A = 2 * (T[:, 1:] - T[:, :1])
    rhs = np.sum(T[:, 1:] ** 2, axis=-1) - np.sum(T[:, :1] ** 2, axis=-1)
    cc = np.linalg.solve(A, rhs[..., None])[..., 0]
    r_out = np.linalg.norm(T[:, 0] - cc, axis=-1)
    return r_in / r_out
