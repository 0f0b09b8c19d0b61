"""(a, b)-nets on patches and patchworks, offset nets and class partitions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .patches import HALF_PI, HOLE_RADIUS, TWO_PI, check_offset

__all__ = [
    "SegmentTooShort", "ArcTooSmall", "ZetaTooLarge", "TooManyClassesNeeded",
    "Net", "ClassPartition", "segment_net", "arc_net", "quarter_steps",
    "patch_net", "patch_net_count", "patch_net_count_report", "curve_net_count",
    "patchwork_net", "patchwork_net_count", "patchwork_net_count_report", "offset_net", "partition_classes", "class_bound",
    "verify_net", "neighbour_counts",
]


class SegmentTooShort(ValueError):
    pass


class ArcTooSmall(ValueError):
    pass


class ZetaTooLarge(ValueError):
    pass


class TooManyClassesNeeded(RuntimeError):
    pass


def _check_zeta(zeta):
    if not 0 < zeta <= 0.125:
        raise ZetaTooLarge(f"zeta must be in (0, 1/8], got {zeta}")


def segment_net(a, b, zeta):
    a, b = np.asarray(a, float), np.asarray(b, float)
    _check_zeta(zeta)
    length = float(np.linalg.norm(b - a))
    if length < 1 - 1e-12:
        raise SegmentTooShort(f"segment length {length} < 1")
    k = math.floor(length / zeta)
    s = np.arange(k + 1) / k
    return a + s[:, None] * (b - a)


def _segment_steps(length, zeta):
    return math.floor(length / zeta)


def quarter_steps(zeta, radius=1.0):
    """Number of sub-arcs of a quarter circle of the given radius."""
    return math.floor(HALF_PI * radius / (1.2 * zeta))


def arc_net(center, radius, u, v, zeta, span=HALF_PI):
    """Net on the arc ``center + radius (cos s u + sin s v)``, ``s in [0, span]``.

    ``span = 2 pi`` gives a closed circle whose points do not repeat the start.
    """
    _check_zeta(zeta)
    if radius < zeta:
        raise ArcTooSmall(f"arc radius {radius} < zeta {zeta}")
    k = math.floor(span * radius / (1.2 * zeta))
    closed = math.isclose(span, TWO_PI)
    s = span * np.arange(k if closed else k + 1) / k
    return (np.asarray(center, float) + radius * (np.cos(s)[:, None] * np.asarray(u, float)
                                                   + np.sin(s)[:, None] * np.asarray(v, float)))


# per-patch nets, in local patch coordinates

def _circle_angles(k1):
    return HALF_PI * np.arange(4 * k1) / k1


def _index_range(k, length, lo, hi):
    step = length / k
    return max(0, math.ceil(lo / step - 1e-9)), min(k, math.floor(hi / step + 1e-9))


def _square_local(p, zeta, window=None):
    k = _segment_steps(p.side, zeta)
    gu = gv = p.side * np.arange(k + 1) / k
    if window is not None:
        lo, hi = p.local_window(window)
        i0, i1 = _index_range(k, p.side, lo[0], hi[0])
        j0, j1 = _index_range(k, p.side, lo[1], hi[1])
        gu = p.side * np.arange(i0, i1 + 1) / k
        gv = p.side * np.arange(j0, j1 + 1) / k
    U, V = np.meshgrid(gu, gv, indexing="ij")
    U, V = U.ravel(), V.ravel()
    keep = _square_keep(p, U, V, zeta)
    loc = [np.column_stack([U[keep], V[keep]])]
    loc += [_rim_local(p, hole, zeta) for hole in p.holes]
    return np.vstack(loc)


def _rim_local(p, hole, zeta):
    a = _circle_angles(quarter_steps(zeta))
    return np.column_stack([hole[0] + HOLE_RADIUS * np.cos(a), hole[1] + HOLE_RADIUS * np.sin(a)])


def _square_keep(p, U, V, zeta):
    keep = np.ones(len(U), bool)
    for hole in p.holes:
        near = np.hypot(U - hole[0], V - hole[1]) < HOLE_RADIUS + zeta
        if not near.any():
            continue
        idx = np.flatnonzero(near)
        rim = _rim_local(p, hole, zeta)
        d_rim = cKDTree(rim).query(np.column_stack([U[idx], V[idx]]))[0]
        inside = np.hypot(U[idx] - hole[0], V[idx] - hole[1]) < HOLE_RADIUS
        keep[idx[inside | (d_rim < zeta)]] = False
    return keep


def _square_pruned(p, zeta, window_limit=4_000_000):
    """Grid points removed around the holes: (count, exact).

    Counted exactly on a local window per hole; when the window is too large
    to enumerate, the lattice count is estimated from the pruned area.
    """
    k = _segment_steps(p.side, zeta)
    step = p.side / k
    total, exact = 0, True
    for hole in p.holes:
        r = HOLE_RADIUS + zeta
        i0, i1 = max(0, math.floor((hole[0] - r) / step)), min(k, math.ceil((hole[0] + r) / step))
        j0, j1 = max(0, math.floor((hole[1] - r) / step)), min(k, math.ceil((hole[1] + r) / step))
        if (i1 - i0 + 1) * (j1 - j0 + 1) > window_limit:
            total += round(math.pi * HOLE_RADIUS**2 / step**2)
            exact = False
            continue
        gi = p.side * np.arange(i0, i1 + 1) / k
        gj = p.side * np.arange(j0, j1 + 1) / k
        U, V = np.meshgrid(gi, gj, indexing="ij")
        # holes are at least 6 apart, so each window only sees its own hole
        total += int((~_square_keep(p, U.ravel(), V.ravel(), zeta)).sum())
    return total, exact


def _cylinder_local(p, zeta, window=None):
    k1 = quarter_steps(zeta, p.radius)
    th = p.theta0 + (_circle_angles(k1) if p.full else HALF_PI * np.arange(k1 + 1) / k1)
    kw = _segment_steps(p.length, zeta)
    i0, i1 = 0, kw
    if window is not None:
        lo, hi = p.local_window(window)
        i0, i1 = _index_range(kw, p.length, lo[2], hi[2])
    w = p.length * np.arange(i0, i1 + 1) / kw
    TH, W = np.meshgrid(th, w, indexing="ij")
    return np.column_stack([TH.ravel(), W.ravel()])


def _sphere_local(p, zeta, window=None):
    k1 = quarter_steps(zeta, p.radius)
    loc = []
    for m in range(k1 + 1):
        phi = HALF_PI * m / k1
        if m == k1:
            loc.append(np.array([[0.0, HALF_PI]]))
            break
        ring = math.cos(phi) * p.radius
        km = max(1, quarter_steps(zeta, ring))
        psi = HALF_PI * np.arange(km + 1) / km
        loc.append(np.column_stack([psi, np.full(km + 1, phi)]))
    return np.vstack(loc)


def _joint_local(p, zeta, window=None):
    k1 = quarter_steps(zeta)
    P, T = np.meshgrid(_circle_angles(k1), HALF_PI * np.arange(k1 + 1) / k1, indexing="ij")
    return np.column_stack([P.ravel(), T.ravel()])


_LOCAL = {
    "Square": _square_local,
    "Cylinder": _cylinder_local,
    "QuarterCylinder": _cylinder_local,
    "SphericalTriangle": _sphere_local,
    "Joint": _joint_local,
}


def patch_net(patch, zeta, window=None):
    """Net of one patch: (local coordinates, positions, normals).

    With ``window = (lo, hi)`` only points inside that world box are produced.
    """
    _check_zeta(zeta)
    loc = _LOCAL[patch.kind](patch, zeta, window)
    if not len(loc):
        return loc.reshape(0, 2), np.zeros((0, 3)), np.zeros((0, 3))
    pos, nrm = patch.eval(loc)
    if window is not None:
        lo, hi = (np.asarray(x, float) for x in window)
        keep = np.all((pos >= lo) & (pos <= hi), axis=1)
        loc, pos, nrm = loc[keep], pos[keep], nrm[keep]
    return loc, pos, nrm


def _boxes_meet(a, b):
    return bool(np.all(a[0] <= b[1]) and np.all(b[0] <= a[1]))


def patch_net_count(patch, zeta):
    return patch_net_count_report(patch, zeta)[0]


def patch_net_count_report(patch, zeta):
    """Net size of one patch and whether it is exact (huge holed squares are estimated)."""
    _check_zeta(zeta)
    if patch.kind == "Square":
        k = _segment_steps(patch.side, zeta)
        pruned, exact = _square_pruned(patch, zeta)
        return (k + 1) ** 2 - pruned + 4 * quarter_steps(zeta) * len(patch.holes), exact
    try:
        return _patch_net_count_curved(patch, zeta), True
    except _Inexact as e:
        return e.estimate, False


def _patch_net_count_curved(patch, zeta):
    k1 = quarter_steps(zeta)
    kind = patch.kind
    if kind == "QuarterCylinder":
        return (k1 + 1) * (_segment_steps(patch.length, zeta) + 1)
    if kind == "Cylinder":
        return 4 * k1 * (_segment_steps(patch.length, zeta) + 1)
    if kind == "Joint":
        return 4 * k1 * (k1 + 1)
    if kind == "SphericalTriangle":
        if k1 > 1_000_000:
            raise _Inexact(k1 + 1 + round(k1 * quarter_steps(zeta, patch.radius) * 2 / math.pi))
        rings = [max(1, quarter_steps(zeta, math.cos(HALF_PI * m / k1) * patch.radius)) + 1 for m in range(k1)]
        return sum(rings) + 1
    raise ValueError(kind)


class _Inexact(Exception):
    def __init__(self, estimate):
        self.estimate = estimate


def curve_net_count(patch, cid, zeta):
    k1 = quarter_steps(zeta)
    if patch.kind == "Square":
        return 4 * k1 if cid.startswith("hole") else _segment_steps(patch.side, zeta) + 1
    if patch.kind in ("Cylinder", "QuarterCylinder"):
        if cid.startswith("side"):
            return _segment_steps(patch.length, zeta) + 1
        return 4 * k1 if patch.full else k1 + 1
    if patch.kind == "Joint":
        return 4 * k1
    return k1 + 1


@dataclass
class Net:
    pos: np.ndarray
    normal: np.ndarray
    patch_id: np.ndarray
    local: np.ndarray
    a: float
    b: float
    zeta: float
    delta: float = 0.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.pos)

    def to_json(self, classes=None):
        out = []
        for i in range(len(self)):
            rec = {"patch_id": int(self.patch_id[i]), "local": [float(x) for x in self.local[i]],
                   "pos": [float(x) for x in self.pos[i]], "normal": [float(x) for x in self.normal[i]]}
            if classes is not None:
                rec["class"] = int(classes[i])
            out.append(rec)
        return out

    def save(self, path, classes=None):
        with open(path, "w") as fh:
            json.dump({"a": self.a, "b": self.b, "zeta": self.zeta, "delta": self.delta,
                       "points": self.to_json(classes)}, fh)


def patchwork_net(S, zeta, window=None):
    """(zeta, 8 zeta)-net of a closed patchwork; shared boundary points appear once.

    ``window`` restricts the construction to a world box (partial nets).
    """
    _check_zeta(zeta)
    pos, nrm, pid, loc = [], [], [], []
    for k, p in enumerate(S.patches):
        if window is not None and not _boxes_meet(p.bbox(), window):
            continue
        l_, p_, n_ = patch_net(p, zeta, window)
        pos.append(p_)
        nrm.append(n_)
        loc.append(l_)
        pid.append(np.full(len(l_), k))
    pos, nrm, pid, loc = np.vstack(pos), np.vstack(nrm), np.concatenate(pid), np.vstack(loc)
    scale = max(1.0, float(np.abs(pos).max()))
    pairs = cKDTree(pos).query_pairs(1e-9 * scale, output_type="ndarray")
    drop = np.zeros(len(pos), bool)
    if len(pairs):
        drop[np.maximum(pairs[:, 0], pairs[:, 1])] = True
    keep = ~drop
    meta = {} if window is None else {"window": [list(map(float, w)) for w in window]}
    return Net(pos[keep], nrm[keep], pid[keep], loc[keep], zeta, 8 * zeta, zeta, meta=meta)


def patchwork_net_count(S, zeta):
    """Analytic net size: patch counts minus shared curves plus square corners.

    Every square corner of a rounded cube meets four patches and four shared
    curves, so inclusion-exclusion needs one extra point per corner.
    """
    return patchwork_net_count_report(S, zeta)[0]


def patchwork_net_count_report(S, zeta):
    total, exact = 0, True
    for p in S.patches:
        c, e = patch_net_count_report(p, zeta)
        total += c
        exact &= e
    total -= sum(curve_net_count(S.patches[ia], ca, zeta) for ia, ca, _, _ in S.adjacency)
    total += 4 * sum(1 for p in S.patches if p.kind == "Square")
    return total, exact


def offset_net(N: Net, delta):
    check_offset(delta)
    return Net(N.pos + delta * N.normal, N.normal.copy(), N.patch_id.copy(), N.local.copy(),
               N.zeta / 2, 12 * N.zeta, N.zeta, float(delta), dict(N.meta))


def class_bound(t):
    return math.floor(35 * t * t + 1)


@dataclass
class ClassPartition:
    labels: np.ndarray
    t: float
    zeta: float

    @property
    def n_classes(self):
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    @property
    def classes(self):
        order = np.argsort(self.labels, kind="stable")
        bounds = np.searchsorted(self.labels[order], np.arange(self.n_classes + 1))
        return [order[bounds[c]:bounds[c + 1]] for c in range(self.n_classes)]


def _conflicts(pos, radius):
    """For every point, the earlier points strictly closer than ``radius``."""
    pairs = cKDTree(pos).query_pairs(radius, output_type="ndarray")
    if len(pairs):
        d = np.linalg.norm(pos[pairs[:, 0]] - pos[pairs[:, 1]], axis=1)
        pairs = pairs[d < radius]
    lo, hi = np.minimum(pairs[:, 0], pairs[:, 1]), np.maximum(pairs[:, 0], pairs[:, 1])
    order = np.lexsort((lo, hi))
    lo, hi = lo[order], hi[order]
    starts = np.searchsorted(hi, np.arange(len(pos) + 1))
    return lo, starts


def partition_classes(N: Net, t, max_classes=None):
    """Greedy first-fit in construction order; same-class points are >= t zeta apart."""
    zeta = N.zeta
    if not (1 <= t < 1 / (4 * zeta)):
        raise ValueError(f"need 1 <= t < 1/(4 zeta) = {1 / (4 * zeta)}, got t={t}")
    bound = class_bound(t) if max_classes is None else max_classes
    lo, starts = _conflicts(N.pos, t * zeta)
    labels = np.full(len(N), -1, dtype=np.int64)
    used = np.zeros(bound + 2, bool)
    for i in range(len(N)):
        nb = labels[lo[starts[i]:starts[i + 1]]]
        used[nb] = True
        c = int(np.argmin(used))
        used[nb] = False
        if c >= bound:
            raise TooManyClassesNeeded(f"point {i} needs class {c + 1} > bound {bound}")
        labels[i] = c
    return ClassPartition(labels, float(t), zeta)


def neighbour_counts(pos, radius):
    """|N ∩ B(p, radius)| for every point (the point itself included)."""
    return cKDTree(pos).query_ball_point(pos, radius, return_length=True)


@dataclass
class NetReport:
    a: float
    b: float
    min_distance: float
    cover_radius: float
    packing_violations: list
    covering_violations: np.ndarray
    samples: int

    @property
    def packing_ok(self):
        return not self.packing_violations

    @property
    def covering_ok(self):
        return len(self.covering_violations) == 0

    @property
    def ok(self):
        return self.packing_ok and self.covering_ok


def verify_net(points, samples, a, b, rel_tol=1e-9):
    """Exact packing check over all pairs and sampled covering check."""
    points = np.atleast_2d(np.asarray(points, float))
    tree = cKDTree(points)
    if len(points) > 1:
        dmin = float(tree.query(points, k=2)[0][:, 1].min())
    else:
        dmin = math.inf
    pairs = tree.query_pairs(a * (1 - rel_tol), output_type="ndarray")
    packing = [(int(i), int(j), float(np.linalg.norm(points[i] - points[j]))) for i, j in pairs[:50]]
    samples = np.atleast_2d(np.asarray(samples, float))
    dist = tree.query(samples)[0]
    bad = np.flatnonzero(dist > b * (1 + rel_tol))
    return NetReport(a, b, dmin, float(dist.max()), packing, samples[bad], len(samples))
