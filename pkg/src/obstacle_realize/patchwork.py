"""Closed surfaces assembled from patches: offsets, signed offsets, touchability."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .patches import (
    AXES, Cylinder, HALF_PI, OffsetOutOfRange, SphericalTriangle, Square,
    check_offset, make_frame, patch_from_dict,
)

__all__ = [
    "PatchworkError", "PreconditionViolation", "SurfacePoint", "OffsetResult",
    "Patchwork", "PatchworkBuilder", "offset_point", "classify_offset_patch",
    "signed_offset_of", "touchability_check", "between_offsets_bound",
    "sandwich_deviation", "normal_line_gap", "rounded_cube", "rounded_cube_patchwork",
    "OffsetOutOfRange",
]


class PatchworkError(ValueError):
    pass


class PreconditionViolation(ValueError):
    pass


@dataclass(frozen=True)
class SurfacePoint:
    patch_id: int
    local: tuple
    pos: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True)
class OffsetResult:
    region: str  # "near", "inside" or "outside"
    delta: float | None = None
    nearest: SurfacePoint | None = None


def offset_point(sp: SurfacePoint, delta):
    check_offset(delta)
    return np.asarray(sp.pos, float) + delta * np.asarray(sp.normal, float)


def classify_offset_patch(patch, delta):
    return patch.offset_params(delta)


class Patchwork:
    def __init__(self, patches, adjacency):
        self.patches = list(patches)
        self.adjacency = [tuple(a) for a in adjacency]

    def __len__(self):
        return len(self.patches)

    def area(self):
        return float(sum(p.area() for p in self.patches))

    def bbox(self):
        pos = self.sample(2.0)[2]
        return pos.min(axis=0), pos.max(axis=0)

    def surface_point(self, pid, local):
        pos, nrm = self.patches[pid].eval(np.asarray(local, float)[None, :])
        return SurfacePoint(pid, tuple(float(x) for x in local), pos[0], nrm[0])

    # sampling
    def sample(self, spacing):
        """Quasi-uniform samples: (patch ids, local coordinates, positions, normals)."""
        ids, locs, poss, nrms = [], [], [], []
        for k, p in enumerate(self.patches):
            loc, pos, nrm = p.sample(spacing)
            ids.append(np.full(len(loc), k))
            locs.append(loc)
            poss.append(pos)
            nrms.append(nrm)
        return np.concatenate(ids), np.vstack(locs), np.vstack(poss), np.vstack(nrms)

    # projection
    def nearest(self, q):
        """Valid projection with the smallest |delta| for every row of ``q``."""
        q = np.atleast_2d(np.asarray(q, float))
        best = np.full(len(q), np.inf)
        out = {
            "delta": np.full(len(q), np.nan),
            "patch": np.full(len(q), -1),
            "foot": np.full((len(q), 3), np.nan),
            "normal": np.full((len(q), 3), np.nan),
            "local": np.full((len(q), 2), np.nan),
        }
        for k, p in enumerate(self.patches):
            pr = p.project(q)
            score = np.where(pr["valid"], np.abs(pr["delta"]), np.inf)
            better = score < best
            if not better.any():
                continue
            best[better] = score[better]
            out["delta"][better] = pr["delta"][better]
            out["patch"][better] = k
            out["foot"][better] = pr["foot"][better]
            out["normal"][better] = pr["normal"][better]
            out["local"][better] = pr["local"][better]
        return out

    def crossings(self, q, direction):
        q = np.atleast_2d(np.asarray(q, float))
        d = np.broadcast_to(np.asarray(direction, float), q.shape)
        total = np.zeros(len(q), int)
        for p in self.patches:
            total += p.ray_count(q, d)
        return total

    def inside(self, q, rng=None, rays=3):
        """Ray-parity classification, majority vote over ``rays`` random directions."""
        rng = np.random.default_rng(12345) if rng is None else rng
        q = np.atleast_2d(np.asarray(q, float))
        votes = np.zeros(len(q), int)
        for _ in range(rays):
            d = rng.normal(size=3)
            votes += self.crossings(q, d / np.linalg.norm(d)) % 2
        return votes * 2 > rays

    def signed_offsets(self, q):
        """Vectorised signed offset: delta where |delta| < 1/2, else -inf / +inf."""
        near = self.nearest(q)
        delta = near["delta"].copy()
        far = ~(np.abs(delta) < 0.5)
        if far.any():
            ins = self.inside(np.atleast_2d(q)[far])
            delta[far] = np.where(ins, -np.inf, np.inf)
        near["delta"] = delta
        return near

    # assembly checks
    def fix_orientation(self, eta=1e-3, rng=None):
        """Flip patches whose normal points into the bounded component."""
        rng = np.random.default_rng(7) if rng is None else rng
        probes = []
        for p in self.patches:
            loc, pos, nrm = p.sample(math.sqrt(p.area() / 400))
            mid = len(pos) // 2
            probes.append(pos[mid] + eta * nrm[mid])
        ins = self.inside(np.array(probes), rng=rng, rays=5)
        flipped = [int(k) for k in np.flatnonzero(ins)]
        for k in flipped:
            self.patches[k].flip()
        return flipped

    def validate(self, samples_per_curve=16, tol=1e-9):
        seen = {}
        for rec in self.adjacency:
            ia, ca, ib, cb = rec
            for key in ((ia, ca), (ib, cb)):
                if key in seen:
                    raise PatchworkError(f"curve {key} is shared more than once")
                seen[key] = rec
        for k, p in enumerate(self.patches):
            for c in p.curves:
                if (k, c) not in seen:
                    raise PatchworkError(f"patch {k} ({p.kind}) curve {c} is not shared: surface is not closed")
        worst = 0.0
        for ia, ca, ib, cb in self.adjacency:
            pos, nrm = self.patches[ia].curve_eval(ca, samples_per_curve)
            pr = self.patches[ib].project(pos)
            scale = max(1.0, float(np.abs(pos).max()))
            if not pr["valid"].all():
                raise PatchworkError(f"curve ({ia},{ca}) does not lie on patch {ib}")
            gap = max(float(np.abs(pr["delta"]).max()), float(np.linalg.norm(pr["foot"] - pos, axis=1).max()))
            if gap > tol * scale:
                raise PatchworkError(f"curve ({ia},{ca}) is {gap:.3g} away from patch {ib}")
            turn = float(np.linalg.norm(pr["normal"] - nrm, axis=1).max())
            if turn > tol:
                raise PatchworkError(f"normals disagree by {turn:.3g} along ({ia},{ca})-({ib},{cb})")
            worst = max(worst, gap / scale, turn)
        return {"patches": len(self.patches), "shared_curves": len(self.adjacency), "worst": worst}

    # serialisation
    def to_dict(self):
        return {
            "patches": [p.to_dict() for p in self.patches],
            "adjacency": [[int(a), ca, int(b), cb] for a, ca, b, cb in self.adjacency],
        }

    @classmethod
    def from_dict(cls, d):
        return cls([patch_from_dict(p) for p in d["patches"]], [tuple(a) for a in d["adjacency"]])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def signed_offset_of(q, S: Patchwork):
    near = S.nearest(np.asarray(q, float)[None, :])
    d = near["delta"][0]
    if abs(d) < 0.5:
        k = int(near["patch"][0])
        sp = SurfacePoint(k, tuple(near["local"][0]), near["foot"][0], near["normal"][0])
        return OffsetResult("near", float(d), sp)
    return OffsetResult("inside" if S.inside(np.asarray(q, float)[None, :])[0] else "outside")


def touchability_check(S: Patchwork, r, samples=2000, tol=1e-9):
    if not r > 0:
        raise PreconditionViolation("r must be positive")
    spacing = math.sqrt(S.area() / samples)
    _, _, pos, nrm = S.sample(spacing)
    tree = cKDTree(pos)
    violations = []
    for side in (-1.0, 1.0):
        centres = pos + side * r * nrm
        hits = tree.query_ball_point(centres, r - tol, return_length=True)
        for i in np.flatnonzero(hits > 0):
            violations.append((int(i), "inner" if side < 0 else "outer", int(hits[i])))
    return {"r": float(r), "samples": len(pos), "violations": violations, "ok": not violations}


def _check_sandwich_inputs(sp, delta, q, eps):
    n = np.asarray(sp.normal, float)
    base = np.asarray(sp.pos, float) + delta * n
    q = np.asarray(q, float)
    if not abs(delta) < 0.5 - 2 * eps * eps:
        raise PreconditionViolation(f"|delta| must be < 1/2 - 2 eps^2, got {delta}")
    scale = max(1.0, float(np.abs(base).max()))
    if abs(float(np.dot(q - base, n))) > 1e-9 * scale:
        raise PreconditionViolation("q is not on the tangent plane of the offset surface")
    if np.linalg.norm(q - base) > eps * (1 + 1e-12):
        raise PreconditionViolation("|pq| exceeds eps")
    return q


def sandwich_deviation(S: Patchwork, sp, delta, q, eps):
    """Signed offset of ``q`` minus ``delta`` for ``q`` on the tangent plane at p + delta n(p)."""
    q = _check_sandwich_inputs(sp, delta, q, eps)
    res = signed_offset_of(q, S)
    if res.region != "near":
        return math.inf
    return res.delta - delta


def between_offsets_bound(S: Patchwork, sp, delta, q, eps):
    dev = sandwich_deviation(S, sp, delta, q, eps)
    return abs(dev) <= 2 * eps * eps * (1 + 1e-9) + 1e-12


def normal_line_gap(S: Patchwork, q, direction, reach=0.5):
    """Distance from ``q`` along ``direction`` to the surface (root of the signed offset)."""
    q = np.asarray(q, float)
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)

    def f(s):
        return float(S.nearest((q + s * d)[None, :])["delta"][0])

    return brentq(f, 0.0, reach, xtol=1e-15, rtol=1e-15)


class PatchworkBuilder:
    def __init__(self):
        self.patches = []
        self.adjacency = []

    def add(self, patch):
        self.patches.append(patch)
        return len(self.patches) - 1

    def join(self, ia, ca, ib, cb):
        self.adjacency.append((ia, ca, ib, cb))

    def build(self, orient=True, validate=True):
        S = Patchwork(self.patches, self.adjacency)
        if orient:
            S.fix_orientation()
        if validate:
            S.validate()
        return S


FACES = ("-x", "+x", "-y", "+y", "-z", "+z")


def _face_axes(face):
    k = "xyz".index(face[1])
    others = [a for a in range(3) if a != k]
    return k, others


def _edge_curve_on_face(face, other_axis, sign):
    _, (a1, a2) = _face_axes(face)
    return ("u" if other_axis == a1 else "v") + ("a" if sign > 0 else "0")


def rounded_cube(builder: PatchworkBuilder, center, size, holes=None):
    """Add cube ⊕ unit ball (core side ``size - 2``) to ``builder``.

    ``holes`` maps a face name such as ``"+z"`` to hole centres given as
    offsets from the face centre in that face's (u, v) axes, which are the two
    remaining coordinate axes in increasing order. Returns ``{face: patch id}``.
    """
    c = np.asarray(center, float)
    a = float(size) - 2.0
    h = a / 2.0
    holes = holes or {}
    unit = [np.array(AXES[f"+{ax}"], float) for ax in "xyz"]
    face_id = {}
    for face in FACES:
        k, (a1, a2) = _face_axes(face)
        s = 1.0 if face[0] == "+" else -1.0
        n = s * unit[k]
        origin = c + (h + 1.0) * n - h * (unit[a1] + unit[a2])
        R = make_frame(unit[a1], unit[a2], n)
        hl = [(h + du, h + dv) for du, dv in holes.get(face, ())]
        face_id[face] = builder.add(Square(origin, R, a, hl))
    corner_id = {}
    for sx in (-1, 1):
        for sy in (-1, 1):
            for sz in (-1, 1):
                sg = np.array([sx, sy, sz], float)
                corner_id[(sx, sy, sz)] = builder.add(
                    SphericalTriangle(c + h * sg, make_frame(*(sg[i] * unit[i] for i in range(3)))))
    for k3 in range(3):
        k1, k2 = [a_ for a_ in range(3) if a_ != k3]
        for s1 in (-1, 1):
            for s2 in (-1, 1):
                n1, n2 = s1 * unit[k1], s2 * unit[k2]
                origin = c + h * (n1 + n2) - h * unit[k3]
                cyl = builder.add(Cylinder(origin, make_frame(n1, n2, unit[k3]), a, HALF_PI))
                f1 = ("+" if s1 > 0 else "-") + "xyz"[k1]
                f2 = ("+" if s2 > 0 else "-") + "xyz"[k2]
                builder.join(cyl, "side0", face_id[f1], _edge_curve_on_face(f1, k2, s2))
                builder.join(cyl, "side1", face_id[f2], _edge_curve_on_face(f2, k1, s1))
                for end, s3 in (("end0", -1), ("end1", 1)):
                    sg = [0, 0, 0]
                    sg[k1], sg[k2], sg[k3] = s1, s2, s3
                    builder.join(cyl, end, corner_id[tuple(sg)], f"arc{k3}")
    return face_id


def rounded_cube_patchwork(center=(0.0, 0.0, 0.0), size=20.0):
    b = PatchworkBuilder()
    rounded_cube(b, center, size)
    return b.build()
