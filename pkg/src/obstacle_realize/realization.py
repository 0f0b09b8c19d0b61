"""Realising a finite metric as geodesic distances among obstacles.

Layout: point x_i sits at the centre of a rounded cube of size 20 n^2 centred at
f(x_i) = (40 n^2 i, 0, -10 n^2), so every big cube has its top face at z = 0.
For each pair i < j a vertical tube leaves the top face of cube i at the hole
H_ij, rises into a connector cube, a horizontal tube joins the connector above
cube j, and a second vertical tube descends to H_ji. Tube lengths are chosen so
that the shortest route through the pair's own tube system has length close to
dist(x_i, x_j). The separator of the resulting closed surface is the obstacle set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metric import FiniteMetric, rescale_to_min
from .patches import Cylinder, Joint, make_frame
from .patchwork import PatchworkBuilder, rounded_cube
from .walls import InfeasibleConfig, ObstacleSet, WallConfig, build_separator, count_separator

JOINT_PATH = 4 + 2 * math.sqrt(2)
CONNECTOR_SIZE = 10.0
CONNECTOR_HALF = CONNECTOR_SIZE / 2
# two connectors whose y centres differ by the hole pitch touch unless their
# z ranges are this far apart (cube height plus room for the offset shells)
CONNECTOR_CLEARANCE = CONNECTOR_SIZE + 2.0
HOLE_PITCH = 10.0


class VertLengthNonpositive(ValueError):
    """dist - l_hor is too small for a vertical tube of positive length."""


class MissingTangencyMetadata(ValueError):
    """Triangles carry no outward normal to raise a tetrahedron on."""


def vert_length(dist, l_hor):
    """Vertical tube length making the one-hop route through joints match ``dist``."""
    slack = dist - l_hor
    if not slack > 2 * JOINT_PATH:
        raise VertLengthNonpositive(
            f"dist - l_hor = {slack:.6g} must exceed {2 * JOINT_PATH:.6g}")
    return slack / 2 - JOINT_PATH + 1


def cube_size(n):
    return 20.0 * n * n


def site(n, i):
    """f(x_i) for 1-based i."""
    return np.array([40.0 * n * n * i, 0.0, -10.0 * n * n])


def hole_y(n, i, j):
    """y coordinate of holes H_ij and H_ji (1-based, i < j)."""
    return -10.0 * n * n + 10.0 * (n - 1) * i + 10.0 * j - 10.0


@dataclass
class Embedding:
    labels: list
    points: np.ndarray
    scale_factor: float
    epsilon: float

    def to_json(self):
        return {"points": {str(k): p.tolist() for k, p in zip(self.labels, self.points)},
                "scale_factor": self.scale_factor, "epsilon": self.epsilon}


@dataclass
class TubeRecord:
    i: int
    j: int
    dist: float
    y: float
    l_hor: float
    l_vert: float
    lift: float
    connector_z: float
    patches: dict = field(default_factory=dict)

    @property
    def tube_vert(self):
        return self.l_vert + self.lift

    def to_json(self):
        return {"i": self.i, "j": self.j, "dist": self.dist, "y": self.y, "l_hor": self.l_hor,
                "l_vert": self.l_vert, "lift": self.lift, "connector_z": self.connector_z}


@dataclass
class TubePlan:
    n: int
    cube_size: float
    records: dict

    def __getitem__(self, ij):
        i, j = ij
        return self.records[(min(i, j), max(i, j))]

    def to_json(self):
        return {"n": self.n, "cube_size": self.cube_size, "connector_size": CONNECTOR_SIZE,
                "tubes": [r.to_json() for r in self.records.values()]}


def plan_tubes(m: FiniteMetric):
    """Tube lengths, hole positions and connector lifts for a (rescaled) metric."""
    n = m.n
    recs = {}
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            d = float(m.dist[i - 1, j - 1])
            l_hor = 40.0 * n * n * (j - i)
            lv = vert_length(d, l_hor)
            recs[(i, j)] = TubeRecord(i, j, d, hole_y(n, i, j), l_hor, lv, 0.0, 0.0)
    # connectors above the same big cube sit HOLE_PITCH apart in y and would
    # touch when their heights agree; lift later pairs until they clear
    placed = {k: [] for k in range(1, n + 1)}
    for rec in sorted(recs.values(), key=lambda r: (r.l_vert, r.i, r.j)):
        z = rec.l_vert
        while True:
            clash = [o for k in (rec.i, rec.j) for o in placed[k]
                     if abs(o.y - rec.y) < CONNECTOR_SIZE + 2.0 - 1e-9
                     and abs(o.tube_vert - z) < CONNECTOR_CLEARANCE]
            if not clash:
                break
            z = max(o.tube_vert for o in clash) + CONNECTOR_CLEARANCE
        rec.lift = z - rec.l_vert
        rec.connector_z = rec.tube_vert + 2 + CONNECTOR_HALF
        placed[rec.i].append(rec)
        placed[rec.j].append(rec)
    return TubePlan(n, cube_size(n), recs)


def _end_tube(b, face_id, hole_idx, x, y, rec, side):
    """Joint, vertical cylinder, joint, connector cube above (x, y)."""
    up = make_frame("+x", "+y", "+z")
    j0 = b.add(Joint((x, y, 0.0), up))
    b.join(face_id, f"hole{hole_idx}", j0, "rim")
    cyl = b.add(Cylinder((x, y, 1.0), up, rec.tube_vert))
    b.join(j0, "neck", cyl, "end0")
    top = rec.tube_vert + 2.0
    j1 = b.add(Joint((x, y, top), make_frame("+x", "+y", "-z")))
    b.join(cyl, "end1", j1, "neck")
    faces = rounded_cube(b, (x, y, rec.connector_z), CONNECTOR_SIZE,
                         holes={"-z": [(0.0, 0.0)], side: [(0.0, 0.0)]})
    b.join(faces["-z"], "hole0", j1, "rim")
    return faces, [j0, cyl, j1]


def layout_surface(m: FiniteMetric, epsilon, rescale=True, validate=True):
    """Closed patchwork, embedding and tube plan for metric ``m``.

    ``m`` is first rescaled so its smallest distance is 41 n^3 / epsilon.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    n = m.n
    if n < 2:
        raise ValueError("need at least two points")
    factor = 1.0
    if rescale:
        m, factor = rescale_to_min(m, n, epsilon)
    plan = plan_tubes(m)
    b = PatchworkBuilder()
    size = cube_size(n)
    top = {}
    hole_index = {}
    for i in range(1, n + 1):
        ys = [(k, plan[(i, k)].y) for k in range(1, n + 1) if k != i]
        hole_index[i] = {k: h for h, (k, _) in enumerate(ys)}
        faces = rounded_cube(b, site(n, i), size, holes={"+z": [(0.0, y) for _, y in ys]})
        top[i] = faces["+z"]
    for (i, j), rec in plan.records.items():
        xi, xj = site(n, i)[0], site(n, j)[0]
        ci, pi = _end_tube(b, top[i], hole_index[i][j], xi, rec.y, rec, "+x")
        cj, pj = _end_tube(b, top[j], hole_index[j][i], xj, rec.y, rec, "-x")
        zc = rec.connector_z
        side = make_frame("+y", "+z", "+x")
        h0 = b.add(Joint((xi + CONNECTOR_HALF, rec.y, zc), side))
        b.join(ci["+x"], "hole0", h0, "rim")
        hc = b.add(Cylinder((xi + CONNECTOR_HALF + 1, rec.y, zc), side, rec.l_hor - 2 * (CONNECTOR_HALF + 1)))
        b.join(h0, "neck", hc, "end0")
        h1 = b.add(Joint((xj - CONNECTOR_HALF, rec.y, zc), make_frame("+y", "+z", "-x")))
        b.join(hc, "end1", h1, "neck")
        b.join(cj["-x"], "hole0", h1, "rim")
        rec.patches = {"connector_i": ci, "connector_j": cj, "vertical_i": pi, "vertical_j": pj,
                       "horizontal": [h0, hc, h1]}
    S = b.build(orient=True, validate=validate)
    pts = np.array([site(n, i) for i in range(1, n + 1)])
    emb = Embedding(list(m.labels), pts, float(factor), float(epsilon))
    return S, emb, plan


def witness_path(plan: TubePlan, i, j):
    """Polyline f(x_i), H_ij, connector centres, H_ji, f(x_j) for 1-based i, j."""
    rec = plan[(i, j)]
    n = plan.n
    a, c = (i, j) if i < j else (j, i)
    pa, pc = site(n, a), site(n, c)
    pts = [pa, (pa[0], rec.y, 0.0), (pa[0], rec.y, rec.connector_z),
           (pc[0], rec.y, rec.connector_z), (pc[0], rec.y, 0.0), pc]
    pts = np.array(pts, dtype=float)
    return pts if i < j else pts[::-1]


def path_length(poly):
    return float(np.linalg.norm(np.diff(poly, axis=0), axis=1).sum())


def witness_length(plan: TubePlan, i, j):
    """Closed form of the witness path length."""
    rec = plan[(i, j)]
    ell = math.hypot(10.0 * plan.n ** 2, rec.y)
    return 2 * ell + 2 * (rec.tube_vert + 2 + CONNECTOR_HALF) + rec.l_hor


def one_hop_lower_bound(plan: TubePlan, i, j):
    """Lower bound on any path from f(x_i) to f(x_j) inside the pair's tubes.

    Such a path climbs from depth 10 n^2 to the top of each vertical tube and,
    between the two connectors, crosses the x range of the horizontal cylinder.
    """
    rec = plan[(i, j)]
    return 20.0 * plan.n ** 2 + 2 * (rec.tube_vert + 1) + rec.l_hor - 2 * (CONNECTOR_HALF + 1)


@dataclass
class Realization:
    surface: object
    embedding: Embedding
    plan: TubePlan
    metric: FiniteMetric
    obstacles: ObstacleSet | None
    count: object
    config: WallConfig
    partial: bool = False
    notes: list = field(default_factory=list)

    def summary(self):
        return {
            "n": self.plan.n, "epsilon": self.embedding.epsilon, "scale_factor": self.embedding.scale_factor,
            "mode": self.config.mode, "patches": len(self.surface.patches),
            "surface_area": float(self.surface.area()), "obstacle_count": int(self.count.count),
            "count_exact": bool(self.count.exact), "materialised": 0 if self.obstacles is None else len(self.obstacles),
            "partial": self.partial, "notes": list(self.notes),
        }


REALIZE_DEFAULT = WallConfig(t=4.0, side_factor=2.0, bands=2, zeta=1 / 17)


def realize(m: FiniteMetric, epsilon, cfg: WallConfig | None = None, cap=10**7, window=None,
            materialize=True):
    """Obstacles whose geodesic distances between the embedded sites approximate ``m``.

    In relaxed mode the separator is built when its size is below ``cap``; with
    ``window`` only the part inside that box is built. In fidelity mode the
    analytic count is reported and nothing is materialised.
    """
    cfg = REALIZE_DEFAULT if cfg is None else cfg
    cfg.validate()
    S, emb, plan = layout_surface(m, epsilon)
    scaled, _ = rescale_to_min(m, m.n, epsilon)
    sigma = float(max(r.dist for r in plan.records.values()))
    cnt = count_separator(S, sigma, cfg)
    out = Realization(S, emb, plan, scaled, None, cnt, cfg)
    if cfg.mode == "fidelity" or not materialize:
        out.notes.append("count only")
        return out
    if window is None and cnt.count > cap:
        raise InfeasibleConfig(f"separator needs {cnt.count} obstacles, cap is {cap}", cnt.count)
    out.obstacles = build_separator(S, sigma, cfg, cap=cap, window=window)
    out.partial = window is not None
    if out.partial:
        out.notes.append("partial: only obstacles over the window were built")
    return out


def tetrahedralize(ts: ObstacleSet):
    """Raise each triangle into a regular tetrahedron on its outward side."""
    if "normal" not in ts.meta:
        raise MissingTangencyMetadata("obstacle set has no per-triangle normals")
    tri = ts.triangles
    nrm = np.asarray(ts.meta["normal"], float)
    side = np.linalg.norm(tri[:, 1] - tri[:, 0], axis=1)
    apex = tri.mean(axis=1) + nrm * (side * math.sqrt(2.0 / 3.0))[:, None]
    tets = np.concatenate([tri, apex[:, None, :]], axis=1)
    return ObstacleSet(tetrahedra=tets, meta=dict(ts.meta), provenance=dict(ts.provenance))
