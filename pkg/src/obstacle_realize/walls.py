"""Triangle walls between offset surfaces, the flat wall, and obstacle sets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .geom import triangle_triangle_distance
from .nets import (
    TooManyClassesNeeded, ZetaTooLarge, class_bound, partition_classes,
    patchwork_net, patchwork_net_count_report,
)

SQRT3 = math.sqrt(3.0)
FIDELITY_T = 48 * (1 + SQRT3)
FIDELITY_SIDE = 48 * SQRT3

__all__ = [
    "InfeasibleConfig", "OffsetBandOutOfRange", "WallConfig", "ObstacleSet",
    "SeparatorCount", "equilateral_triangles", "flat_wall", "layer_schedule",
    "layer_triangles", "build_separator", "count_separator", "check_disjoint",
    "check_band_containment", "side_lengths", "FIDELITY_T", "FIDELITY_SIDE",
]


class InfeasibleConfig(RuntimeError):
    def __init__(self, msg, count=None):
        super().__init__(msg)
        self.count = count


class OffsetBandOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class WallConfig:
    mode: str = "relaxed"
    t: float = 8.0
    side_factor: float = 4.0
    bands: int = 3
    zeta: float | None = 1 / 33
    layers_per_band: int | None = None
    band_step: float | None = None
    gap: float = 1e-6

    @classmethod
    def fidelity(cls):
        return cls(mode="fidelity", t=FIDELITY_T, side_factor=FIDELITY_SIDE, bands=0, zeta=None)

    @property
    def b(self):
        return class_bound(self.t)

    @property
    def nu(self):
        return 4 * self.b + 1

    def validate(self):
        if self.mode == "fidelity":
            if not (math.isclose(self.t, FIDELITY_T) and math.isclose(self.side_factor, FIDELITY_SIDE)):
                raise ValueError("fidelity mode fixes t = 48(1+sqrt 3) and side = 48 sqrt 3 zeta")
        elif self.mode == "relaxed":
            # same-class tangency points are >= t zeta apart; two circumradii must fit
            if not 2 * self.side_factor / SQRT3 < self.t:
                raise ValueError(f"side_factor {self.side_factor} too large for t={self.t}")
            if self.bands < 1:
                raise ValueError("relaxed mode needs at least one band")
            if self.zeta is None or not 0 < self.zeta <= 0.125:
                raise ZetaTooLarge(f"relaxed mode needs 0 < zeta <= 1/8, got {self.zeta}")
            if not self.t < 1 / (4 * self.zeta):
                raise ZetaTooLarge(f"need zeta < 1/(4t) = {1 / (4 * self.t)}, got {self.zeta}")
        else:
            raise ValueError(f"unknown wall mode {self.mode!r}")
        return self

    def fidelity_schedule(self, sigma):
        """zeta, sigma_0 and band count of the fidelity construction."""
        if not sigma > 1:
            raise ValueError("sigma must exceed 1")
        nu = self.nu
        sigma0 = nu * sigma / 2
        zeta = 1 / (2 * nu * sigma0)
        return zeta, sigma0, math.ceil(sigma0 * sigma0)


@dataclass
class ObstacleSet:
    triangles: np.ndarray = field(default_factory=lambda: np.zeros((0, 3, 3)))
    squares: np.ndarray = field(default_factory=lambda: np.zeros((0, 4, 3)))
    tetrahedra: np.ndarray = field(default_factory=lambda: np.zeros((0, 4, 3)))
    boxes: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 3)))
    meta: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.triangles) + len(self.squares) + len(self.tetrahedra) + len(self.boxes)

    @property
    def empty(self):
        return len(self) == 0

    def vertices(self):
        parts = [self.triangles.reshape(-1, 3), self.squares.reshape(-1, 3),
                 self.tetrahedra.reshape(-1, 3), self.boxes.reshape(-1, 3)]
        return np.vstack(parts) if parts else np.zeros((0, 3))

    def scale(self):
        v = self.vertices()
        return max(1.0, float(np.abs(v).max())) if len(v) else 1.0

    def edges(self):
        """All obstacle edges as an (E, 2, 3) array."""
        out = []
        for arr, k in ((self.triangles, 3), (self.squares, 4)):
            for i in range(k):
                out.append(np.stack([arr[:, i], arr[:, (i + 1) % k]], axis=1))
        T = self.tetrahedra
        for i, j in ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
            out.append(np.stack([T[:, i], T[:, j]], axis=1))
        if len(self.boxes):
            lo, hi = self.boxes[:, 0], self.boxes[:, 1]
            corners = np.stack([np.where(np.array([(c >> k) & 1 for k in range(3)], bool), hi, lo)
                                for c in range(8)], axis=1)
            for a in range(8):
                for k in range(3):
                    b = a | (1 << k)
                    if b != a:
                        out.append(np.stack([corners[:, a], corners[:, b]], axis=1))
        out = [e for e in out if len(e)]
        return np.concatenate(out) if out else np.zeros((0, 2, 3))

    def merged(self, other):
        meta = {}
        if self.meta or other.meta:
            keys = set(self.meta) & set(other.meta)
            meta = {k: np.concatenate([self.meta[k], other.meta[k]]) for k in keys}
        return ObstacleSet(
            np.concatenate([self.triangles, other.triangles]),
            np.concatenate([self.squares, other.squares]),
            np.concatenate([self.tetrahedra, other.tetrahedra]),
            np.concatenate([self.boxes, other.boxes]),
            meta, {**self.provenance, **other.provenance},
        )

    def select_triangles(self, mask):
        meta = {k: v[mask] for k, v in self.meta.items()}
        return replace(self, triangles=self.triangles[mask], meta=meta)


def equilateral_triangles(centers, normals, side):
    """Triangles centred at ``centers`` in the planes with the given normals.

    The first edge follows the projection of the x axis onto the plane, or of
    the y axis where the x axis is (nearly) normal to it.
    """
    centers = np.atleast_2d(centers)
    n = np.atleast_2d(normals)
    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])
    e = ex - (n @ ex)[:, None] * n
    weak = np.linalg.norm(e, axis=1) < 1e-6
    e[weak] = ey - (n[weak] @ ey)[:, None] * n[weak]
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    f = np.cross(n, e)
    R = side / SQRT3
    v0 = centers - 0.5 * side * e - 0.5 * R * f
    v1 = centers + 0.5 * side * e - 0.5 * R * f
    v2 = centers + R * f
    return np.stack([v0, v1, v2], axis=1)


def side_lengths(tris):
    return np.linalg.norm(tris - np.roll(tris, -1, axis=1), axis=2)


def flat_wall(extent, side=0.99, heights=(0.01, 0.02, 0.03, 0.04)):
    """Four shifted layers of axis-parallel squares centred on an integer grid."""
    if extent < 1:
        raise ValueError("extent must be at least 1")
    shifts = [(0.0, 0.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5)]
    g = np.arange(-extent, extent + 1, dtype=float)
    X, Y = np.meshgrid(g, g, indexing="ij")
    X, Y = X.ravel(), Y.ravel()
    h = side / 2
    corners = np.array([(-h, -h), (h, -h), (h, h), (-h, h)])
    squares, layer = [], []
    for k, ((sx, sy), z) in enumerate(zip(shifts, heights)):
        cx, cy = X + sx, Y + sy
        sq = np.zeros((len(cx), 4, 3))
        sq[:, :, 0] = cx[:, None] + corners[:, 0]
        sq[:, :, 1] = cy[:, None] + corners[:, 1]
        sq[:, :, 2] = z
        squares.append(sq)
        layer.append(np.full(len(cx), k))
    obs = ObstacleSet(squares=np.concatenate(squares))
    obs.provenance = {"kind": "flat_wall", "extent": extent, "side": side, "heights": list(heights)}
    obs.meta = {"square_layer": np.concatenate(layer)}
    return obs


def _dev(delta, r, convex):
    """Largest offset deviation of a tangent-plane point at distance r (radius-1 curvature)."""
    rad = 1 + delta if convex else 1 - abs(delta)
    return math.sqrt(rad * rad + r * r) - rad


def layer_schedule(delta, n_layers, cfg: WallConfig, zeta, convex):
    """Per-class offsets and the offset interval each class occupies.

    Fidelity mode uses delta + 4 i zeta^2 for i = 1..n_layers. Relaxed mode
    uses ``cfg.band_step`` when given, otherwise stacks layers so that the
    intervals they occupy are disjoint.
    """
    r = cfg.side_factor * zeta / SQRT3
    offs, lo, hi = [], [], []
    if cfg.mode == "fidelity":
        for i in range(1, n_layers + 1):
            d = delta + 4 * i * zeta * zeta
            dv = 2 * r * r
            offs.append(d)
            lo.append(d - dv)
            hi.append(d + dv)
        return np.array(offs), np.array(lo), np.array(hi)
    cur = delta
    for i in range(n_layers):
        if cfg.band_step is not None:
            d = delta + cfg.band_step * i
            dv = _dev(d, r, convex)
        elif convex:
            d = cur
            dv = _dev(d, r, convex)
            cur = d + dv + cfg.gap
        else:
            dv = _dev(max(abs(cur), abs(cur + 0.1)), r, convex)
            d = cur + dv
            cur = d + dv + cfg.gap
        offs.append(d)
        lo.append(d if convex else d - dv)
        hi.append(d + dv)
    return np.array(offs), np.array(lo), np.array(hi)


def _place_bands(cfg, n_layers, zeta, convex):
    """Band starts with equal gaps before, between and after the bands."""

    def place(g):
        starts, cur = [], -0.5 + g
        for _ in range(cfg.bands):
            hi = layer_schedule(cur, n_layers, cfg, zeta, convex)[2]
            starts.append(cur)
            cur = float(hi.max()) + g
        return starts, cur

    if place(0.0)[1] > 0.5:
        raise OffsetBandOutOfRange(f"{cfg.bands} bands of {n_layers} layers do not fit in (-1/2, 1/2)")
    lo_g, hi_g = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo_g + hi_g)
        if place(mid)[1] <= 0.5:
            lo_g = mid
        else:
            hi_g = mid
    return place(lo_g)[0]


def _is_convex(S):
    return all(p.kind != "Joint" for p in S.patches)


def layer_triangles(S, delta, zeta, cfg: WallConfig, net=None, partition=None, band=0):
    """One triangle per net point, class i placed on its own offset layer."""
    convex = _is_convex(S)
    if cfg.mode == "fidelity":
        if not zeta < 1 / (2 * cfg.nu):
            raise ZetaTooLarge(f"need zeta < 1/(2 nu) = {1 / (2 * cfg.nu)}")
        if not -0.5 < delta < 0.5 - cfg.nu * zeta * zeta:
            raise OffsetBandOutOfRange(f"delta {delta} outside (-1/2, 1/2 - nu zeta^2)")
    net = patchwork_net(S, zeta) if net is None else net
    part = partition_classes(net, cfg.t) if partition is None else partition
    n_layers = cfg.b if cfg.mode == "fidelity" else (cfg.layers_per_band or part.n_classes)
    if part.n_classes > n_layers:
        raise TooManyClassesNeeded(f"{part.n_classes} classes but only {n_layers} layers per band")
    offs, lo, hi = layer_schedule(delta, n_layers, cfg, zeta, convex)
    if cfg.mode == "relaxed" and not (-0.5 < lo.min() and hi.max() < 0.5):
        raise OffsetBandOutOfRange(f"band [{lo.min():.6g}, {hi.max():.6g}] leaves (-1/2, 1/2)")
    cls = part.labels
    d = offs[cls]
    centers = net.pos + d[:, None] * net.normal
    tris = equilateral_triangles(centers, net.normal, cfg.side_factor * zeta)
    m = len(tris)
    meta = {
        "delta": d, "layer": cls.astype(np.int64), "band": np.full(m, band, np.int64),
        "patch": net.patch_id.astype(np.int64), "tangency": centers, "normal": net.normal.copy(),
        "base": net.pos.copy(), "lo": lo[cls], "hi": hi[cls],
        "band_lo": np.full(m, float(lo.min())), "band_hi": np.full(m, float(hi.max())),
    }
    return ObstacleSet(triangles=tris, meta=meta, provenance={"zeta": zeta, "t": cfg.t})


@dataclass(frozen=True)
class SeparatorCount:
    count: int
    exact: bool
    zeta: float
    bands: int
    net_size: int
    sigma0: float | None = None


def count_separator(surface, sigma, cfg: WallConfig):
    """Obstacle count of the separator without building it.

    ``surface`` is a Patchwork (net size from the analytic patch counts) or an
    area (net size estimated as area / zeta^2, reported as not exact).
    """
    if not sigma > 1:
        raise ValueError("sigma must exceed 1")
    if cfg.mode == "fidelity":
        zeta, sigma0, bands = cfg.fidelity_schedule(sigma)
    else:
        zeta, sigma0, bands = cfg.zeta, None, cfg.bands
    if isinstance(surface, (int, float)):
        net_size, exact = math.ceil(surface / (zeta * zeta)), False
    else:
        net_size, exact = patchwork_net_count_report(surface, zeta)
    return SeparatorCount(int(bands) * int(net_size), exact, zeta, int(bands), int(net_size), sigma0)


def build_separator(S, sigma, cfg: WallConfig, cap=10**7, net=None, partition=None, window=None):
    """Stack layers of triangles into a wall between S(-1/2) and S(1/2).

    With ``window = (lo, hi)`` only the part of the wall over that world box is
    built (relaxed mode); ``cap`` then bounds the partial obstacle count.
    """
    cfg.validate()
    if window is not None and cfg.mode == "fidelity":
        raise InfeasibleConfig("windowed materialisation is relaxed-mode only", 0)
    if window is None:
        cnt = count_separator(S, sigma, cfg)
        if cnt.count > cap:
            raise InfeasibleConfig(f"separator needs {cnt.count} obstacles, cap is {cap}", cnt.count)
    if cfg.mode == "fidelity":
        zeta = cnt.zeta
        deltas = [-0.5 + 2 * i * cfg.nu * zeta * zeta for i in range(1, cnt.bands + 1)]
        per_band_bound = 4 * zeta
    else:
        zeta = cfg.zeta
        deltas = None
    if net is None:
        net = patchwork_net(S, zeta, window)
    part = partition_classes(net, cfg.t) if partition is None else partition
    if window is not None:
        partial = len(net) * cfg.bands
        if partial > cap:
            raise InfeasibleConfig(f"windowed separator needs {partial} obstacles, cap is {cap}", partial)
    convex = _is_convex(S)
    if deltas is None:
        n_layers = cfg.layers_per_band or part.n_classes
        deltas = _place_bands(cfg, n_layers, zeta, convex)
        per_band_bound = None
    out = None
    bounds = []
    for k, d in enumerate(deltas):
        layer = layer_triangles(S, d, zeta, cfg, net=net, partition=part, band=k)
        thick = float(layer.meta["band_hi"][0] - layer.meta["band_lo"][0])
        bounds.append(per_band_bound if per_band_bound is not None else thick)
        out = layer if out is None else out.merged(layer)
    out.provenance = {
        "mode": cfg.mode, "zeta": zeta, "sigma": float(sigma), "t": cfg.t, "nu": cfg.nu,
        "side": cfg.side_factor * zeta, "bands": len(deltas), "band_starts": [float(x) for x in deltas],
        "classes": part.n_classes, "net_size": len(net), "per_band_bound": bounds,
        "separation_bound": float(sum(bounds)),
        "partial": window is not None,
    }
    return out


def _candidate_pairs(obs):
    tris = obs.triangles
    c = tris.mean(axis=1)
    r = np.linalg.norm(tris - c[:, None, :], axis=2).max()
    return cKDTree(c).query_pairs(2 * r * (1 + 1e-9), output_type="ndarray")


def check_disjoint(obs: ObstacleSet, rel_tol=1e-12, chunk=200_000):
    """Exact closed-triangle distances over all candidate pairs (squares split into two triangles)."""
    work = obs
    if len(obs.squares):
        sq = obs.squares
        extra = np.concatenate([sq[:, [0, 1, 2]], sq[:, [0, 2, 3]]])
        owner = np.concatenate([np.arange(len(sq)), np.arange(len(sq))]) + len(obs.triangles)
        tris = np.concatenate([obs.triangles, extra])
        ids = np.concatenate([np.arange(len(obs.triangles)), owner])
    else:
        tris, ids = obs.triangles, np.arange(len(obs.triangles))
    work = ObstacleSet(triangles=tris)
    if len(tris) < 2:
        return {"pairs": 0, "intersecting": [], "min_distance": math.inf, "ok": True}
    pairs = _candidate_pairs(work)
    pairs = pairs[ids[pairs[:, 0]] != ids[pairs[:, 1]]]
    tol = rel_tol * obs.scale()
    bad, dmin = [], math.inf
    for s in range(0, len(pairs), chunk):
        p = pairs[s:s + chunk]
        d = triangle_triangle_distance(tris[p[:, 0]], tris[p[:, 1]])
        if len(d):
            dmin = min(dmin, float(d.min()))
        for i in np.flatnonzero(d < tol):
            bad.append((int(ids[p[i, 0]]), int(ids[p[i, 1]]), float(d[i])))
    return {"pairs": int(len(pairs)), "intersecting": bad, "min_distance": dmin, "ok": not bad}


def check_band_containment(S, obs: ObstacleSet, tol=1e-9):
    """Signed offset of every triangle vertex within its declared interval."""
    v = obs.triangles.reshape(-1, 3)
    delta = S.nearest(v)["delta"].reshape(-1, 3)
    lo, hi = obs.meta["lo"][:, None] - tol, obs.meta["hi"][:, None] + tol
    blo, bhi = obs.meta["band_lo"][:, None] - tol, obs.meta["band_hi"][:, None] + tol
    in_layer = (delta >= lo) & (delta <= hi)
    in_band = (delta >= blo) & (delta <= bhi)
    return {
        "vertices": int(delta.size),
        "in_layer": float(in_layer.mean()),
        "in_band": float(in_band.mean()),
        "worst_excess": float(np.maximum(lo - delta, delta - hi).max()),
        "ok": bool(in_band.all() and in_layer.all()),
    }
