"""Geodesic distances among obstacles via visibility graphs over edge samples.

Every returned path is a polyline whose segments pass the visibility test, so
its length is an upper bound on the true geodesic distance. Lower bounds are
never certified here; ``falsify_separation`` only searches for a counterexample.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .geom import box_planes, segment_crosses_polygon, segment_enters_solid, tetra_planes
from .walls import ObstacleSet

__all__ = [
    "InvalidDimension", "Unreachable", "BudgetExceeded", "beta", "Visibility",
    "visible", "edge_samples", "approx_geodesic", "GeodesicResult",
    "falsify_separation", "SeparationVerdict", "apsp", "doubling_cover",
    "covering_template", "DEFAULT_NODE_CAP",
]

DEFAULT_NODE_CAP = 2_000_000


class InvalidDimension(ValueError):
    pass


class Unreachable(RuntimeError):
    pass


class BudgetExceeded(RuntimeError):
    pass


def beta(d, alpha):
    """Stretch bound between geodesic and Euclidean distance among alpha-fat convex obstacles."""
    if int(d) != d or d < 2:
        raise InvalidDimension(f"dimension must be an integer >= 2, got {d}")
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if d == 2:
        return 1 + 4 / (math.pi * alpha)
    return 1 + 8 * d**d / alpha


class Visibility:
    """Segment blocking tests against an obstacle set, with a sphere-tree prefilter."""

    def __init__(self, obs: ObstacleSet, rel_eps=1e-12):
        self.obs = obs
        self.eps = rel_eps * obs.scale()
        self.groups = []
        for kind, arr in (("poly", obs.triangles), ("poly", obs.squares)):
            if len(arr):
                self._add(kind, arr, arr)
        if len(obs.tetrahedra):
            N, O = tetra_planes(obs.tetrahedra)
            self._add("solid", obs.tetrahedra, (N, O))
        if len(obs.boxes):
            N, O = box_planes(obs.boxes)
            lo, hi = obs.boxes[:, 0], obs.boxes[:, 1]
            corners = np.stack([lo, hi], axis=1)
            self._add("solid", corners, (N, O))

    def _add(self, kind, pts, data):
        c = pts.mean(axis=1)
        r = np.linalg.norm(pts - c[:, None, :], axis=2).max(axis=1)
        if kind == "solid" and pts.shape[1] == 2:
            r = 0.5 * np.linalg.norm(pts[:, 1] - pts[:, 0], axis=1)
        tree = cKDTree(c) if len(c) > 32 else None
        self.groups.append({"kind": kind, "data": data, "center": c, "radius": r,
                            "rmax": float(r.max()), "tree": tree})

    def _test(self, g, P, Q, idx):
        if g["kind"] == "poly":
            return segment_crosses_polygon(P, Q, g["data"][idx], self.eps)
        N, O = g["data"]
        return segment_enters_solid(P, Q, N[idx], O[idx], self.eps)

    def blocked(self, P, Q):
        P = np.atleast_2d(np.asarray(P, float))
        Q = np.atleast_2d(np.asarray(Q, float))
        P = np.broadcast_to(P, Q.shape) if len(P) == 1 else P
        out = np.zeros(len(Q), bool)
        if not len(Q):
            return out
        mid = 0.5 * (P + Q)
        half = 0.5 * np.linalg.norm(Q - P, axis=1)
        for g in self.groups:
            if g["tree"] is None:
                m = len(g["center"])
                si = np.repeat(np.arange(len(Q)), m)
                oi = np.tile(np.arange(m), len(Q))
                d = np.linalg.norm(mid[si] - g["center"][oi], axis=1)
                keep = d <= half[si] + g["radius"][oi] + self.eps
                si, oi = si[keep], oi[keep]
            else:
                lists = g["tree"].query_ball_point(mid, half + g["rmax"] + self.eps)
                lens = np.fromiter((len(x) for x in lists), int, len(lists))
                if not lens.sum():
                    continue
                si = np.repeat(np.arange(len(Q)), lens)
                oi = np.fromiter((j for x in lists for j in x), int, int(lens.sum()))
            live = ~out[si]
            si, oi = si[live], oi[live]
            if not len(si):
                continue
            hit = self._test(g, P[si], Q[si], oi)
            out[si[hit]] = True
        return out

    def visible(self, p, q):
        return not self.blocked(np.asarray(p, float)[None], np.asarray(q, float)[None])[0]

    def inside_solid(self, X):
        """Points strictly inside a solid obstacle."""
        X = np.atleast_2d(X)
        res = np.zeros(len(X), bool)
        for g in self.groups:
            if g["kind"] != "solid":
                continue
            N, O = g["data"]
            depth = np.einsum("mfi,ni->nmf", N, X) - O[None]
            res |= np.any(np.all(depth < -self.eps, axis=2), axis=1)
        return res


def visible(p, q, obs: ObstacleSet):
    if obs.empty:
        return True
    return Visibility(obs).visible(p, q)


def edge_samples(obs: ObstacleSet, h):
    """Points on every obstacle edge at dyadic spacing <= h (vertices included).

    Subdivision counts are powers of two, so halving h only adds points.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    E = obs.edges()
    if not len(E):
        return np.zeros((0, 3))
    L = np.linalg.norm(E[:, 1] - E[:, 0], axis=1)
    k = 2 ** np.ceil(np.log2(np.maximum(L / h, 1.0))).astype(np.int64)
    pts = []
    for kk in np.unique(k):
        sel = E[k == kk]
        s = np.arange(kk + 1) / kk
        pts.append((sel[:, :1] + s[None, :, None] * (sel[:, 1:] - sel[:, :1])).reshape(-1, 3))
    return np.unique(np.vstack(pts), axis=0)


@dataclass
class GeodesicResult:
    length: float
    polyline: np.ndarray
    h: float
    nodes: int
    expansions: int = 0

    def to_json(self):
        return {"length": self.length, "polyline": self.polyline.tolist(), "h": self.h, "nodes": self.nodes}


def _check_budget(n, cap, h):
    if n > cap:
        raise BudgetExceeded(f"{n} graph nodes at h={h} exceed the cap {cap}; use a larger h or raise the cap")


def _trace(parent, i):
    path = [i]
    while parent[path[-1]] >= 0:
        path.append(parent[path[-1]])
    return path[::-1]


def approx_geodesic(p, q, obs: ObstacleSet, h, node_cap=DEFAULT_NODE_CAP, vis=None, samples=None):
    """Shortest visibility-graph path from p to q through obstacle-edge samples.

    A* with the straight-line heuristic, searched inside the ellipsoid
    |pv| + |vq| <= U, where U doubles until a path of length <= U exists.
    """
    p, q = np.asarray(p, float), np.asarray(q, float)
    if obs.empty:
        return GeodesicResult(float(np.linalg.norm(q - p)), np.stack([p, q]), h, 2)
    vis = Visibility(obs) if vis is None else vis
    S = edge_samples(obs, h) if samples is None else samples
    X = np.vstack([p, q, S])
    _check_budget(len(X), node_cap, h)
    direct = float(np.linalg.norm(q - p))
    if vis.visible(p, q):
        return GeodesicResult(direct, np.stack([p, q]), h, len(X))
    ell = np.linalg.norm(X - p, axis=1) + np.linalg.norm(X - q, axis=1)
    U = max(2 * direct, direct + 4 * h)
    expansions = 0
    while True:
        inE = ell <= U * (1 + 1e-12)
        res = _astar(X, vis, inE)
        expansions += res[2]
        if res[0] is not None and res[0] <= U:
            length, path = res[0], res[1]
            return GeodesicResult(float(length), X[path], h, len(X), expansions)
        if inE.all():
            raise Unreachable(f"no path between {p.tolist()} and {q.tolist()} at h={h}")
        U *= 2


def _astar(X, vis, allowed, source=0, target=1):
    hq = np.linalg.norm(X - X[target], axis=1)
    n = len(X)
    g = np.full(n, np.inf)
    parent = np.full(n, -1)
    closed = ~allowed.copy()
    g[source] = 0.0
    heap = [(hq[source], source)]
    expansions = 0
    while heap:
        _, u = heapq.heappop(heap)
        if closed[u]:
            continue
        closed[u] = True
        if u == target:
            return g[u], _trace(parent, u), expansions
        expansions += 1
        cand = np.flatnonzero(~closed)
        d = np.linalg.norm(X[cand] - X[u], axis=1)
        better = g[u] + d < g[cand]
        cand, d = cand[better], d[better]
        if not len(cand):
            continue
        ok = ~vis.blocked(X[u][None], X[cand])
        for v, dv in zip(cand[ok], d[ok]):
            nv = g[u] + dv
            if nv < g[v]:
                g[v] = nv
                parent[v] = u
                heapq.heappush(heap, (nv + hq[v], v))
    return None, None, expansions


@dataclass
class SeparationVerdict:
    falsified: bool
    bound: float
    h: float
    length: float | None = None
    polyline: np.ndarray | None = None
    nodes: int = 0
    settled: int = 0
    note: str = field(default="falsification search over a finite visibility graph; not a proof of the bound")

    def __str__(self):
        if self.falsified:
            return f"Falsified: path of length {self.length:.6g} < {self.bound:.6g} (h={self.h})"
        return f"NotFalsifiedAt(h={self.h}): no path shorter than {self.bound:.6g}"


def falsify_separation(inner, outer, obs: ObstacleSet, L, h, node_cap=DEFAULT_NODE_CAP):
    """Search for any inner-to-outer path shorter than L (multi-source Dijkstra, pruned at L)."""
    inner, outer = np.atleast_2d(np.asarray(inner, float)), np.atleast_2d(np.asarray(outer, float))
    if not len(inner) or not len(outer):
        raise ValueError("sample sets must be nonempty")
    S = edge_samples(obs, h) if not obs.empty else np.zeros((0, 3))
    # Euclidean pruning: a node farther than L from every inner sample cannot help
    if len(S):
        dS = cKDTree(inner).query(S, distance_upper_bound=L)[0]
        S = S[np.isfinite(dS)]
    ni, no = len(inner), len(outer)
    X = np.vstack([inner, outer, S])
    _check_budget(len(X), node_cap, h)
    vis = Visibility(obs) if not obs.empty else None
    tree = cKDTree(X)
    n = len(X)
    g = np.full(n, np.inf)
    parent = np.full(n, -1)
    closed = np.zeros(n, bool)
    g[:ni] = 0.0
    heap = [(0.0, i) for i in range(ni)]
    settled = 0
    while heap:
        gu, u = heapq.heappop(heap)
        if closed[u] or gu >= L:
            if gu >= L:
                break
            continue
        closed[u] = True
        settled += 1
        if ni <= u < ni + no:
            path = _trace(parent, u)
            return SeparationVerdict(True, L, h, float(gu), X[path], n, settled)
        cand = np.asarray(tree.query_ball_point(X[u], L - gu), dtype=int)
        cand = cand[~closed[cand]]
        d = np.linalg.norm(X[cand] - X[u], axis=1)
        better = (gu + d < g[cand]) & (gu + d < L)
        cand, d = cand[better], d[better]
        if not len(cand):
            continue
        ok = np.ones(len(cand), bool) if vis is None else ~vis.blocked(X[u][None], X[cand])
        for v, dv in zip(cand[ok], d[ok]):
            if gu + dv < g[v]:
                g[v] = gu + dv
                parent[v] = u
                heapq.heappush(heap, (gu + dv, v))
    return SeparationVerdict(False, L, h, None, None, n, settled)


def _visibility_graph(X, vis, chunk=400_000):
    n = len(X)
    iu, ju = np.triu_indices(n, 1)
    rows, cols, w = [], [], []
    for s in range(0, len(iu), chunk):
        a, b = iu[s:s + chunk], ju[s:s + chunk]
        ok = np.ones(len(a), bool) if vis is None else ~vis.blocked(X[a], X[b])
        rows.append(a[ok])
        cols.append(b[ok])
        w.append(np.linalg.norm(X[a[ok]] - X[b[ok]], axis=1))
    rows, cols, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(w)
    # zero-length edges would vanish from a sparse matrix; nodes are distinct so none occur
    return coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()


def geodesic_matrix(points, obs: ObstacleSet, h, sources=None, node_cap=DEFAULT_NODE_CAP):
    """Graph distances from ``sources`` (indices into points) to every point."""
    points = np.atleast_2d(np.asarray(points, float))
    S = edge_samples(obs, h) if not obs.empty else np.zeros((0, 3))
    X = np.vstack([points, S])
    X, inv = np.unique(X, axis=0, return_inverse=True)
    inv = np.ravel(inv)
    _check_budget(len(X), node_cap, h)
    vis = Visibility(obs) if not obs.empty else None
    G = _visibility_graph(X, vis)
    src = np.arange(len(points)) if sources is None else np.asarray(sources)
    D = dijkstra(G, directed=False, indices=inv[src])
    return D[:, inv[: len(points)]], len(X)


def apsp(sites, obs: ObstacleSet, h, node_cap=DEFAULT_NODE_CAP):
    """Geodesic distance matrix between sites (shortest paths in one visibility graph)."""
    sites = np.atleast_2d(np.asarray(sites, float))
    D, _ = geodesic_matrix(sites, obs, h, node_cap=node_cap)
    D = np.minimum(D, D.T)
    np.fill_diagonal(D, 0.0)
    return D


def covering_template(R=1.0):
    """Centres of radius-R/2 balls covering the ball of radius R (body-centred cubic lattice).

    The BCC lattice with cube side a has covering radius a sqrt(5)/4; with
    a = 2R/sqrt(5) every point is within R/2 of a lattice point, and only
    lattice points within 3R/2 of the centre can be nearest to a point of the ball.
    """
    a = 2 * R / math.sqrt(5)
    m = math.ceil(1.5 * R / a) + 1
    g = np.arange(-m, m + 1) * a
    G = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    pts = np.vstack([G, G + a / 2])
    return pts[np.linalg.norm(pts, axis=1) <= 1.5 * R]


def doubling_cover(p, r, obs: ObstacleSet, alpha, h, beta_value=None, leaf_budget=200_000,
                   verify_samples=200, rng=None):
    """Centres o_k with geodesic balls B(o_k, r/2) covering the geodesic ball B(p, r).

    Euclidean balls are halved ``ceil(log2(2 beta)) + 1`` times with the BCC
    template; each leaf ball meeting free space contributes one free point.
    With no obstacles geodesic and Euclidean balls coincide and one halving step
    is enough. ``beta_value`` overrides the worst-case stretch constant.
    """
    p = np.asarray(p, float)
    rng = np.random.default_rng(0) if rng is None else rng
    vis = Visibility(obs) if not obs.empty else None
    if obs.empty:
        levels = 1
        b = 1.0
    else:
        b = beta(3, alpha) if beta_value is None else float(beta_value)
        levels = math.ceil(math.log2(2 * b)) + 1
    tmpl = covering_template(1.0)
    centres, rad = p[None, :], float(r)
    for _ in range(levels):
        child = (centres[:, None, :] + rad * tmpl[None, :, :]).reshape(-1, 3)
        rad /= 2
        # children lie on one global lattice, so duplicates coincide up to rounding
        key = np.round((child - p) / (rad * 1e-6)).astype(np.int64)
        _, first = np.unique(key, axis=0, return_index=True)
        child = child[np.sort(first)]
        child = child[np.linalg.norm(child - p, axis=1) <= r + rad]
        if len(child) > leaf_budget:
            raise BudgetExceeded(f"{len(child)} leaf balls exceed the budget {leaf_budget} (levels={levels})")
        centres = child
    reps = []
    for c in centres:
        if vis is None or not vis.inside_solid(c[None])[0]:
            reps.append(c)
            continue
        trial = c + rad * _ball_samples(rng, 64)
        free = trial[~vis.inside_solid(trial)]
        if len(free):
            reps.append(free[0])
    reps = np.array(reps)
    report = _verify_cover(p, r, reps, obs, h, vis, verify_samples, rng)
    report.update({"levels": levels, "beta": b, "c3": len(tmpl), "centres": len(reps),
                   "bound": len(tmpl) ** levels})
    return reps, report


def _ball_samples(rng, n):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * rng.uniform(0, 1, size=(n, 1)) ** (1 / 3)


def _verify_cover(p, r, reps, obs, h, vis, n, rng):
    pts = p + r * _ball_samples(rng, 4 * n)
    if vis is not None:
        pts = pts[~vis.inside_solid(pts)]
    pts = pts[:n]
    if obs.empty:
        inball = np.linalg.norm(pts - p, axis=1) <= r
        d = cKDTree(reps).query(pts[inball])[0]
        worst = float(d.max()) if len(d) else 0.0
        return {"samples": int(inball.sum()), "covered": float(np.mean(d <= r / 2)) if len(d) else 1.0,
                "worst": worst}
    allp = np.vstack([p[None], pts, reps])
    m = len(pts)
    D, _ = geodesic_matrix(allp, obs, h, sources=[0] + list(range(m + 1, len(allp))))
    inball = D[0, 1:m + 1] <= r
    best = D[1:, 1:m + 1].min(axis=0)
    covered = best[inball] <= r / 2 * (1 + 1e-12)
    return {"samples": int(inball.sum()), "covered": float(covered.mean()) if covered.size else 1.0,
            "worst": float(best[inball].max()) if inball.any() else 0.0}
