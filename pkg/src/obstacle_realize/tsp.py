"""Tours: Held-Karp optimum, 2-opt heuristic, obstacle pipeline and the reduction harness."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .geodesy import geodesic_matrix
from .metric import FiniteMetric, spread, validate_metric

EXACT_LIMIT = 18


class TooLarge(ValueError):
    """Instance exceeds the exact solver's size limit."""


@dataclass
class Tour:
    order: list
    length: float
    method: str
    certificate: dict = field(default_factory=dict)

    def to_json(self):
        return {"order": [int(i) for i in self.order], "length": self.length, "method": self.method,
                "certificate": self.certificate}


def _matrix(m):
    return np.asarray(m.dist if isinstance(m, FiniteMetric) else m, dtype=float)


def tour_length(D, order):
    D = _matrix(D)
    o = np.asarray(order)
    return float(D[o, np.roll(o, -1)].sum())


def check_tour(D, tour: Tour, rel_tol=1e-12):
    D = _matrix(D)
    n = len(D)
    if sorted(int(i) for i in tour.order) != list(range(n)):
        raise ValueError("tour is not a permutation")
    ref = tour_length(D, tour.order)
    if abs(ref - tour.length) > rel_tol * max(1.0, abs(ref)):
        raise ValueError(f"tour length {tour.length} disagrees with recomputed {ref}")


def _canonical(order):
    """Rotate to start at 0 and pick the lexicographically smaller direction."""
    k = order.index(0)
    fwd = order[k:] + order[:k]
    rev = [0] + fwd[1:][::-1]
    return min(fwd, rev)


def tsp_exact(m, limit=EXACT_LIMIT):
    """Optimal closed tour by dynamic programming over subsets (Held-Karp)."""
    D = _matrix(m)
    n = len(D)
    if n > limit:
        raise TooLarge(f"n = {n} exceeds the exact limit {limit}")
    if n <= 3:
        order = list(range(n))
        return Tour(order, tour_length(D, order) if n > 1 else 0.0, "exact_dp")
    k = n - 1  # city 0 is the fixed start; subsets range over cities 1..n-1
    full = 1 << k
    dp = np.full((full, k), np.inf)
    parent = np.full((full, k), -1, dtype=np.int64)
    for j in range(k):
        dp[1 << j, j] = D[0, j + 1]
    W = D[1:, 1:]
    bits = np.array([1 << j for j in range(k)])
    for mask in range(1, full):
        row = dp[mask]
        if not np.isfinite(row).any():
            continue
        outside = (mask & bits) == 0
        if not outside.any():
            continue
        # extend every end city c in mask to every j outside mask
        cand = row[:, None] + W  # (c, j)
        best_c = np.argmin(cand, axis=0)
        best = cand[best_c, np.arange(k)]
        for j in np.flatnonzero(outside):
            nm = mask | (1 << j)
            if best[j] < dp[nm, j]:
                dp[nm, j] = best[j]
                parent[nm, j] = best_c[j]
    closing = dp[full - 1] + D[1:, 0]
    last = int(np.argmin(closing))
    order = []
    mask, j = full - 1, last
    while j >= 0:
        order.append(j + 1)
        pj = int(parent[mask, j])
        mask ^= 1 << j
        j = pj
    order = _canonical([0] + order[::-1])
    return Tour(order, tour_length(D, order), "exact_dp")


def tsp_bruteforce(m):
    """Exhaustive enumeration over the (n-1)!/2 distinct tours (oracle)."""
    D = _matrix(m)
    n = len(D)
    best, best_order = math.inf, None
    for perm in itertools.permutations(range(1, n)):
        if n > 2 and perm[0] > perm[-1]:
            continue
        order = [0, *perm]
        L = tour_length(D, order)
        if L < best - 1e-12:
            best, best_order = L, order
    return Tour(best_order, best, "bruteforce")


def _nearest_neighbour(D, start):
    n = len(D)
    seen = np.zeros(n, bool)
    order = [start]
    seen[start] = True
    for _ in range(n - 1):
        row = np.where(seen, np.inf, D[order[-1]])
        nxt = int(np.argmin(row))
        order.append(nxt)
        seen[nxt] = True
    return order


def _two_opt(D, order):
    order = list(order)
    n = len(order)
    improved = True
    while improved:
        improved = False
        for a in range(n - 1):
            for b in range(a + 2, n if a > 0 else n - 1):
                i, i1 = order[a], order[a + 1]
                j, j1 = order[b], order[(b + 1) % n]
                gain = D[i, i1] + D[j, j1] - D[i, j] - D[i1, j1]
                if gain > 1e-12:
                    order[a + 1:b + 1] = order[a + 1:b + 1][::-1]
                    improved = True
    return order


def tsp_heuristic(m, seed=0, restarts=4):
    """Nearest neighbour from seeded starts, each improved by 2-opt."""
    D = _matrix(m)
    n = len(D)
    if n < 3:
        raise ValueError("heuristic needs n >= 3")
    rng = np.random.default_rng(seed)
    starts = [0] + list(rng.choice(np.arange(1, n), size=min(restarts, n) - 1, replace=False))
    best = None
    nn_best = math.inf
    for s in starts:
        nn = _nearest_neighbour(D, int(s))
        nn_best = min(nn_best, tour_length(D, nn))
        order = _canonical(_two_opt(D, nn))
        L = tour_length(D, order)
        if best is None or L < best.length - 1e-12:
            best = Tour(order, L, "heuristic")
    best.certificate = {"nearest_neighbour": nn_best, "seed": int(seed), "restarts": len(starts)}
    return best


def solve(D, seed=0):
    return tsp_exact(D) if len(D) <= EXACT_LIMIT else tsp_heuristic(D, seed)


def tsp_with_obstacles(sites, obs, h, epsilon=None, seed=0, node_cap=None):
    """Tour over geodesic distances among ``sites``.

    Distances come from the sampled visibility graph, so every entry is the
    length of a feasible polyline and the tour length is an upper bound on the
    obstacle-avoiding optimum.
    """
    sites = np.atleast_2d(np.asarray(sites, float))
    kw = {} if node_cap is None else {"node_cap": node_cap}
    D, nodes = geodesic_matrix(sites, obs, h, **kw)
    D = np.minimum(D, D.T)
    np.fill_diagonal(D, 0.0)
    metric = validate_metric(D)
    tour = solve(metric.dist, seed)
    tour.certificate.update({"h": h, "epsilon": epsilon, "graph_nodes": int(nodes),
                             "apsp": D.tolist()})
    return tour


def reduction_harness(m: FiniteMetric, epsilon, max_spread_exponent=4, seed=0):
    """Tour of ``m`` against tours of its obstacle realisation.

    The realised instance is bracketed by two matrices derived from the layout:
    the rescaled metric itself, a lower bound on every geodesic distance
    between embedded sites, and the witness tube paths, which are feasible
    polylines inside the inner offset shell. Both are closed forms, so the
    oracle refinement slack ``eta`` is zero here; it is reported so the check
    reads the same as for sampled distances.
    """
    from .realization import layout_surface, witness_length

    n = m.n
    sp = spread(m)
    if n > 1 and sp.spread > n ** max_spread_exponent:
        raise ValueError(f"spread {sp.spread:.3g} exceeds n^{max_spread_exponent}")
    S, emb, plan = layout_surface(m, epsilon, validate=False)
    f = emb.scale_factor
    lower = m.dist * f
    upper = np.zeros_like(lower)
    for i in range(n):
        for j in range(i + 1, n):
            upper[i, j] = upper[j, i] = witness_length(plan, i + 1, j + 1)
    opt = solve(lower, seed)
    hi = solve(upper, seed)
    eta = 0.0
    report = {
        "n": n, "epsilon": epsilon, "scale_factor": f,
        "opt_metric": opt.length / f, "opt_scaled": opt.length,
        "obstacle_tour_lower": opt.length, "obstacle_tour_upper": hi.length,
        "ratio_upper": hi.length / opt.length if opt.length else 1.0,
        "eta": eta, "within": bool(opt.length <= hi.length <= (1 + epsilon) * (1 + eta) * opt.length * (1 + 1e-12)),
        "order_metric": opt.order, "order_obstacles": hi.order, "patches": len(S.patches),
    }
    return {"surface": S, "embedding": emb, "plan": plan, "lower": lower, "upper": upper}, report
