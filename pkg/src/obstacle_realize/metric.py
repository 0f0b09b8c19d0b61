"""Finite metric spaces: validation, spread and rescaling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class MetricError(ValueError):
    pass


class AsymmetryError(MetricError):
    def __init__(self, i, j, dij, dji):
        super().__init__(f"dist[{i}][{j}]={dij!r} != dist[{j}][{i}]={dji!r}")
        self.pair = (i, j)


class NonzeroDiagonalError(MetricError):
    def __init__(self, i, value):
        super().__init__(f"dist[{i}][{i}]={value!r} is not zero")
        self.index = i


class NonPositiveDistance(MetricError):
    def __init__(self, i, j, value):
        super().__init__(f"dist[{i}][{j}]={value!r} must be > 0 for distinct points")
        self.pair = (i, j)


class TriangleViolation(MetricError):
    def __init__(self, labels, i, j, k, excess):
        a, b, c = labels[i], labels[j], labels[k]
        super().__init__(
            f"triangle inequality violated: d({a},{c}) > d({a},{b}) + d({b},{c}) by {excess:.6g}"
        )
        self.triple = (a, b, c)
        self.indices = (i, j, k)


@dataclass(frozen=True)
class FiniteMetric:
    labels: tuple
    dist: np.ndarray = field(repr=False)

    @property
    def n(self):
        return len(self.labels)

    def index(self, label):
        return self.labels.index(label)

    def off_diagonal(self):
        iu = np.triu_indices(self.n, 1)
        return self.dist[iu]

    def to_json(self):
        return {"labels": list(self.labels), "dist": [[float(x) for x in row] for row in self.dist]}


@dataclass(frozen=True)
class SpreadReport:
    max_dist: float
    min_dist: float
    spread: float


def validate_metric(matrix, labels=None, rel_tol=1e-9):
    """Check the metric axioms and return a :class:`FiniteMetric`.

    The triangle inequality is tested with an additive slack of
    ``rel_tol * max_dist`` so that values read back from rounded files pass.
    """
    d = np.array(matrix, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise MetricError(f"distance matrix must be square, got shape {d.shape}")
    n = d.shape[0]
    if n < 2:
        raise MetricError("a metric needs at least two points")
    if labels is None:
        labels = [f"x{i + 1}" for i in range(n)]
    labels = tuple(str(x) for x in labels)
    if len(labels) != n:
        raise MetricError(f"{len(labels)} labels for {n} points")
    if len(set(labels)) != n:
        raise MetricError("labels must be unique")
    if not np.all(np.isfinite(d)):
        raise MetricError("distances must be finite")

    for i in range(n):
        if d[i, i] != 0.0:
            raise NonzeroDiagonalError(i, d[i, i])
    asym = np.argwhere(d != d.T)
    if len(asym):
        i, j = asym[0]
        raise AsymmetryError(int(i), int(j), d[i, j], d[j, i])
    off = ~np.eye(n, dtype=bool)
    bad = np.argwhere(off & (d <= 0))
    if len(bad):
        i, j = bad[0]
        raise NonPositiveDistance(int(i), int(j), d[i, j])

    slack = rel_tol * d.max()
    # d[i,k] - (d[i,j] + d[j,k]) over all triples, j as the middle index
    for j in range(n):
        excess = d - (d[:, j][:, None] + d[j, :][None, :])
        worst = np.unravel_index(np.argmax(excess), excess.shape)
        if excess[worst] > slack:
            i, k = int(worst[0]), int(worst[1])
            raise TriangleViolation(labels, i, j, k, float(excess[worst]))
    return FiniteMetric(labels, d)


def spread(m: FiniteMetric) -> SpreadReport:
    off = m.off_diagonal()
    hi, lo = float(off.max()), float(off.min())
    return SpreadReport(hi, lo, hi / lo)


def target_min_distance(n, epsilon):
    return 41.0 * n**3 / epsilon


def rescale_to_min(m: FiniteMetric, n=None, epsilon=0.5):
    """Scale ``m`` so its minimum distance is ``41 n^3 / epsilon``.

    Returns the scaled metric and the factor applied; divide geodesic lengths
    by the factor to return to the caller's units.
    """
    if not epsilon > 0:
        raise MetricError(f"epsilon must be positive, got {epsilon}")
    n = m.n if n is None else n
    target = target_min_distance(n, epsilon)
    lo = float(m.off_diagonal().min())
    factor = 1.0 if lo == target else target / lo
    scaled = m.dist * factor
    if factor != 1.0:
        # pin the minimum exactly at the target despite rounding
        scaled[m.dist == lo] = target
    return FiniteMetric(m.labels, scaled), factor


def uniform_metric(n, value=1.0):
    d = np.full((n, n), float(value))
    np.fill_diagonal(d, 0.0)
    return validate_metric(d)


def random_metric(n, rng, low=1.0, high=2.0):
    """Random metric with all distances in [low, high] (high <= 2 low keeps it metric)."""
    if high > 2 * low:
        raise ValueError("need high <= 2*low for an automatically valid metric")
    d = rng.uniform(low, high, size=(n, n))
    d = np.triu(d, 1)
    d = d + d.T
    return validate_metric(d)


def graph_metric(n, edges):
    """Shortest-path metric of a connected weighted graph given as (i, j, w) triples."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import shortest_path

    W = np.full((n, n), np.inf)
    for i, j, w in edges:
        if i != j:
            W[i, j] = W[j, i] = min(W[i, j], float(w))  # parallel edges: keep the lightest
    W[~np.isfinite(W)] = 0.0
    d = shortest_path(csr_matrix(W), directed=False)
    if not np.all(np.isfinite(d)):
        raise MetricError("graph is not connected")
    return validate_metric(d)


def load_metric(path):
    with open(path) as fh:
        obj = json.load(fh)
    return validate_metric(obj["dist"], obj.get("labels"))


def save_metric(m: FiniteMetric, path):
    with open(path, "w") as fh:
        json.dump(m.to_json(), fh, indent=1)
