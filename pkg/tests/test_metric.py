import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from obstacle_realize.metric import (
    AsymmetryError, NonzeroDiagonalError, NonPositiveDistance, TriangleViolation, graph_metric,
    load_metric, random_metric, rescale_to_min, save_metric, spread, target_min_distance,
    uniform_metric, validate_metric,
)


def test_smallest_metric():
    m = validate_metric([[0, 1], [1, 0]])
    assert m.n == 2 and m.dist[0, 1] == 1


def test_triangle_violation_names_triple():
    with pytest.raises(TriangleViolation) as e:
        validate_metric([[0, 1, 3], [1, 0, 1], [3, 1, 0]], labels=["a", "b", "c"])
    assert {"a", "b", "c"} <= set(str(e.value).replace(",", " ").replace("(", " ").replace(")", " ").split())


@pytest.mark.parametrize("bad, err", [
    ([[0, 1], [2, 0]], AsymmetryError),
    ([[1, 1], [1, 0]], NonzeroDiagonalError),
    ([[0, 0], [0, 0]], NonPositiveDistance),
])
def test_axiom_errors(bad, err):
    with pytest.raises(err):
        validate_metric(bad)


def test_uniform_five_points():
    m = uniform_metric(5)
    assert spread(m).spread == 1.0


def test_spread_two_values():
    m = validate_metric([[0, 1, 2], [1, 0, 2], [2, 2, 0]])
    assert spread(m).spread == 2.0


def test_graph_metric_spread_bound(rng):
    for n in range(3, 9):
        edges = [(i, i + 1, rng.uniform(0.5, 2)) for i in range(n - 1)]
        edges += [(int(a), int(b), rng.uniform(0.5, 2)) for a, b in rng.integers(0, n, size=(n, 2)) if a != b]
        m = graph_metric(n, edges)
        assert spread(m).spread <= 4 * (n - 1)


@pytest.mark.parametrize("n, eps, dmin, factor", [(2, 0.5, 1.0, 656.0), (3, 1.0, 2.0, 553.5)])
def test_rescale_examples(n, eps, dmin, factor):
    D = np.full((n, n), dmin * 1.5)
    D[0, 1] = D[1, 0] = dmin
    np.fill_diagonal(D, 0)
    m2, f = rescale_to_min(validate_metric(D), n, eps)
    assert f == pytest.approx(factor, rel=1e-15)
    assert m2.off_diagonal().min() == pytest.approx(41 * n**3 / eps, rel=1e-15)


def test_rescale_identity_at_target():
    t = target_min_distance(2, 0.5)
    m, f = rescale_to_min(validate_metric([[0, t], [t, 0]]), 2, 0.5)
    assert f == 1.0


@given(st.integers(2, 7), st.floats(0.01, 0.99), st.integers(0, 10**6))
def test_rescale_preserves_axioms_and_spread(n, eps, seed):
    m = random_metric(n, np.random.default_rng(seed))
    m2, f = rescale_to_min(m, n, eps)
    validate_metric(m2.dist, m2.labels)
    assert spread(m2).spread == pytest.approx(spread(m).spread, rel=1e-12)
    assert m2.off_diagonal().min() == pytest.approx(41 * n**3 / eps, rel=1e-12)


def test_json_roundtrip(tmp_path, rng):
    m = random_metric(6, rng)
    save_metric(m, tmp_path / "m.json")
    m2 = load_metric(tmp_path / "m.json")
    assert np.array_equal(m.dist, m2.dist) and list(m.labels) == list(m2.labels)


def test_triangle_tolerance_absorbs_rounding():
    a = 0.1 + 0.2
    validate_metric([[0, 0.1, a], [0.1, 0, 0.2], [a, 0.2, 0]])
    assert math.isclose(a, 0.3)
