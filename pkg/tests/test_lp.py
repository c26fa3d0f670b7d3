import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import best_grid_margin, highs_separable
from svdtr.lp import FEAS_TOL, LPStatus, lp_feasible, margin_feasible, satisfies


def test_separable_pair():
    res = lp_feasible(np.array([[1.0, 1.0], [1.0, 2.0]]), [-1, 1])
    assert res.status is LPStatus.FEASIBLE
    margins = np.array([-1, 1]) * (np.array([[1.0, 1.0], [1.0, 2.0]]) @ res.point)
    assert np.all(margins >= 1 - FEAS_TOL)
    # the witness quoted for this instance works too
    assert satisfies(np.array([[-1.0, -1.0], [1.0, 2.0]]), np.array([-3.0, 2.0]))


def test_duplicate_point_opposite_labels():
    res = lp_feasible(np.array([[1.0], [1.0]]), [1, -1])
    assert res.status is LPStatus.INFEASIBLE and res.point is None


def test_empty_and_degenerate():
    res = lp_feasible(np.zeros((0, 3)), [])
    assert res.feasible and np.array_equal(res.point, np.zeros(3))
    assert not margin_feasible(np.zeros((2, 2))).feasible
    with pytest.raises(ValueError):
        margin_feasible(np.zeros(3))


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 25), st.integers(1, 4))
def test_agrees_with_highs(seed, m, d):
    rng = np.random.default_rng(seed)
    rows = rng.normal(size=(m, d))
    if rng.random() < 0.3:
        rows = rows * rng.choice([-1, 1], size=(m, 1))
    res = margin_feasible(rows)
    assert res.status is not LPStatus.NUMERICAL_FAILURE
    assert res.feasible == highs_separable(rows)
    if res.feasible:
        assert np.min(rows @ res.point) >= 1 - FEAS_TOL


def test_direction_grid_oracle_on_random_2d_sets():
    """A grid direction with positive margin proves separability; LP must agree when the grid is decisive."""
    rng = np.random.default_rng(11)
    grid_res = 2 * np.pi / 3600
    decided = 0
    for _ in range(300):
        X = rng.normal(size=(20, 2))
        w = rng.normal(size=2)
        labels = np.where(X @ w + rng.normal(scale=0.3, size=20) >= 0, 1, -1)
        best = best_grid_margin(X, labels)
        scale = np.max(np.linalg.norm(X, axis=1))
        res = lp_feasible(X, labels)
        if best > 10 * grid_res * scale:
            assert res.feasible
            decided += 1
        elif best < -10 * grid_res * scale:
            assert not res.feasible
            decided += 1
    assert decided > 200


@given(st.integers(0, 10_000))
def test_scaled_rows_same_answer(seed):
    rng = np.random.default_rng(seed)
    rows = rng.normal(size=(8, 3))
    a = margin_feasible(rows).feasible
    assert margin_feasible(rows * 1e6).feasible == a
    assert margin_feasible(rows * 1e-6).feasible == a
