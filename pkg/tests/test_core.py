import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from svdtr.core import (BOTH, NEG, POS, Dataset, ModelSpec, Thresholds, TrajectoryOneStage, TrajectoryTwoStage,
                        TreatmentSet, embed_interaction, union_interaction_spec, validate)
from svdtr.errors import DataError, DimensionMismatch

finite = st.floats(-1e6, 1e6, allow_nan=False)


@pytest.mark.parametrize("dy,dz", [(0, 1), (1, 0), (-1, 1), (math.inf, 1), (math.nan, 1)])
def test_thresholds_reject_nonpositive_or_nonfinite(dy, dz):
    with pytest.raises(ValueError):
        Thresholds(dy, dz)


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=8))
def test_treatment_set_canonical_order(xs):
    s = TreatmentSet(tuple(xs))
    assert list(s.members) == sorted(set(xs))
    assert TreatmentSet(tuple(reversed(xs))) == s
    assert TreatmentSet.parse(str(s)) == s


def test_treatment_set_basics():
    with pytest.raises(ValueError):
        TreatmentSet(())
    assert str(BOTH) == "{-1,1}"
    assert POS | NEG == BOTH
    assert -POS == NEG and -BOTH == BOTH
    assert POS.is_singleton and not BOTH.is_singleton
    assert 1 in BOTH and -1 not in POS


def test_model_spec_rejects_duplicates_but_allows_overlap():
    with pytest.raises(ValueError):
        ModelSpec((0, 0), (1,))
    spec = ModelSpec((0, 1), (1,))
    H = np.array([[1.0, 2.0], [3.0, 4.0]])
    X = spec.design(H, np.array([1, -1]))
    np.testing.assert_array_equal(X, [[1, 1, 2, 1, 2], [1, 3, 4, -1, -4]])
    assert spec.coef_names(["u", "v"]) == ["(Intercept)", "u", "v", "trt", "v*trt"]


def test_model_spec_width_check():
    spec = ModelSpec((3,), ())
    with pytest.raises(DimensionMismatch):
        spec.check_width(2)


def test_union_spec_and_embedding():
    a = ModelSpec((0,), (0,))
    b = ModelSpec((1,), (1,), intercept_interact=False)
    u = union_interaction_spec(a, b)
    assert u.interact_cols == (0, 1) and u.intercept_interact
    np.testing.assert_array_equal(embed_interaction([2.0, 3.0], a, u), [2.0, 3.0, 0.0])
    np.testing.assert_array_equal(embed_interaction([5.0], b, u), [0.0, 0.0, 5.0])
    with pytest.raises(DimensionMismatch):
        embed_interaction([1.0, 2.0], b, u)


def test_validate_clean_dataset():
    ds = Dataset.from_arrays(np.eye(3), [1, -1, 1], [0, 1, 2], [2, 1, 0])
    assert validate(ds) == []


def test_validate_flags_bad_binary_action():
    rows = (TrajectoryOneStage((1.0,), 1, 0.0, 0.0), TrajectoryOneStage((2.0,), 0, 0.0, 0.0))
    v = validate(Dataset(1, rows, ("x",)))
    assert len(v) == 1 and v[0].row == 1 and v[0].field == "a"


def test_validate_flags_each_ragged_row():
    rows = (TrajectoryOneStage((1.0, 2.0), 1, 0.0, 0.0), TrajectoryOneStage((1.0,), 1, 0.0, 0.0),
            TrajectoryOneStage((1.0, 2.0, 3.0), -1, 0.0, 0.0))
    v = validate(Dataset(1, rows, ("x", "w")))
    assert [(x.row, x.field) for x in v] == [(1, "h"), (2, "h")]
    with pytest.raises(DataError):
        Dataset(1, rows).H


def test_validate_multi_treatment_and_nonfinite():
    rows = (TrajectoryOneStage((1.0,), 3, 0.0, 0.0), TrajectoryOneStage((1.0,), 0, math.nan, 0.0))
    v = validate(Dataset(1, rows, ("x",), binary=False))
    assert {(x.row, x.field) for x in v} == {(1, "a"), (1, "y")}


def test_two_stage_arrays_are_read_only():
    rng = np.random.default_rng(0)
    ds = Dataset.from_arrays(rng.normal(size=(4, 2)), [1, -1, 1, -1], rng.normal(size=4), rng.normal(size=4),
                             H2=rng.normal(size=(4, 3)), A2=[1, 1, -1, -1])
    assert ds.H2.shape == (4, 3)
    with pytest.raises(ValueError):
        ds.H2[0, 0] = 1.0
    one = Dataset.from_arrays(np.zeros((2, 1)), [1, -1], [0, 0], [0, 0])
    with pytest.raises(DataError):
        one.H2


one_stage_rows = st.integers(1, 3).flatmap(lambda p: st.lists(
    st.builds(TrajectoryOneStage, st.tuples(*[finite] * p), st.sampled_from([-1, 1]), finite, finite),
    min_size=0, max_size=6))
two_stage_rows = st.tuples(st.integers(1, 3), st.integers(1, 3)).flatmap(lambda pq: st.lists(
    st.builds(TrajectoryTwoStage, st.tuples(*[finite] * pq[0]), st.sampled_from([-1, 1]),
              st.tuples(*[finite] * pq[1]), st.sampled_from([-1, 1]), finite, finite),
    min_size=0, max_size=6))


@given(one_stage_rows)
def test_one_stage_round_trip(rows):
    ds = Dataset(1, rows, tuple(f"c{j}" for j in range(len(rows[0].h))) if rows else ())
    back = Dataset.from_dict(json.loads(json.dumps(ds.to_dict())))
    assert back == ds


@given(two_stage_rows)
def test_two_stage_round_trip(rows):
    ds = Dataset(2, rows)
    back = Dataset.from_dict(json.loads(json.dumps(ds.to_dict())))
    assert back == ds
    assert back.to_dict() == ds.to_dict()
