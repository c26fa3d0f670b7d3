import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_labelings, brute_force_multi, random_binary_instance, random_multi_instance
from svdtr.core import BOTH, ModelSpec, Thresholds, TreatmentSet
from svdtr.enumeration import (Labeling, canonical_feasible_rule, enumerate_feasible, enumerate_feasible_multi,
                               enumerate_labelings, read_labeling_dump, separator_spec, write_labeling_dump)
from svdtr.errors import BudgetExceeded
from svdtr.lp import FEAS_TOL
from svdtr.regression import FittedQModel
from svdtr.static_rule import SetValuedRule, apply_rule


def _check_witnesses(X, labs):
    for lab in labs:
        assert np.min(lab.array * (X @ lab.witness)) >= 1 - FEAS_TOL


def test_all_fixed_points():
    X = np.array([[1.0, -1.0], [1.0, 1.0], [1.0, 2.0]])
    out = enumerate_labelings(X, [(-1,), (1,), (1,)])
    assert [lab.labels for lab in out] == [(-1, 1, 1)]
    assert enumerate_labelings(X, [(1,), (-1,), (1,)]) == []


def test_two_distinct_ambiguous_points():
    X = np.array([[1.0, 0.0], [1.0, 1.0]])
    out = enumerate_labelings(X, [(-1, 1), (-1, 1)])
    assert [lab.labels for lab in out] == [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    _check_witnesses(X, out)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ten_ambiguous_points_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(10, 2))
    out = enumerate_labelings(X, [(-1, 1)] * 10)
    assert {lab.labels for lab in out} == brute_force_labelings(X, [(-1, 1)] * 10)
    _check_witnesses(X, out)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_mixed_fixed_and_ambiguous_match_brute_force(seed, d):
    rng = np.random.default_rng(seed)
    X, allowed = random_binary_instance(rng, 10, d)
    out = enumerate_labelings(X, allowed)
    labels = [lab.labels for lab in out]
    assert labels == sorted(labels)
    assert set(labels) == brute_force_labelings(X, allowed)
    _check_witnesses(X, out)


def test_thread_count_does_not_change_output():
    rng = np.random.default_rng(5)
    X, allowed = random_binary_instance(rng, 14, 3, p_ambiguous=0.8)
    one = enumerate_labelings(X, allowed, threads=1)
    four = enumerate_labelings(X, allowed, threads=4)
    assert [a.labels for a in one] == [b.labels for b in four]
    assert all(np.array_equal(a.witness, b.witness) for a, b in zip(one, four))


def test_budget_exceeded():
    X = np.column_stack([np.ones(8), np.arange(8.0)])
    with pytest.raises(BudgetExceeded) as info:
        enumerate_labelings(X, [(-1, 1)] * 8, cap=5)
    assert info.value.cap == 5


def _model(psi, spec):
    return FittedQModel(np.zeros(spec.main_dim), np.asarray(psi, float), spec)


def test_canonical_rule_examples():
    spec = ModelSpec((0,), (0, 1), intercept_interact=False)
    th = Thresholds(0.5, 0.5)
    rule = canonical_feasible_rule(_model([1, 0], spec), _model([0, 1], spec), th)
    np.testing.assert_array_equal(rule.psi, [1, 1])
    zero = canonical_feasible_rule(_model([0, 0], spec), _model([0, 0], spec), th)
    np.testing.assert_array_equal(zero.psi, [0, 0])
    H = np.random.default_rng(0).normal(size=(5, 2))
    assert np.all(zero.labels(H) == 1)
    assert len(zero.zero_score_points(H)) == 5


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_canonical_labeling_is_compatible(seed):
    rng = np.random.default_rng(seed)
    p = 3
    sy = ModelSpec((0,), tuple(sorted(rng.choice(p, 2, replace=False))))
    sz = ModelSpec((1,), tuple(sorted(rng.choice(p, 2, replace=False))), intercept_interact=bool(rng.random() < .5))
    my, mz = _model(rng.normal(size=sy.interact_dim), sy), _model(rng.normal(size=sz.interact_dim), sz)
    th = Thresholds(*rng.uniform(0.1, 2, 2))
    rule = SetValuedRule(my, mz, th)
    canon = canonical_feasible_rule(my, mz, th)
    H = rng.normal(scale=2, size=(50, p))
    zero = set(canon.zero_score_points(H).tolist())
    for i, (h, lab) in enumerate(zip(H, canon.labels(H))):
        if i not in zero:
            assert lab in apply_rule(rule, h)


def test_canonical_labeling_appears_in_enumeration():
    rng = np.random.default_rng(8)
    spec = ModelSpec((0,), (0, 1))
    for _ in range(10):
        my, mz = _model(rng.normal(size=3), spec), _model(rng.normal(size=3), spec)
        rule = SetValuedRule(my, mz, Thresholds(1.0, 1.0))
        H = rng.normal(size=(12, 2))
        canon = canonical_feasible_rule(my, mz, rule.thresholds)
        labs = enumerate_feasible(rule, H)
        assert tuple(canon.labels(H)) in {lab.labels for lab in labs}


def test_enumerate_feasible_uses_union_of_interaction_columns():
    rng = np.random.default_rng(9)
    sy, sz = ModelSpec((0,), (0,)), ModelSpec((1,), (1,))
    rule = SetValuedRule(_model(rng.normal(size=2), sy), _model(rng.normal(size=2), sz), Thresholds(0.5, 0.5))
    H = rng.normal(size=(9, 2))
    assert separator_spec(rule).interact_cols == (0, 1)
    X = separator_spec(rule).interact_features(H)
    codes = rule.codes(H)
    allowed = [(-1, 1) if c == 0 else (int(c),) for c in codes]
    out = enumerate_feasible(rule, H)
    assert {lab.labels for lab in out} == brute_force_labelings(X, allowed)


def test_multi_with_two_actions_reproduces_binary():
    rng = np.random.default_rng(10)
    for _ in range(10):
        X, allowed = random_binary_instance(rng, 8, 3)
        # phi(h, a) = a * x with actions 1 -> -1 and 2 -> +1
        F = np.stack([-X, X], axis=1)
        sets = [TreatmentSet(tuple(1 if a == -1 else 2 for a in opts)) for opts in allowed]
        multi = enumerate_feasible_multi(sets, F)
        binary = enumerate_labelings(X, allowed)
        as_binary = {tuple(-1 if a == 1 else 1 for a in lab.labels) for lab in multi}
        assert as_binary == {lab.labels for lab in binary}


def test_multi_all_singletons():
    F = np.array([[[1.0, 0.0], [0.0, 0.0], [0.0, -1.0]], [[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]]])
    out = enumerate_feasible_multi([TreatmentSet.of(1), TreatmentSet.of(2)], F)
    assert [lab.labels for lab in out] == [(1, 2)]


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_multi_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    sets, F = random_multi_instance(rng, 6, 3, 3)
    out = enumerate_feasible_multi([TreatmentSet(s) for s in sets], F)
    assert {lab.labels for lab in out} == brute_force_multi(sets, F)


def test_dump_round_trip(tmp_path):
    labs = [Labeling((1, -1, 1), np.array([0.1, 1 / 3])), Labeling((-1, -1, 1), np.array([2.0, -5e-9]))]
    path = tmp_path / "dump.txt"
    write_labeling_dump(labs, path)
    assert path.read_text().splitlines()[0] == "1 -1 1 | 0.1 0.333333333333"
    back = read_labeling_dump(path)
    assert back == labs
    np.testing.assert_allclose(back[1].witness, labs[1].witness, rtol=1e-11)
