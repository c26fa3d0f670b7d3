import itertools

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from oracles import brute_force_labelings, random_two_stage
from svdtr.core import BOTH, NEG, POS, Dataset, ModelSpec, Thresholds
from svdtr.dynamic_rule import (Stage1Fitter, Stage1FitBundle, TwoStageRule, estimate_stage1, estimate_two_stage,
                                pseudo_outcomes, qlearning_single_outcome, stage1_rule_for_tau, union_rule,
                                write_trace)
from svdtr.enumeration import Labeling, separator_spec
from svdtr.errors import DimensionMismatch
from svdtr.regression import FittedQModel, contrast, fit_q_model
from svdtr.static_rule import classify, estimate_static_rule

SPEC1 = ModelSpec((0, 1), (0,))
SPEC2 = ModelSpec((0, 1), (0,))
TH = Thresholds(0.5, 0.5)


def _stage2(ds):
    return (fit_q_model(ds, SPEC2, "y", stage=2), fit_q_model(ds, SPEC2, "z", stage=2))


def _random_labeling(rng, n):
    return Labeling(tuple(rng.choice([-1, 1], n)))


def test_pseudo_outcomes_ignore_labels_when_interactions_vanish():
    ds = random_two_stage(np.random.default_rng(0), n=20)
    m = FittedQModel(np.array([1.0, 2.0, -1.0]), np.zeros(2), SPEC2)
    a = pseudo_outcomes((m, m), np.ones(20), ds.H2)
    b = pseudo_outcomes((m, m), -np.ones(20), ds.H2)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


@given(st.integers(0, 10_000))
def test_flipping_one_label_changes_one_entry(seed):
    rng = np.random.default_rng(seed)
    ds = random_two_stage(rng, n=25)
    my, mz = _stage2(ds)
    lab = rng.choice([-1, 1], 25)
    i = int(rng.integers(25))
    flipped = lab.copy()
    flipped[i] *= -1
    y0, z0 = pseudo_outcomes((my, mz), lab, ds.H2)
    y1, z1 = pseudo_outcomes((my, mz), flipped, ds.H2)
    changed = np.flatnonzero(y0 != y1)
    assert set(changed) <= {i}
    score = SPEC2.interact_features(ds.H2[i:i + 1])[0] @ my.psi
    assert y1[i] - y0[i] == pytest.approx(2 * flipped[i] * score, abs=1e-12)
    assert np.array_equal(np.delete(z0, i), np.delete(z1, i))


def test_pseudo_outcomes_evaluate_model_at_labeled_action():
    rng = np.random.default_rng(1)
    ds = random_two_stage(rng, n=30)
    my, mz = _stage2(ds)
    lab = rng.choice([-1, 1], 30)
    y, z = pseudo_outcomes((my, mz), Labeling(tuple(lab)), ds.H2)
    for i in range(30):
        h = ds.H2[i:i + 1]
        assert y[i] == pytest.approx(my.predict(h, lab[i])[0], abs=1e-12)
        assert z[i] == pytest.approx(mz.predict(h, lab[i])[0], abs=1e-12)
    with pytest.raises(DimensionMismatch):
        pseudo_outcomes((my, mz), lab[:-1], ds.H2)


def test_stage1_fit_is_deterministic_and_label_equivalent():
    rng = np.random.default_rng(2)
    ds = random_two_stage(rng, n=40)
    models = _stage2(ds)
    lab = _random_labeling(rng, 40)
    a = estimate_stage1(ds, lab, SPEC1, SPEC1, models)
    b = estimate_stage1(ds, Labeling(lab.labels), SPEC1, SPEC1, models)
    assert np.array_equal(a.model_1y.coefficients, b.model_1y.coefficients)
    assert np.array_equal(a.model_1z.coefficients, b.model_1z.coefficients)
    # a different witness with the same labels is the same rule on the observed data
    fitter = Stage1Fitter(ds, SPEC1, SPEC1, models)
    c = fitter.fit(Labeling(lab.labels, np.array([1.0, 2.0])))
    assert np.max(np.abs(c.model_1y.coefficients - a.model_1y.coefficients)) <= 1e-12


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_cached_stage1_fit_matches_refit_from_scratch(seed):
    rng = np.random.default_rng(seed)
    ds = random_two_stage(rng, n=35, p1=3)
    models = _stage2(ds)
    spec_z = ModelSpec((0,), (1, 2))
    lab = _random_labeling(rng, 35)
    bundle = Stage1Fitter(ds, SPEC1, spec_z, models).fit(lab)
    y_t, z_t = pseudo_outcomes(models, lab, ds.H2)
    np.testing.assert_allclose(bundle.model_1y.coefficients, fit_q_model(ds, SPEC1, y_t).coefficients, atol=1e-10)
    np.testing.assert_allclose(bundle.model_1z.coefficients, fit_q_model(ds, spec_z, z_t).coefficients, atol=1e-10)


def _bundle(psi_y, psi_z, spec=ModelSpec((0,), (0,), intercept_interact=False)):
    lab = Labeling((1,))
    return Stage1FitBundle(lab, FittedQModel(np.zeros(2), np.array(psi_y, float), spec),
                           FittedQModel(np.zeros(2), np.array(psi_z, float), spec))


def test_stage1_rule_examples():
    assert stage1_rule_for_tau(_bundle([0.0], [0.0]), np.array([1.3]), TH) == BOTH
    # contrast 2 * h * psi = 2 * delta_y at h = 1
    assert stage1_rule_for_tau(_bundle([TH.delta_y], [0.0]), np.array([1.0]), TH) == POS
    with pytest.raises(DimensionMismatch):
        stage1_rule_for_tau(_bundle([1.0], [0.0]), np.array([[1.0]]), TH)


@given(st.integers(0, 10_000))
def test_stage1_rule_composes_classify_and_contrast(seed):
    rng = np.random.default_rng(seed)
    spec = ModelSpec((0,), (0, 1))
    b = Stage1FitBundle(Labeling((1,)), FittedQModel(rng.normal(size=2), rng.normal(size=3), spec),
                        FittedQModel(rng.normal(size=2), rng.normal(size=3), spec))
    h = rng.normal(size=2)
    th = Thresholds(*rng.uniform(0.1, 2, 2))
    assert stage1_rule_for_tau(b, h, th) == classify(contrast(b.model_1y, h), contrast(b.model_1z, h), th)


def _two_stage_rule(bundles):
    spec = ModelSpec((0,), (0,), intercept_interact=False)
    zero = FittedQModel(np.zeros(2), np.zeros(1), spec)
    from svdtr.static_rule import SetValuedRule
    return TwoStageRule(SetValuedRule(zero, zero, TH), bundles, TH)


def test_union_examples():
    h = np.array([1.0])
    neg = _bundle([-1.0], [0.0])
    neg2 = _bundle([-2.0], [0.1])
    both = _bundle([0.0], [0.0])
    assert union_rule(_two_stage_rule([neg]), h)[0] == NEG
    assert union_rule(_two_stage_rule([neg, neg2, both]), h)[0] == BOTH
    out, trace = union_rule(_two_stage_rule([neg, neg2, neg]), h)
    assert out == NEG
    # duplicates are skipped for classification but kept in the trace
    assert [row.bundle for row in trace] == [0, 1, 2]
    assert trace[1].r_y == pytest.approx(-4.0)
    with pytest.raises(ValueError):
        _two_stage_rule([])


@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=6), st.floats(-2, 2))
def test_adding_a_bundle_never_shrinks_the_union(psis, h):
    bundles = [_bundle([a], [b]) for a, b in psis]
    x = np.array([h])
    full = union_rule(_two_stage_rule(bundles), x)[0]
    part = union_rule(_two_stage_rule(bundles[:-1]), x)[0] if len(bundles) > 1 else None
    if part is not None:
        assert set(part.members) <= set(full.members)
    assert set(stage1_rule_for_tau(bundles[-1], x, TH).members) <= set(full.members)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_union_over_enumeration_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    ds = random_two_stage(rng, n=10, noise=0.5)
    # both actions at each stage, otherwise the interaction columns are not identified
    assume(len(set(ds.A)) == 2 and len(set(ds.A2)) == 2)
    fit = estimate_two_stage(ds, SPEC2, SPEC2, SPEC1, SPEC1, TH)
    stage2 = fit.rule.stage2
    X = separator_spec(stage2).interact_features(ds.H2)
    allowed = [(-1, 1) if c == 0 else (int(c),) for c in stage2.codes(ds.H2)]
    oracle = brute_force_labelings(X, allowed)
    assert {lab.labels for lab in fit.labelings} == oracle
    fitter = Stage1Fitter(ds, SPEC1, SPEC1, (stage2.model_y, stage2.model_z))
    for h1 in rng.normal(size=(5, 2)):
        expected = set()
        for lab in oracle:
            expected |= set(stage1_rule_for_tau(fitter.fit(Labeling(lab)), h1, TH).members)
        assert set(union_rule(fit.rule, h1)[0].members) == expected


def test_two_stage_fit_with_all_fixed_stage2_points_has_one_bundle():
    rng = np.random.default_rng(4)
    n = 30
    H1 = rng.normal(size=(n, 2))
    A1 = rng.choice([-1, 1], n)
    H2 = np.column_stack([H1[:, 0], rng.uniform(1, 2, n)])
    A2 = rng.choice([-1, 1], n)
    # large same-sign effects everywhere: every stage-2 point is a singleton {+1}
    Y = A2 * 5 * H2[:, 1]
    ds = Dataset.from_arrays(H1, A1, Y, Y, H2=H2, A2=A2)
    spec2 = ModelSpec((0,), (1,), intercept_interact=False)
    fit = estimate_two_stage(ds, spec2, spec2, SPEC1, SPEC1, TH)
    assert len(fit.labelings) == 1 and fit.labelings[0].labels == (1,) * n
    assert len(fit.rule.bundles) == 1


def test_qlearning_with_no_interaction():
    rng = np.random.default_rng(5)
    n = 40
    H1 = rng.normal(size=(n, 1))
    H2 = rng.normal(size=(n, 1))
    A1 = np.tile([1, -1], n // 2)
    A2 = np.repeat([1, -1], n // 2)
    H2[n // 2:] = H2[:n // 2]  # every h2 seen under both actions
    Y = 1 + H2[:, 0]
    ds = Dataset.from_arrays(H1, A1, Y, Y, H2=H2, A2=A2)
    spec = ModelSpec((0,), (0,))
    res = qlearning_single_outcome(ds, spec, spec)
    np.testing.assert_allclose(res.model_2.psi, 0, atol=1e-12)
    np.testing.assert_allclose(res.pseudo_outcome, res.model_2.predict(H2, 1), atol=1e-12)
    assert all(res.pi2(np.array([v])) == 1 for v in np.linspace(-2, 2, 9))


def test_qlearning_recovers_known_rules():
    rng = np.random.default_rng(6)
    n = 400
    H1 = rng.normal(size=(n, 1))
    A1 = rng.choice([-1, 1], n)
    H2 = np.column_stack([H1[:, 0] + 0.5 * A1])
    A2 = rng.choice([-1, 1], n)
    # Q2 = h2 + a2 (0.3 + h2); max over a2 = h2 + |0.3 + h2|
    Y = H2[:, 0] + A2 * (0.3 + H2[:, 0])
    ds = Dataset.from_arrays(H1, A1, Y, Y, H2=H2, A2=A2)
    spec = ModelSpec((0,), (0,))
    res = qlearning_single_outcome(ds, spec, spec)
    np.testing.assert_allclose(res.model_2.psi, [0.3, 1.0], atol=1e-10)
    for h in np.linspace(-2, 2, 17):
        if abs(h + 0.3) > 1e-9:
            assert res.pi2(np.array([h])) == (1 if h + 0.3 > 0 else -1)
    both = np.column_stack([res.model_2.predict(H2, 1), res.model_2.predict(H2, -1)])
    assert np.all(res.pseudo_outcome >= both.max(axis=1) - 1e-12)
    # the stage-1 argmax agrees with the fitted stage-1 contrast sign
    for h in np.linspace(-2, 2, 9):
        c = contrast(res.model_1, np.array([h]))
        assert res.pi1(np.array([h])) == (1 if c >= 0 else -1)


def test_qlearning_stage2_matches_static_singleton_direction():
    rng = np.random.default_rng(7)
    ds = random_two_stage(rng, n=60)
    res = qlearning_single_outcome(ds, SPEC1, SPEC2)
    rule = estimate_static_rule(ds, SPEC2, SPEC2, Thresholds(1e-9, 1e-9), stage=2)
    for h in rng.normal(size=(50, 2)):
        c = contrast(res.model_2, h)
        if abs(c) > 1e-6:
            assert res.pi2(h) == (1 if c > 0 else -1)
            s = classify(c, contrast(rule.model_z, h), rule.thresholds)
            if s.is_singleton and np.sign(contrast(rule.model_z, h)) == np.sign(c):
                assert s.members[0] == res.pi2(h)


def test_write_trace(tmp_path):
    rule = _two_stage_rule([_bundle([-1.0], [0.0]), _bundle([0.0], [0.0])])
    _, trace = union_rule(rule, np.array([1.0]))
    path = tmp_path / "trace.txt"
    write_trace(trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# bundle r_y r_z set"
    assert lines[1] == "0 -2 0 {-1}"
    assert lines[2].startswith("1 0 0 ")
