"""Two-stage set-valued regimes.

The stage-2 rule is the static plug-in rule fitted on ``(H2, A2)``. For each
feasible stage-2 labeling, the fitted stage-2 models are evaluated at the
labeled action to form pseudo-outcomes, and stage-1 models are refitted on
those. The stage-1 recommendation is the union, over labelings, of the
per-labeling set-valued rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Dataset, ModelSpec, Thresholds, TreatmentSet
from .enumeration import DEFAULT_CAP, Labeling, canonical_feasible_rule, enumerate_feasible
from .errors import DimensionMismatch
from .regression import CachedProjector, FittedQModel, _fit_from_projector, contrast, fit_q_model
from .static_rule import SetValuedRule, classify, estimate_static_rule

DEDUP_TOL = 1e-12
# fitted contrasts this close to zero are ties (rounding noise of a zero interaction fit)
TIE_ATOL = 1e-10


@dataclass(frozen=True)
class Stage1FitBundle:
    labeling: Labeling
    model_1y: FittedQModel
    model_1z: FittedQModel


@dataclass(frozen=True)
class TraceRow:
    bundle: int
    r_y: float
    r_z: float
    recommended: TreatmentSet


@dataclass(frozen=True)
class TwoStageRule:
    stage2: SetValuedRule
    bundles: tuple[Stage1FitBundle, ...]
    thresholds: Thresholds

    def __post_init__(self):
        if not self.bundles:
            raise ValueError("a two-stage rule needs at least one stage-1 bundle")
        object.__setattr__(self, "bundles", tuple(self.bundles))
        object.__setattr__(self, "_distinct", _distinct_bundles(self.bundles))


def _distinct_bundles(bundles: Sequence[Stage1FitBundle]) -> tuple[int, ...]:
    """Indices of bundles with distinct stage-1 interaction coefficients (tolerance DEDUP_TOL)."""
    keys = np.array([np.concatenate([b.model_1y.psi, b.model_1z.psi]) for b in bundles])
    order = np.lexsort(keys.T[::-1])
    keep = [int(order[0])]
    for i in order[1:]:
        if np.max(np.abs(keys[i] - keys[keep[-1]])) > DEDUP_TOL:
            keep.append(int(i))
    return tuple(sorted(keep))


def pseudo_outcomes(stage2_models: tuple[FittedQModel, FittedQModel], labeling, H2) -> tuple[np.ndarray, np.ndarray]:
    """Fitted stage-2 values for Y and Z at the labeled actions."""
    model_y, model_z = stage2_models
    labels = labeling.array if isinstance(labeling, Labeling) else np.asarray(labeling)
    H2 = np.atleast_2d(np.asarray(H2, dtype=float))
    if labels.shape != (H2.shape[0],):
        raise DimensionMismatch(f"labeling has length {labels.shape}, expected {H2.shape[0]}")
    return model_y.predict(H2, labels), model_z.predict(H2, labels)


class Stage1Fitter:
    """Stage-1 refits sharing one QR factorization per outcome across labelings."""

    def __init__(self, dataset: Dataset, spec_1y: ModelSpec, spec_1z: ModelSpec,
                 stage2_models: tuple[FittedQModel, FittedQModel]):
        if dataset.stage_count != 2:
            raise DimensionMismatch("stage-1 refits need a two-stage dataset")
        self.dataset = dataset
        self.spec_1y = spec_1y
        self.spec_1z = spec_1z
        self.stage2_models = stage2_models
        H1, A1 = dataset.H, dataset.A
        self.proj_y = CachedProjector(spec_1y.design(H1, A1))
        self.proj_z = CachedProjector(spec_1z.design(H1, A1)) if spec_1z != spec_1y else self.proj_y
        self.names_y = spec_1y.coef_names(dataset.column_names)
        self.names_z = spec_1z.coef_names(dataset.column_names)

    def fit(self, labeling: Labeling, diagnostics: bool = True) -> Stage1FitBundle:
        y_t, z_t = pseudo_outcomes(self.stage2_models, labeling, self.dataset.H2)
        my = _fit_from_projector(self.proj_y, y_t, self.spec_1y, self.names_y, diagnostics)
        mz = _fit_from_projector(self.proj_z, z_t, self.spec_1z, self.names_z, diagnostics)
        return Stage1FitBundle(labeling, my, mz)


def estimate_stage1(dataset: Dataset, labeling: Labeling, spec_1y: ModelSpec, spec_1z: ModelSpec,
                    stage2_models: tuple[FittedQModel, FittedQModel]) -> Stage1FitBundle:
    return Stage1Fitter(dataset, spec_1y, spec_1z, stage2_models).fit(labeling)


def stage1_contrasts(bundle: Stage1FitBundle, h1) -> tuple[float, float]:
    return contrast(bundle.model_1y, h1), contrast(bundle.model_1z, h1)


def stage1_rule_for_tau(bundle: Stage1FitBundle, h1, thresholds: Thresholds) -> TreatmentSet:
    r_y, r_z = stage1_contrasts(bundle, h1)
    return classify(r_y, r_z, thresholds)


def union_rule(rule: TwoStageRule, h1) -> tuple[TreatmentSet, list[TraceRow]]:
    """Union over bundles of the per-labeling stage-1 sets, with a per-bundle trace."""
    h1 = np.asarray(h1, dtype=float)
    if h1.ndim != 1:
        raise DimensionMismatch("union_rule expects a single history vector")
    trace = []
    out = None
    for k in rule._distinct:
        b = rule.bundles[k]
        r_y, r_z = stage1_contrasts(b, h1)
        s = classify(r_y, r_z, rule.thresholds)
        out = s if out is None else out | s
    # the trace covers every bundle, duplicates included
    for k, b in enumerate(rule.bundles):
        r_y, r_z = stage1_contrasts(b, h1)
        trace.append(TraceRow(k, r_y, r_z, classify(r_y, r_z, rule.thresholds)))
    return out, trace


@dataclass(frozen=True)
class DynamicFit:
    rule: TwoStageRule
    labelings: tuple[Labeling, ...]
    canonical_zero_points: tuple[int, ...]


def estimate_two_stage(dataset: Dataset, spec_2y: ModelSpec, spec_2z: ModelSpec, spec_1y: ModelSpec,
                       spec_1z: ModelSpec, thresholds: Thresholds, cap: int = DEFAULT_CAP,
                       threads: int = 1, diagnostics: bool = True) -> DynamicFit:
    """Full two-stage estimation: stage-2 rule, feasible labelings, stage-1 bundles."""
    stage2 = estimate_static_rule(dataset, spec_2y, spec_2z, thresholds, stage=2)
    H2 = dataset.H2
    labelings = enumerate_feasible(stage2, H2, cap=cap, threads=threads)
    canon = canonical_feasible_rule(stage2.model_y, stage2.model_z, thresholds)
    zero_points = tuple(int(i) for i in canon.zero_score_points(H2))
    if not labelings:
        # only possible when the canonical rule leaves a point on its hyperplane
        raise ValueError("no feasible stage-2 labeling; canonical rule has zero scores at "
                         f"{list(zero_points)}")
    fitter = Stage1Fitter(dataset, spec_1y, spec_1z, (stage2.model_y, stage2.model_z))
    bundles = tuple(fitter.fit(lab, diagnostics) for lab in labelings)
    return DynamicFit(TwoStageRule(stage2, bundles, thresholds), tuple(labelings), zero_points)


@dataclass(frozen=True)
class QLearningResult:
    model_1: FittedQModel
    model_2: FittedQModel
    pseudo_outcome: np.ndarray

    def pi2(self, h2) -> int:
        return 1 if contrast(self.model_2, h2) >= -TIE_ATOL else -1

    def pi1(self, h1) -> int:
        return 1 if contrast(self.model_1, h1) >= -TIE_ATOL else -1


def qlearning_single_outcome(dataset: Dataset, spec_1: ModelSpec, spec_2: ModelSpec,
                             outcome: str = "y") -> QLearningResult:
    """Two-stage Q-learning for a single outcome; argmax rules break ties toward +1."""
    model_2 = fit_q_model(dataset, spec_2, outcome, stage=2)
    H2 = dataset.H2
    y_tilde = np.maximum(model_2.predict(H2, 1), model_2.predict(H2, -1))
    model_1 = fit_q_model(dataset, spec_1, y_tilde, stage=1)
    return QLearningResult(model_1, model_2, y_tilde)


def write_trace(trace: Sequence[TraceRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# bundle r_y r_z set\n")
        for row in trace:
            fh.write(f"{row.bundle} {row.r_y:.12g} {row.r_z:.12g} {row.recommended}\n")
