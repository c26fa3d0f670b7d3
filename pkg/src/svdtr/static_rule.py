"""Single-decision set-valued rule for two competing outcomes."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import BOTH, NEG, POS, Dataset, ModelSpec, Thresholds, TreatmentSet
from .errors import DimensionMismatch
from .regression import FittedQModel, contrast, fit_q_model


class Region(enum.Enum):
    ONLY_POS = "ONLY_POS"
    ONLY_NEG = "ONLY_NEG"
    BOTH_CONFLICT = "BOTH_CONFLICT"
    BOTH_NULL = "BOTH_NULL"
    # residual {-1,+1} case; not produced for positive thresholds
    BOTH_MIXED = "BOTH_MIXED"


class Driver(enum.Enum):
    Y = "Y"
    Z = "Z"
    NONE = "none"


@dataclass(frozen=True)
class RegionLabel:
    region: Region
    driver: Driver = Driver.NONE

    def __str__(self):
        if self.driver is Driver.NONE:
            return self.region.value
        return f"{self.region.value}:{self.driver.value}"


def sgn(x: float) -> int:
    # sgn(0) = +1; never reaches a singleton branch of classify
    return 1 if x >= 0 else -1


def classify_with_label(r_y: float, r_z: float, thresholds: Thresholds) -> tuple[TreatmentSet, RegionLabel]:
    dy, dz = thresholds.delta_y, thresholds.delta_z
    sy, sz = sgn(r_y), sgn(r_z)
    if abs(r_y) >= dy and sy * r_z > -dz:
        region = Region.ONLY_POS if sy > 0 else Region.ONLY_NEG
        return (POS if sy > 0 else NEG), RegionLabel(region, Driver.Y)
    if abs(r_z) >= dz and sz * r_y > -dy:
        region = Region.ONLY_POS if sz > 0 else Region.ONLY_NEG
        return (POS if sz > 0 else NEG), RegionLabel(region, Driver.Z)
    if abs(r_y) < dy and abs(r_z) < dz:
        return BOTH, RegionLabel(Region.BOTH_NULL)
    if abs(r_y) >= dy and abs(r_z) >= dz and r_y * r_z <= 0:
        return BOTH, RegionLabel(Region.BOTH_CONFLICT)
    return BOTH, RegionLabel(Region.BOTH_MIXED)


def classify(r_y: float, r_z: float, thresholds: Thresholds) -> TreatmentSet:
    """Set-valued recommendation from the two treatment contrasts.

    Recommends ``{sgn(r_y)}`` when Y improves by at least ``delta_y`` without a
    Z loss of ``delta_z`` or more (and symmetrically for Z); otherwise both.
    """
    return classify_with_label(r_y, r_z, thresholds)[0]


def classify_codes(r_y, r_z, thresholds: Thresholds) -> np.ndarray:
    """Vectorized classify. Returns +1 / -1 for singletons and 0 for ``{-1,+1}``."""
    r_y = np.asarray(r_y, dtype=float)
    r_z = np.asarray(r_z, dtype=float)
    sy = np.where(r_y >= 0, 1, -1)
    sz = np.where(r_z >= 0, 1, -1)
    c1 = (np.abs(r_y) >= thresholds.delta_y) & (sy * r_z > -thresholds.delta_z)
    c2 = (np.abs(r_z) >= thresholds.delta_z) & (sz * r_y > -thresholds.delta_y)
    return np.where(c1, sy, np.where(c2, sz, 0))


def code_to_set(code: int) -> TreatmentSet:
    return BOTH if code == 0 else (POS if code > 0 else NEG)


@dataclass(frozen=True)
class SetValuedRule:
    model_y: FittedQModel
    model_z: FittedQModel
    thresholds: Thresholds

    def contrasts(self, H) -> tuple[np.ndarray, np.ndarray]:
        return self.model_y.contrasts(H), self.model_z.contrasts(H)

    def codes(self, H) -> np.ndarray:
        r_y, r_z = self.contrasts(H)
        return classify_codes(r_y, r_z, self.thresholds)

    def sets(self, H) -> list[TreatmentSet]:
        return [code_to_set(c) for c in self.codes(H)]

    def labels(self, H) -> list[RegionLabel]:
        r_y, r_z = self.contrasts(H)
        return [classify_with_label(a, b, self.thresholds)[1] for a, b in zip(r_y, r_z)]


def estimate_static_rule(dataset: Dataset, spec_y: ModelSpec, spec_z: ModelSpec,
                         thresholds: Thresholds, stage: int = 1) -> SetValuedRule:
    """Fit the Y and Z working models by least squares and package the plug-in rule."""
    model_y = fit_q_model(dataset, spec_y, "y", stage)
    model_z = fit_q_model(dataset, spec_z, "z", stage)
    return SetValuedRule(model_y, model_z, thresholds)


def apply_rule(rule: SetValuedRule, h) -> TreatmentSet:
    h = np.asarray(h, dtype=float)
    if h.ndim != 1:
        raise DimensionMismatch("apply_rule expects a single history vector")
    return classify(contrast(rule.model_y, h), contrast(rule.model_z, h), rule.thresholds)


def apply_rule_with_label(rule: SetValuedRule, h) -> tuple[TreatmentSet, RegionLabel]:
    return classify_with_label(contrast(rule.model_y, h), contrast(rule.model_z, h), rule.thresholds)


def multi_recommend(qhat: Mapping[int, tuple[float, float]], thresholds: Thresholds) -> TreatmentSet:
    """Recommended subset of a finite action set by pairwise elimination.

    ``qhat`` maps each action to its predicted ``(Q_Y, Q_Z)`` at a fixed
    history. An action survives if no pairwise comparison excludes it.
    """
    actions = sorted(qhat)
    if len(actions) < 2:
        raise ValueError("need at least two actions")
    keep = []
    for j in actions:
        yj, zj = qhat[j]
        survived = True
        for k in actions:
            if k == j:
                continue
            yk, zk = qhat[k]
            # classify on (j - k): +1 favours j, -1 favours k
            if classify(yj - yk, zj - zk, thresholds) == NEG:
                survived = False
                break
        if survived:
            keep.append(j)
    return TreatmentSet(tuple(keep))
