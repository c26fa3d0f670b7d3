"""Regret study under a bivariate-normal generative model.

Outcomes are ``Y = A * m_Y(H)`` and ``Z = A * m_Z(H)`` with
``m(H) = psi_1 + psi_2 H_1 + psi_3 H_2 + psi_4 H_1 H_2`` and ``H`` standard
bivariate normal with correlation ``rho``. Conditional means given ``(h, a)``
are available in closed form, so only the outer expectation over ``H`` is
Monte Carlo.

Monte Carlo draws come in fixed-size blocks, each with its own counter-based
stream keyed by ``(seed, stream, block)``. Results therefore do not depend on
the number of worker threads, and two policies evaluated with the same seed
see the same histories and the same tie-breaking coins.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import BOTH, Dataset, Thresholds, TrajectoryOneStage, TreatmentSet
from .static_rule import classify_codes

BLOCK = 1 << 16

_STREAM_H = 0
_STREAM_COIN = 1
_STREAM_NOISE = 2
_STREAM_ACTION = 3


@dataclass(frozen=True)
class GenModelParams:
    psi_y: tuple[float, float, float, float]
    psi_z: tuple[float, float, float, float]
    rho: float
    thresholds: Thresholds

    def __post_init__(self):
        for name in ("psi_y", "psi_z"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 4:
                raise ValueError(f"{name} must have 4 entries")
            object.__setattr__(self, name, v)
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie strictly between -1 and 1")

    @property
    def cholesky(self) -> np.ndarray:
        return np.linalg.cholesky(np.array([[1.0, self.rho], [self.rho, 1.0]]))


# Reference settings: three-entry psi vectors, read as (psi_1, psi_2, psi_3) with psi_4 = 0.
SETTINGS = {
    1: dict(psi_y=(-0.30, 0.25, -2.0), psi_z=(0.0, -0.72, -0.74), rho=-0.38, delta_y=0.5, delta_z=0.5,
            target=(0.80, 0.10, 0.10)),
    2: dict(psi_y=(-0.05, 0.40, -1.25), psi_z=(0.65, -0.85, 0.29), rho=-0.36, delta_y=0.5, delta_z=0.5,
            target=(0.45, 0.10, 0.45)),
    3: dict(psi_y=(-1.0, -1.4, 2.0), psi_z=(1.6, 2.2, -2.2), rho=-0.4, delta_y=0.5, delta_z=1.0,
            target=(0.10, 0.10, 0.80)),
}


def setting_params(setting: int, threshold_scale: float = 1.0) -> GenModelParams:
    """Parameters of one of the three reference settings.

    ``threshold_scale`` multiplies both thresholds. A value of 2 compares the
    undoubled linear score ``m(h)`` against the thresholds instead of the
    contrast ``2 m(h)``.
    """
    s = SETTINGS[setting]
    return GenModelParams(
        tuple(s["psi_y"]) + (0.0,), tuple(s["psi_z"]) + (0.0,), s["rho"],
        Thresholds(s["delta_y"] * threshold_scale, s["delta_z"] * threshold_scale),
    )


def _linear(psi, H) -> np.ndarray:
    H = np.atleast_2d(H)
    h1, h2 = H[:, 0], H[:, 1]
    return psi[0] + psi[1] * h1 + psi[2] * h2 + psi[3] * h1 * h2


def true_contrasts(params: GenModelParams, h) -> tuple:
    """``(r_Y(h), r_Z(h))``; vectorized when ``h`` has one history per row."""
    H = np.asarray(h, dtype=float)
    r_y = 2.0 * _linear(params.psi_y, H)
    r_z = 2.0 * _linear(params.psi_z, H)
    if H.ndim == 1:
        return float(r_y[0]), float(r_z[0])
    return r_y, r_z


def _stream(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream, block])))


def _histories(params: GenModelParams, seed: int, block: int, size: int) -> np.ndarray:
    return _stream(seed, _STREAM_H, block).standard_normal((size, 2)) @ params.cholesky.T


def _blocks(n: int) -> list[tuple[int, int]]:
    return [(b, min(BLOCK, n - b * BLOCK)) for b in range(math.ceil(n / BLOCK))]


def _map_blocks(fn, n: int, threads: int):
    blocks = _blocks(n)
    if threads <= 1 or len(blocks) == 1:
        return [fn(b, size) for b, size in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda bs: fn(*bs), blocks))


def gen_trajectory(params: GenModelParams, rng: np.random.Generator, noise_sd: float = 0.0) -> TrajectoryOneStage:
    h = rng.standard_normal(2) @ params.cholesky.T
    a = 1 if rng.random() < 0.5 else -1
    my, mz = (0.5 * r for r in true_contrasts(params, h))
    y, z = a * my, a * mz
    if noise_sd > 0:
        y += noise_sd * rng.standard_normal()
        z += noise_sd * rng.standard_normal()
    return TrajectoryOneStage((float(h[0]), float(h[1])), a, float(y), float(z))


def gen_dataset(params: GenModelParams, n: int, seed: int, noise_sd: float = 0.0) -> Dataset:
    """``n`` one-stage trajectories with columns ``h1, h2``."""
    H = _histories(params, seed, 0, n)
    rng = _stream(seed, _STREAM_ACTION, 0)
    A = np.where(rng.random(n) < 0.5, 1, -1)
    r_y, r_z = true_contrasts(params, H)
    Y = A * 0.5 * r_y
    Z = A * 0.5 * r_z
    if noise_sd > 0:
        Y = Y + noise_sd * rng.standard_normal(n)
        Z = Z + noise_sd * rng.standard_normal(n)
    return Dataset.from_arrays(H, A, Y, Z, column_names=("h1", "h2"))


@dataclass(frozen=True)
class ClassProbs:
    uniq: float
    null: float
    opst: float
    n: int
    # draws outside all three displayed events (boundary cases), counted in opst
    unassigned: int = 0

    def as_tuple(self):
        return (self.uniq, self.null, self.opst)


def class_events(r_y, r_z, thresholds: Thresholds):
    dy, dz = thresholds.delta_y, thresholds.delta_z
    sy = np.where(r_y >= 0, 1.0, -1.0)
    sz = np.where(r_z >= 0, 1.0, -1.0)
    uniq = ((np.abs(r_y) >= dy) & (sy * r_z >= -dz)) | ((np.abs(r_z) >= dz) & (sz * r_y >= -dy))
    null = (np.abs(r_y) < dy) & (np.abs(r_z) < dz)
    opst = (np.abs(r_y) >= dy) & (np.abs(r_z) >= dz) & (r_y * r_z < 0)
    return uniq, null, opst


def class_probs(params: GenModelParams, n_mc: int, seed: int = 0, threads: int = 1) -> ClassProbs:
    """Monte Carlo estimates of the unique / null / opposing class probabilities.

    Each draw goes to exactly one class: unique if its event holds, else null,
    else opposing. The three estimates therefore sum to one.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be positive")

    def block(b, size):
        H = _histories(params, seed, b, size)
        u, nl, op = class_events(*true_contrasts(params, H), params.thresholds)
        rest = ~u & ~nl
        return int(u.sum()), int(nl.sum() - (nl & u).sum()), int(rest.sum()), int((rest & ~op).sum())

    parts = _map_blocks(block, n_mc, threads)
    cu, cn, co, cx = (sum(p[k] for p in parts) for k in range(4))
    total = cu + cn + co
    return ClassProbs(cu / total, cn / total, co / total, total, cx)


class PolicyKind(enum.Enum):
    COMPOSITE = "composite"
    OPT_COMPATIBLE = "compatible"
    OPT_UNRESTRICTED = "unrestricted"


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("policy parameter must lie in [0, 1]")

    @property
    def name(self) -> str:
        return f"{self.kind.value}({self.value:g})"

    @classmethod
    def parse(cls, text: str) -> "PolicySpec":
        """Parse ``composite:0.5``, ``compatible:0.75`` or ``unrestricted:0``."""
        kind, _, value = text.partition(":")
        try:
            return cls(PolicyKind(kind.strip()), float(value))
        except ValueError as exc:
            raise ValueError(f"bad policy {text!r}: {exc}") from None


def composite(delta: float) -> PolicySpec:
    return PolicySpec(PolicyKind.COMPOSITE, delta)


def compatible(q: float) -> PolicySpec:
    return PolicySpec(PolicyKind.OPT_COMPATIBLE, q)


def unrestricted(q: float) -> PolicySpec:
    return PolicySpec(PolicyKind.OPT_UNRESTRICTED, q)


def _best_action(r_y, r_z, delta):
    c = delta * r_y + (1.0 - delta) * r_z
    return np.where(c >= 0, 1, -1)


def _actions(policy: PolicySpec, r_y, r_z, codes, coin, delta_star):
    if policy.kind is PolicyKind.COMPOSITE:
        return _best_action(r_y, r_z, policy.value)
    best = _best_action(r_y, r_z, delta_star)
    pick = np.where(coin < policy.value, best, -best)
    if policy.kind is PolicyKind.OPT_UNRESTRICTED:
        return pick
    # within a singleton recommendation best and worst coincide
    return np.where(codes != 0, codes, pick)


def policy_action(policy: PolicySpec, params: GenModelParams, h, rule_output: TreatmentSet,
                  rng: np.random.Generator, delta_star: float = 0.5) -> int:
    """Action chosen by ``policy`` at history ``h``.

    Composite policies ignore ``rule_output``. The q-optimal policies pick the
    best action for the true preference ``delta_star`` with probability ``q``
    and the worst otherwise, among ``rule_output`` (compatible) or among all
    actions (unrestricted).
    """
    r_y, r_z = true_contrasts(params, h)
    if policy.kind is PolicyKind.COMPOSITE:
        return int(_best_action(r_y, r_z, policy.value))
    pool = rule_output if policy.kind is PolicyKind.OPT_COMPATIBLE else BOTH
    if pool.is_singleton:
        return pool.members[0]
    best = int(_best_action(r_y, r_z, delta_star))
    return best if rng.random() < policy.value else -best


@dataclass(frozen=True)
class RegretEstimate:
    value: float  # nonpositive expectation of (policy value - optimal value)
    se: float
    n: int

    @property
    def regret_abs(self) -> float:
        return abs(self.value)


def _regret_sums(params, policies, delta_star, n_mc, seed, threads, noise_sd):
    dy = params.thresholds

    def block(b, size):
        H = _histories(params, seed, b, size)
        coin = _stream(seed, _STREAM_COIN, b).random(size)
        r_y, r_z = true_contrasts(params, H)
        codes = classify_codes(r_y, r_z, dy)
        c_star = delta_star * r_y + (1.0 - delta_star) * r_z
        best = np.where(c_star >= 0, 1, -1)
        if noise_sd > 0:
            eps = noise_sd * _stream(seed, _STREAM_NOISE, b).standard_normal((size, 4))
            # independent errors per outcome and per potential action
            noise_comp = {1: delta_star * eps[:, 0] + (1 - delta_star) * eps[:, 1],
                          -1: delta_star * eps[:, 2] + (1 - delta_star) * eps[:, 3]}
        out = []
        for pol in policies:
            a = _actions(pol, r_y, r_z, codes, coin, delta_star)
            loss = 0.5 * (a * c_star - np.abs(c_star))
            if noise_sd > 0:
                loss = loss + np.where(a == 1, noise_comp[1], noise_comp[-1]) \
                    - np.where(best == 1, noise_comp[1], noise_comp[-1])
            out.append((float(loss.sum()), float((loss * loss).sum())))
        return out

    parts = _map_blocks(block, n_mc, threads)
    results = []
    for k in range(len(policies)):
        s = math.fsum(p[k][0] for p in parts)
        ss = math.fsum(p[k][1] for p in parts)
        mean = s / n_mc
        var = max(ss / n_mc - mean * mean, 0.0) * n_mc / max(n_mc - 1, 1)
        results.append(RegretEstimate(mean, math.sqrt(var / n_mc), n_mc))
    return results


def regret(policy: PolicySpec, delta_star: float, params: GenModelParams, n_mc: int, seed: int = 0,
           threads: int = 1, noise_sd: float = 0.0) -> RegretEstimate:
    """Monte Carlo regret of ``policy`` for a patient with true preference ``delta_star``.

    With ``noise_sd > 0`` the loss is computed from realized outcomes carrying
    independent mean-zero errors instead of conditional means.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be positive")
    return _regret_sums(params, [policy], delta_star, n_mc, seed, threads, noise_sd)[0]


def regrets(policies: Sequence[PolicySpec], delta_star: float, params: GenModelParams, n_mc: int,
            seed: int = 0, threads: int = 1, noise_sd: float = 0.0) -> list[RegretEstimate]:
    """Regret of several policies on common random numbers."""
    if n_mc < 1:
        raise ValueError("n_mc must be positive")
    return _regret_sums(params, list(policies), delta_star, n_mc, seed, threads, noise_sd)


ENVELOPE_LO = "envelope_lo"
ENVELOPE_HI = "envelope_hi"


@dataclass(frozen=True)
class SweepRow:
    delta_star: float
    policy: str
    regret: float
    se: float

    @property
    def regret_abs(self) -> float:
        return abs(self.regret)


def preference_sweep(params: GenModelParams, policies: Sequence[PolicySpec], delta_grid: Sequence[float],
                     n_mc: int, seed: int = 0, threads: int = 1, envelope: bool = True,
                     noise_sd: float = 0.0) -> list[SweepRow]:
    """Regret of each policy at each true preference, plus the compatible envelope.

    The envelope spans the best (``compatible(1)``) and worst
    (``compatible(0)``) policies compatible with the set-valued rule; every
    compatible policy's loss lies between them.
    """
    if not len(delta_grid):
        raise ValueError("delta_grid must be nonempty")
    pols = list(policies)
    extra = [compatible(1.0), compatible(0.0)] if envelope else []
    rows = []
    for d in delta_grid:
        ests = regrets(pols + extra, float(d), params, n_mc, seed, threads, noise_sd)
        for pol, est in zip(pols, ests):
            rows.append(SweepRow(float(d), pol.name, est.value, est.se))
        if envelope:
            lo, hi = ests[len(pols):]
            rows.append(SweepRow(float(d), ENVELOPE_LO, lo.value, lo.se))
            rows.append(SweepRow(float(d), ENVELOPE_HI, hi.value, hi.se))
    return rows


def write_sweep(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("delta_star,policy,regret_abs,se\n")
        for r in rows:
            fh.write(f"{r.delta_star:.12g},{r.policy},{r.regret_abs:.12g},{r.se:.12g}\n")


def read_sweep(path) -> list[SweepRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "delta_star,policy,regret_abs,se":
            raise ValueError(f"unexpected sweep header {header!r}")
        for line in fh:
            d, pol, ra, se = line.strip().split(",")
            rows.append(SweepRow(float(d), pol, -float(ra), float(se)))
    return rows
