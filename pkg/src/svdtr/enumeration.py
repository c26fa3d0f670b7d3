"""Enumeration of compatible, linearly separable labelings of stage-2 histories.

Every subject contributes a block of margin constraints ``r' psi >= 1`` that
depends on the action it is labeled with. Subjects whose compatible set is a
singleton contribute a fixed block; the others are branched on, depth first,
with an LP feasibility check at each node. Infeasible prefixes are pruned: any
completion only adds constraints, so it stays infeasible.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ModelSpec, Thresholds, TreatmentSet, embed_interaction, union_interaction_spec
from .errors import BudgetExceeded, DimensionMismatch, NumericalFailure
from .lp import FEAS_TOL, LPStatus, margin_feasible
from .regression import FittedQModel
from .static_rule import SetValuedRule

log = logging.getLogger(__name__)

DEFAULT_CAP = 10**6


@dataclass(frozen=True)
class Labeling:
    """Action per observed history, with a separator that realizes it."""

    labels: tuple[int, ...]
    witness: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))
        if self.witness is not None:
            w = np.array(self.witness, dtype=float)
            w.setflags(write=False)
            object.__setattr__(self, "witness", w)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.labels, dtype=int)

    def __len__(self):
        return len(self.labels)


@dataclass
class _Item:
    index: int
    choices: list[int]
    blocks: list[np.ndarray]  # one constraint block per choice


class _Search:
    def __init__(self, fixed_rows: np.ndarray, items: list[_Item], fixed_labels: dict[int, int],
                 n: int, cap: int):
        self.fixed_rows = fixed_rows
        self.items = items
        self.fixed_labels = fixed_labels
        self.n = n
        self.cap = cap
        self.dim = fixed_rows.shape[1]
        sizes = [it.blocks[0].shape[0] if it.blocks else 0 for it in items]
        self.offsets = np.concatenate([[fixed_rows.shape[0]], fixed_rows.shape[0] + np.cumsum(sizes)]).astype(int)
        self._count = 0
        self._lock = threading.Lock()
        self.lp_calls = 0
        self.warm_hits = 0

    def _labels(self, path: Sequence[int]) -> tuple[int, ...]:
        out = [0] * self.n
        for i, v in self.fixed_labels.items():
            out[i] = v
        for item, c in zip(self.items, path):
            out[item.index] = item.choices[c]
        return tuple(out)

    def _child(self, buf, depth, choice, witness, path):
        """Write the block for ``choice`` at ``depth``; return the child's witness or None."""
        item = self.items[depth]
        block = item.blocks[choice]
        lo, hi = self.offsets[depth], self.offsets[depth + 1]
        buf[lo:hi] = block
        if witness is not None and np.all(block @ witness >= 1.0 - FEAS_TOL):
            self.warm_hits += 1
            return witness
        self.lp_calls += 1
        res = margin_feasible(buf[:hi])
        if res.status is LPStatus.NUMERICAL_FAILURE:
            partial = {self.items[k].index: self.items[k].choices[c] for k, c in enumerate(path + [choice])}
            raise NumericalFailure(f"LP failure at depth {depth}: {res.message}", partial)
        return res.point if res.feasible else None

    def _record(self, out, path, witness):
        with self._lock:
            self._count += 1
            if self._count > self.cap:
                raise BudgetExceeded(self.cap, self._count)
        out.append(Labeling(self._labels(path), witness))

    def root(self):
        res = margin_feasible(self.fixed_rows)
        if res.status is LPStatus.NUMERICAL_FAILURE:
            raise NumericalFailure(f"LP failure on forced labels: {res.message}", dict(self.fixed_labels))
        return res.point if res.feasible else None

    def _new_buffer(self, path):
        buf = np.empty((self.offsets[-1], self.dim))
        buf[: self.offsets[0]] = self.fixed_rows
        for depth, c in enumerate(path):
            buf[self.offsets[depth]: self.offsets[depth + 1]] = self.items[depth].blocks[c]
        return buf

    def subtree(self, path: list[int], witness) -> list[Labeling]:
        """Depth-first enumeration of all feasible completions of ``path``."""
        out: list[Labeling] = []
        buf = self._new_buffer(path)
        start = len(path)
        # stack entries: (depth, choice, parent witness, path prefix)
        if start == len(self.items):
            self._record(out, path, witness)
            return out
        stack = [(start, c, witness, path) for c in reversed(range(len(self.items[start].choices)))]
        while stack:
            depth, c, w, prefix = stack.pop()
            cw = self._child(buf, depth, c, w, prefix)
            if cw is None:
                continue
            p = prefix + [c]
            if depth + 1 == len(self.items):
                self._record(out, p, cw)
            else:
                nxt = self.items[depth + 1]
                for c2 in reversed(range(len(nxt.choices))):
                    stack.append((depth + 1, c2, cw, p))
        return out

    def frontier(self, split_depth: int, witness) -> list[tuple[list[int], np.ndarray]]:
        """Feasible prefixes of length ``split_depth`` (breadth first)."""
        level = [([], witness)]
        for depth in range(split_depth):
            nxt = []
            for path, w in level:
                buf = self._new_buffer(path)
                for c in range(len(self.items[depth].choices)):
                    cw = self._child(buf, depth, c, w, path)
                    if cw is not None:
                        nxt.append((path + [c], cw))
            level = nxt
        return level


def _run(fixed_rows, items, fixed_labels, n, cap, threads) -> list[Labeling]:
    search = _Search(fixed_rows, items, fixed_labels, n, cap)
    root_w = search.root()
    if root_w is None:
        return []
    if threads <= 1 or len(items) < 2:
        results = search.subtree([], root_w)
    else:
        split = 1
        while split < len(items) and 2**split < 4 * threads:
            split += 1
        work = search.frontier(split, root_w)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda pw: search.subtree(pw[0], pw[1]), work))
        results = [lab for part in parts for lab in part]
    results.sort(key=lambda lab: lab.labels)
    log.debug("enumeration: %d labelings, %d LP solves, %d warm-start hits",
              len(results), search.lp_calls, search.warm_hits)
    return results


def _branch_order(items: list[_Item]) -> list[_Item]:
    # large-norm subjects constrain the LP most; ties by index for determinism
    def key(it):
        norm = max(float(np.linalg.norm(b)) for b in it.blocks)
        return (-norm, it.index)
    return sorted(items, key=key)


def enumerate_labelings(points, allowed: Sequence[Sequence[int]], cap: int = DEFAULT_CAP,
                        threads: int = 1) -> list[Labeling]:
    """All labelings ``l`` with ``l_i in allowed[i]`` and ``l_i x_i' psi >= 1`` for some ``psi``.

    Output is sorted lexicographically by label vector.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n, d = X.shape
    if len(allowed) != n:
        raise DimensionMismatch("allowed sets and points differ in length")
    fixed_rows, fixed_labels, items = [], {}, []
    for i in range(n):
        opts = sorted({int(a) for a in allowed[i]})
        if not opts or any(a not in (-1, 1) for a in opts):
            raise ValueError(f"point {i}: allowed labels must be a nonempty subset of {{-1, 1}}")
        if len(opts) == 1:
            fixed_labels[i] = opts[0]
            fixed_rows.append(opts[0] * X[i])
        else:
            items.append(_Item(i, opts, [np.array([a * X[i]]) for a in opts]))
    fixed = np.array(fixed_rows, dtype=float).reshape(len(fixed_rows), d)
    return _run(fixed, _branch_order(items), fixed_labels, n, cap, threads)


def separator_spec(rule: SetValuedRule) -> ModelSpec:
    """Interaction block the stage-2 separator acts on: union of the Y and Z blocks."""
    return union_interaction_spec(rule.model_y.spec, rule.model_z.spec)


def enumerate_feasible(rule: SetValuedRule, histories, cap: int = DEFAULT_CAP, threads: int = 1,
                       spec: ModelSpec | None = None) -> list[Labeling]:
    """Feasible labelings of the observed stage-2 histories for a set-valued rule."""
    H2 = np.atleast_2d(np.asarray(histories, dtype=float))
    spec = spec or separator_spec(rule)
    X = spec.interact_features(H2)
    codes = rule.codes(H2)
    allowed = [(-1, 1) if c == 0 else (int(c),) for c in codes]
    return enumerate_labelings(X, allowed, cap, threads)


@dataclass(frozen=True)
class CanonicalRule:
    psi: np.ndarray
    spec: ModelSpec

    def scores(self, H) -> np.ndarray:
        return self.spec.interact_features(H) @ self.psi

    def labels(self, H) -> np.ndarray:
        return np.where(self.scores(H) >= 0, 1, -1)

    def zero_score_points(self, H, tol: float = 0.0) -> np.ndarray:
        return np.flatnonzero(np.abs(self.scores(H)) <= tol)


def canonical_feasible_rule(model_y: FittedQModel, model_z: FittedQModel, thresholds: Thresholds,
                            spec: ModelSpec | None = None) -> CanonicalRule:
    """``psi_Y / (2 delta_Y) + psi_Z / (2 delta_Z)`` on the shared interaction block.

    When the two models use different interaction columns, both coefficient
    vectors are embedded into the union block first.
    """
    spec = spec or union_interaction_spec(model_y.spec, model_z.spec)
    py = embed_interaction(model_y.psi, model_y.spec, spec)
    pz = embed_interaction(model_z.psi, model_z.spec, spec)
    return CanonicalRule(py / (2 * thresholds.delta_y) + pz / (2 * thresholds.delta_z), spec)


def enumerate_feasible_multi(setvalued: Sequence[TreatmentSet], features, cap: int = DEFAULT_CAP,
                             threads: int = 1) -> list[Labeling]:
    """Feasible action assignments over a finite action set ``1..K``.

    ``features[i, j - 1]`` is the encoding ``phi(h_i, j)``. An assignment is
    kept when each subject's action lies in its compatible set and some
    ``psi`` gives ``(phi(h_i, j) - phi(h_i, k))' psi >= 1`` for every other
    action ``k``.
    """
    F = np.asarray(features, dtype=float)
    if F.ndim != 3:
        raise DimensionMismatch("features must have shape (n, K, d)")
    n, K, d = F.shape
    if len(setvalued) != n:
        raise DimensionMismatch("one compatible set per subject is required")
    fixed_rows, fixed_labels, items = [], {}, []
    for i in range(n):
        opts = list(setvalued[i])
        if any(a < 1 or a > K for a in opts):
            raise ValueError(f"subject {i}: actions must lie in 1..{K}")
        blocks = [np.array([F[i, j - 1] - F[i, k] for k in range(K) if k != j - 1]) for j in opts]
        if len(opts) == 1:
            fixed_labels[i] = opts[0]
            fixed_rows.extend(blocks[0])
        else:
            items.append(_Item(i, opts, blocks))
    fixed = np.array(fixed_rows, dtype=float).reshape(len(fixed_rows), d)
    return _run(fixed, _branch_order(items), fixed_labels, n, cap, threads)


def format_labeling(lab: Labeling) -> str:
    labels = " ".join(str(v) for v in lab.labels)
    witness = " ".join(f"{v:.12g}" for v in (lab.witness if lab.witness is not None else ()))
    return f"{labels} | {witness}"


def write_labeling_dump(labelings: Sequence[Labeling], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for lab in labelings:
            fh.write(format_labeling(lab) + "\n")


def read_labeling_dump(path) -> list[Labeling]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            left, _, right = line.partition("|")
            labels = tuple(int(t) for t in left.split())
            witness = np.array([float(t) for t in right.split()]) if right.strip() else None
            out.append(Labeling(labels, witness))
    return out
