"""Greedy classification tree approximating a fitted set-valued rule."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import TreatmentSet
from .static_rule import RegionLabel, SetValuedRule, apply_rule_with_label


@dataclass(frozen=True)
class TreeNode:
    """Either a split on ``column <= threshold`` (left) or a leaf."""

    column: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    recommended: TreatmentSet | None = None
    region: RegionLabel | None = None
    n: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.column is None

    @property
    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth, self.right.depth)

    def predict(self, h) -> TreatmentSet:
        node = self
        while not node.is_leaf:
            node = node.left if h[node.column] <= node.threshold else node.right
        return node.recommended

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            yield from self.left.leaves()
            yield from self.right.leaves()

    def render(self, column_names: Sequence[str] = (), indent: str = "") -> str:
        if self.is_leaf:
            return f"{indent}leaf: {self.recommended} [{self.region}] (n={self.n})\n"
        name = column_names[self.column] if column_names else f"x{self.column}"
        return (f"{indent}if {name} <= {self.threshold:.6g}:\n"
                + self.left.render(column_names, indent + "  ")
                + f"{indent}else:  # {name} > {self.threshold:.6g}\n"
                + self.right.render(column_names, indent + "  "))

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": str(self.recommended), "region": str(self.region), "n": self.n}
        return {"column": self.column, "threshold": self.threshold, "n": self.n,
                "left": self.left.to_dict(), "right": self.right.to_dict()}


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return 1.0 - float(p @ p)


def _best_split(X, y, n_classes, min_leaf):
    n, p = X.shape
    best = None
    parent = np.bincount(y, minlength=n_classes)
    best_score = _gini(parent) * n - 1e-12
    for j in range(p):
        order = np.argsort(X[:, j], kind="stable")
        xs, ys = X[order, j], y[order]
        left = np.zeros(n_classes)
        right = parent.astype(float).copy()
        for i in range(n - 1):
            left[ys[i]] += 1
            right[ys[i]] -= 1
            if xs[i] == xs[i + 1]:
                continue
            nl = i + 1
            if nl < min_leaf or n - nl < min_leaf:
                continue
            score = _gini(left) * nl + _gini(right) * (n - nl)
            if score < best_score:
                best_score = score
                best = (j, 0.5 * (xs[i] + xs[i + 1]))
    return best


def tree_approx(rule: SetValuedRule, sample, max_depth: int = 3, min_leaf: int = 1):
    """Fit a Gini tree to the rule's recommendations on ``sample``.

    Returns ``(tree, agreement)``, where agreement is the fraction of the
    sample on which the tree reproduces the rule.
    """
    X = np.atleast_2d(np.asarray(sample, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("sample must be nonempty")
    out = [apply_rule_with_label(rule, h) for h in X]
    sets = [s for s, _ in out]
    classes = sorted(set(sets), key=lambda s: s.members)
    index = {s: k for k, s in enumerate(classes)}
    y = np.array([index[s] for s in sets])
    labels = [lab for _, lab in out]

    def leaf(idx):
        counts = Counter(y[idx].tolist())
        top = min(counts, key=lambda k: (-counts[k], k))
        regions = Counter(str(labels[i]) for i in idx if y[i] == top)
        rtop = min(regions, key=lambda r: (-regions[r], r))
        region = next(labels[i] for i in idx if str(labels[i]) == rtop)
        return TreeNode(recommended=classes[top], region=region, n=len(idx))

    def grow(idx, depth):
        if depth >= max_depth or len(set(y[idx].tolist())) == 1 or len(idx) < 2 * min_leaf:
            return leaf(idx)
        split = _best_split(X[idx], y[idx], len(classes), min_leaf)
        if split is None:
            return leaf(idx)
        j, t = split
        mask = X[idx, j] <= t
        return TreeNode(j, float(t), grow(idx[mask], depth + 1), grow(idx[~mask], depth + 1), n=len(idx))

    tree = grow(np.arange(X.shape[0]), 0)
    agreement = float(np.mean([tree.predict(h) == s for h, s in zip(X, sets)]))
    return tree, agreement
