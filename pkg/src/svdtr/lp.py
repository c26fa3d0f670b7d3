"""Phase-1 simplex for margin feasibility systems ``r_i' psi >= 1``.

By Gordan's alternative, ``{psi : r_i' psi >= 1 for all i}`` is empty exactly
when the origin lies in the convex hull of the rows ``r_i``. The kernel runs a
phase-1 simplex on that hull system

    sum_i lam_i r_i = 0,   sum_i lam_i = 1,   lam >= 0,

which has only ``d + 1`` rows regardless of how many points there are. If the
phase-1 optimum is positive, the optimal simplex multipliers ``y`` give the
witness ``psi = -y[:d] / y[d]``. Pivoting uses Bland's rule, so the method
terminates without cycling.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-11
# phase-1 objective at or below this (times the data scale) means "origin in hull"
HULL_TOL = 1e-9


class LPStatus(enum.Enum):
    FEASIBLE = "FEASIBLE"
    INFEASIBLE = "INFEASIBLE"
    NUMERICAL_FAILURE = "NUMERICAL_FAILURE"


@dataclass(frozen=True)
class LPResult:
    status: LPStatus
    point: np.ndarray | None = None
    pivots: int = 0
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is LPStatus.FEASIBLE


def margin_feasible(rows, max_pivots: int | None = None) -> LPResult:
    """Decide whether some ``psi`` satisfies ``rows @ psi >= 1`` componentwise."""
    R = np.asarray(rows, dtype=float)
    if R.ndim != 2:
        raise ValueError("rows must be a 2-D array")
    m, d = R.shape
    if m == 0:
        return LPResult(LPStatus.FEASIBLE, np.zeros(d))
    if d == 0 or not np.any(R):
        return LPResult(LPStatus.INFEASIBLE)
    if max_pivots is None:
        max_pivots = 50 * (m + d)

    scale = float(np.max(np.abs(R)))
    Rs = R / scale
    nrow = d + 1
    # columns: lam_0..lam_{m-1}, art_0..art_d
    T = np.zeros((nrow, m + nrow))
    T[:d, :m] = Rs.T
    T[d, :m] = 1.0
    T[:, m:] = np.eye(nrow)
    rhs = np.zeros(nrow)
    rhs[d] = 1.0
    basis = list(range(m, m + nrow))
    # reduced costs of phase-1 objective sum(art)
    cost = np.zeros(m + nrow)
    cost[m:] = 1.0
    red = cost - T.sum(axis=0)
    obj = rhs.sum()

    pivots = 0
    while True:
        candidates = np.flatnonzero(red < -PIVOT_TOL)
        if candidates.size == 0:
            break
        if pivots >= max_pivots:
            return LPResult(LPStatus.NUMERICAL_FAILURE, pivots=pivots,
                            message=f"pivot cap {max_pivots} reached")
        e = int(candidates[0])  # Bland: lowest index entering
        col = T[:, e]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            # unbounded direction cannot occur for a bounded phase-1 objective
            return LPResult(LPStatus.NUMERICAL_FAILURE, pivots=pivots, message="unbounded ratio test")
        ratios = rhs[pos] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))  # Bland: lowest basic index leaving
        piv = T[r, e]
        T[r] /= piv
        rhs[r] /= piv
        for i in range(nrow):
            if i != r and T[i, e] != 0.0:
                f = T[i, e]
                T[i] -= f * T[r]
                rhs[i] -= f * rhs[r]
        f = red[e]
        red -= f * T[r]
        obj -= f * rhs[r]
        basis[r] = e
        pivots += 1

    # objective recomputed from the basic solution for accuracy
    np.maximum(rhs, 0.0, out=rhs)
    obj = float(sum(rhs[i] for i in range(nrow) if basis[i] >= m))
    if obj <= HULL_TOL:
        return LPResult(LPStatus.INFEASIBLE, pivots=pivots)

    full = np.zeros((nrow, m + nrow))
    full[:d, :m] = Rs.T
    full[d, :m] = 1.0
    full[:, m:] = np.eye(nrow)
    B = full[:, basis]
    try:
        y = np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError:
        return LPResult(LPStatus.NUMERICAL_FAILURE, pivots=pivots, message="singular final basis")
    if y[d] <= 0:
        return LPResult(LPStatus.NUMERICAL_FAILURE, pivots=pivots, message="nonpositive dual scale")
    psi = -y[:d] / y[d] / scale
    margins = R @ psi
    low = float(margins.min())
    if low <= 0:
        return LPResult(LPStatus.NUMERICAL_FAILURE, pivots=pivots,
                        message=f"recovered separator has margin {low:.3g}")
    if low < 1.0:
        psi = psi / low
    return LPResult(LPStatus.FEASIBLE, psi, pivots)


def lp_feasible(points, labels, max_pivots: int | None = None) -> LPResult:
    """Is there ``psi`` with ``labels[i] * points[i]' psi >= 1`` for every ``i``?

    Returns FEASIBLE with a witness, INFEASIBLE, or NUMERICAL_FAILURE.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    labels = np.asarray(labels, dtype=float).reshape(-1)
    if X.shape[0] != labels.shape[0]:
        raise ValueError("points and labels differ in length")
    return margin_feasible(labels[:, None] * X, max_pivots)


def satisfies(rows, psi, tol: float = FEAS_TOL) -> bool:
    R = np.asarray(rows, dtype=float)
    if R.shape[0] == 0:
        return True
    return bool(np.all(R @ np.asarray(psi, dtype=float) >= 1.0 - tol))
