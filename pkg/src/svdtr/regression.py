"""Least-squares fitting of linear working models.

All fits go through a thin QR factorization. Numerical rank is judged on the
singular values of the triangular factor, with a relative cutoff of
``RANK_RTOL``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from .core import Dataset, ModelSpec
from .errors import DimensionMismatch, InsufficientData, RankDeficient

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ResidualSummary:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    residual_std_error: float
    df: int
    r_squared: float

    @classmethod
    def from_residuals(cls, y, resid, q) -> "ResidualSummary":
        n = len(resid)
        df = n - q
        rss = float(resid @ resid)
        tss = float(((y - y.mean()) ** 2).sum())
        sigma = float(np.sqrt(rss / df)) if df > 0 else float("nan")
        r2 = 1.0 - rss / tss if tss > 0 else float("nan")
        qs = np.percentile(resid, [0, 25, 50, 75, 100]) if n else [np.nan] * 5
        return cls(*(float(v) for v in qs), sigma, df, r2)


class CachedProjector:
    """Thin QR factorization of a fixed design, reusable across responses."""

    def __init__(self, design):
        X = np.array(design, dtype=float, ndmin=2)
        n, q = X.shape
        if n < q:
            raise RankDeficient(n, q)
        Q, R = np.linalg.qr(X, mode="reduced")
        sv = np.linalg.svd(R, compute_uv=False)
        ratio = sv[-1] / sv[0] if sv[0] > 0 else 0.0
        if ratio < RANK_RTOL:
            rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv[0] > 0 else 0
            raise RankDeficient(rank, q, ratio)
        self.design = X
        self.design.setflags(write=False)
        self._Q = Q
        self._R = R

    @property
    def shape(self):
        return self.design.shape

    def coefficients(self, response) -> np.ndarray:
        """Least-squares coefficients for one response vector, or a column per response."""
        y = np.asarray(response, dtype=float)
        if y.shape[0] != self.design.shape[0]:
            raise DimensionMismatch(f"response has {y.shape[0]} rows, design has {self.design.shape[0]}")
        return linalg.solve_triangular(self._R, self._Q.T @ y, lower=False)

    def unscaled_covariance(self) -> np.ndarray:
        """(X'X)^{-1}, from the triangular factor."""
        Rinv = linalg.solve_triangular(self._R, np.eye(self._R.shape[0]), lower=False)
        return Rinv @ Rinv.T


def make_projector(design) -> CachedProjector:
    return CachedProjector(design)


def project(projector: CachedProjector, response) -> np.ndarray:
    return projector.coefficients(response)


def fit_ols(design, response) -> np.ndarray:
    """Least-squares coefficients of ``response`` on the columns of ``design``."""
    return CachedProjector(design).coefficients(response)


@dataclass(frozen=True)
class FittedQModel:
    """Fitted ``Q(h, a) = h_main'beta + a * h_interact'psi``."""

    beta: np.ndarray
    psi: np.ndarray
    spec: ModelSpec
    residual_summary: ResidualSummary | None = None
    std_errors: np.ndarray | None = None
    coef_names: tuple[str, ...] = ()

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).copy()
        psi = np.asarray(self.psi, dtype=float).copy()
        if beta.shape != (self.spec.main_dim,) or psi.shape != (self.spec.interact_dim,):
            raise DimensionMismatch("coefficient blocks do not match the model spec")
        beta.setflags(write=False)
        psi.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "psi", psi)

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([self.beta, self.psi])

    def predict(self, H, a) -> np.ndarray:
        """Fitted Q at histories ``H`` (one per row) and actions ``a`` (scalar or per row)."""
        H = np.atleast_2d(np.asarray(H, dtype=float))
        a = np.broadcast_to(np.asarray(a, dtype=float), (H.shape[0],))
        return self.spec.main_features(H) @ self.beta + a * (self.spec.interact_features(H) @ self.psi)

    def contrasts(self, H) -> np.ndarray:
        """Vectorized ``Q(h, +1) - Q(h, -1)`` over the rows of ``H``."""
        return 2.0 * (self.spec.interact_features(H) @ self.psi)

    def scores(self, H) -> np.ndarray:
        return self.spec.interact_features(H) @ self.psi


def contrast(model: FittedQModel, h) -> float:
    """Estimated treatment contrast ``2 * h_interact' psi`` at a single history."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 1:
        raise DimensionMismatch("contrast expects a single history vector")
    return float(model.contrasts(h.reshape(1, -1))[0])


def _fit_from_projector(proj: CachedProjector, y, spec: ModelSpec, names=(), diagnostics=True) -> FittedQModel:
    coef = proj.coefficients(y)
    summary = se = None
    if diagnostics:
        resid = y - proj.design @ coef
        summary = ResidualSummary.from_residuals(y, resid, len(coef))
        if summary.df > 0:
            se = summary.residual_std_error * np.sqrt(np.diag(proj.unscaled_covariance()))
    return FittedQModel(coef[: spec.main_dim], coef[spec.main_dim:], spec, summary, se, tuple(names))


def fit_q_model(dataset: Dataset, spec: ModelSpec, outcome="y", stage: int = 1,
                diagnostics: bool = True) -> FittedQModel:
    """Fit a working model by least squares.

    ``outcome`` is ``"y"``, ``"z"`` or an explicit response vector (a
    pseudo-outcome) of length ``n``.
    """
    H, A = dataset.stage_arrays(stage)
    spec.check_width(H.shape[1])
    if isinstance(outcome, str):
        y = np.asarray(dataset.outcome(outcome), dtype=float)
    else:
        y = np.asarray(outcome, dtype=float)
        if y.shape != (dataset.n,):
            raise DimensionMismatch(f"pseudo-outcome has shape {y.shape}, expected ({dataset.n},)")
    proj = CachedProjector(spec.design(H, A))
    names = dataset.column_names if stage == 1 else dataset.column_names2
    return _fit_from_projector(proj, y, spec, spec.coef_names(names) if names else (), diagnostics)


def slope_outcome(times, values) -> float:
    """Least-squares slope of the observed ``values`` on ``times``; NaN marks missing."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise DimensionMismatch("times and values differ in length")
    ok = np.isfinite(t) & np.isfinite(v)
    t, v = t[ok], v[ok]
    if len(t) < 2:
        raise InsufficientData(f"slope needs at least 2 observed pairs, got {len(t)}")
    tc = t - t.mean()
    sxx = float(tc @ tc)
    if sxx == 0.0:
        raise InsufficientData("all observation times are equal")
    return float(tc @ (v - v.mean()) / sxx)


def coefficient_table(model: FittedQModel) -> list[tuple[str, float, float, float, float]]:
    """Rows ``(name, estimate, std_error, t, p)`` using the homoskedastic formulas.

    Display only: stage-1 estimators are non-regular, so these are not valid
    inference for stage-1 fits.
    """
    coef = model.coefficients
    names = model.coef_names or tuple(f"x{j}" for j in range(len(coef)))
    if model.std_errors is None or model.residual_summary is None:
        raise ValueError("model was fitted without diagnostics")
    df = model.residual_summary.df
    rows = []
    for name, b, s in zip(names, coef, model.std_errors):
        t = b / s if s > 0 else float("inf")
        p = float(2 * stats.t.sf(abs(t), df))
        rows.append((name, float(b), float(s), float(t), p))
    return rows


def format_coefficient_table(model: FittedQModel, title: str = "") -> str:
    rows = coefficient_table(model)
    width = max([len(r[0]) for r in rows] + [11])
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'':>{width}} {'Estimate':>10} {'Std. Error':>10} {'t value':>10} {'Pr(>|t|)':>10}")
    for name, b, s, t, p in rows:
        lines.append(f"{name:>{width}} {b:10.4f} {s:10.4f} {t:10.4f} {p:10.4f}")
    rs = model.residual_summary
    lines.append("")
    lines.append("Residuals:")
    lines.append(f"{'Min':>10} {'1Q':>10} {'Median':>10} {'3Q':>10} {'Max':>10}")
    lines.append(f"{rs.min:10.4f} {rs.q1:10.4f} {rs.median:10.4f} {rs.q3:10.4f} {rs.max:10.4f}")
    lines.append(f"Residual standard error: {rs.residual_std_error:.4f} on {rs.df} degrees of freedom")
    lines.append(f"Multiple R-squared: {rs.r_squared:.4f}")
    return "\n".join(lines) + "\n"
