"""CSV ingestion and plot-ready exports."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import Dataset, Thresholds, TrajectoryOneStage, TrajectoryTwoStage
from .errors import BindingError, InsufficientData, ParseError
from .regression import slope_outcome
from .static_rule import Region, classify_with_label

log = logging.getLogger(__name__)

MISSING = {"", "na", "nan", "null", "."}


@dataclass(frozen=True)
class SlopeOutcome:
    """Least-squares slope of repeated measurements on their times, times ``scale``.

    ``scale=-1`` turns a symptom score slope into a higher-is-better outcome.
    """

    columns: tuple[str, ...]
    times: tuple[float, ...]
    scale: float = 1.0


@dataclass(frozen=True)
class PercentileOutcome:
    """Percentile of ``column`` within the observed values of ``reference``.

    With ``complement`` the result is ``100 - percentile`` so that higher is
    better for adverse measures. ``shift`` is added afterwards.
    """

    column: str
    reference: str
    complement: bool = True
    shift: float = 0.0


@dataclass(frozen=True)
class Bindings:
    history: tuple[str, ...]
    action: str
    y: str
    z: str
    history2: tuple[str, ...] = ()
    action2: str | None = None
    action_coding: Mapping[str, int] | None = None
    derived: Mapping[str, SlopeOutcome | PercentileOutcome] = field(default_factory=dict)
    binary: bool = True

    @property
    def stage_count(self) -> int:
        return 2 if self.action2 else 1

    def used_columns(self) -> list[str]:
        cols = list(self.history) + [self.action, self.y, self.z] + list(self.history2)
        if self.action2:
            cols.append(self.action2)
        return cols

    @classmethod
    def for_dataset(cls, dataset: Dataset) -> "Bindings":
        if dataset.stage_count == 1:
            return cls(dataset.column_names, "a", "y", "z", binary=dataset.binary)
        return cls(dataset.column_names, "a1", "y", "z", dataset.column_names2, "a2", binary=dataset.binary)


@dataclass(frozen=True)
class LoadReport:
    n_read: int
    n_kept: int
    dropped: int
    dropped_rows: tuple[int, ...] = ()


def percentile_of(values, reference) -> np.ndarray:
    """``100 * P(reference <= v)`` for each ``v``; NaN stays NaN."""
    ref = np.sort(np.asarray(reference, dtype=float))
    ref = ref[np.isfinite(ref)]
    if ref.size == 0:
        raise InsufficientData("empty reference sample for percentile outcome")
    v = np.asarray(values, dtype=float)
    pct = 100.0 * np.searchsorted(ref, v, side="right") / ref.size
    return np.where(np.isfinite(v), pct, np.nan)


def _read_table(path) -> tuple[list[str], list[dict[str, str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(str(path), 1, "", "missing header row") from None
        rows = []
        for line_no, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(str(path), line_no, "", f"expected {len(header)} fields, got {len(rec)}")
            rows.append((line_no, dict(zip(header, (c.strip() for c in rec)))))
    return header, rows


def _number(path, line_no, col, text) -> float:
    if text.lower() in MISSING:
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(str(path), line_no, col, f"not a number: {text!r}") from None


def _action(path, line_no, col, text, coding) -> float:
    if text.lower() in MISSING:
        return math.nan
    if coding is not None:
        if text not in coding:
            raise ParseError(str(path), line_no, col, f"action {text!r} not in coding {sorted(coding)}")
        return float(coding[text])
    v = _number(path, line_no, col, text)
    if v != int(v):
        raise ParseError(str(path), line_no, col, f"action must be an integer code, got {text!r}")
    return v


def load_csv(path, bindings: Bindings) -> tuple[Dataset, LoadReport]:
    """Read a CSV into a Dataset, dropping rows with a missing value in any bound column."""
    header, records = _read_table(path)
    derived = dict(bindings.derived)
    source_cols = set()
    for spec in derived.values():
        if isinstance(spec, SlopeOutcome):
            source_cols.update(spec.columns)
        else:
            source_cols.update((spec.column, spec.reference))
    needed = (set(bindings.used_columns()) - set(derived)) | source_cols
    missing = sorted(c for c in needed if c not in header)
    if missing:
        raise BindingError(f"{path}: columns {missing} not found in header {header}")

    action_cols = {bindings.action, bindings.action2} - {None}
    table: dict[str, np.ndarray] = {}
    for col in sorted(needed):
        if col in action_cols:
            table[col] = np.array([_action(path, ln, col, r[col], bindings.action_coding) for ln, r in records])
        else:
            table[col] = np.array([_number(path, ln, col, r[col]) for ln, r in records])

    n_read = len(records)
    for name, spec in derived.items():
        if isinstance(spec, SlopeOutcome):
            vals = np.full(n_read, np.nan)
            for i in range(n_read):
                try:
                    vals[i] = spec.scale * slope_outcome(spec.times, [table[c][i] for c in spec.columns])
                except InsufficientData:
                    pass
        else:
            pct = percentile_of(table[spec.column], table[spec.reference])
            vals = (100.0 - pct if spec.complement else pct) + spec.shift
        table[name] = vals

    used = bindings.used_columns()
    ok = np.ones(n_read, dtype=bool)
    for col in used:
        ok &= np.isfinite(table[col])
    dropped_rows = tuple(int(records[i][0]) for i in np.flatnonzero(~ok))
    if dropped_rows:
        log.info("%s: dropped %d of %d rows with missing values", path, len(dropped_rows), n_read)

    idx = np.flatnonzero(ok)
    H = np.column_stack([table[c][idx] for c in bindings.history]) if bindings.history else np.zeros((len(idx), 0))
    A = table[bindings.action][idx].astype(int)
    Y, Z = table[bindings.y][idx], table[bindings.z][idx]
    if bindings.stage_count == 1:
        rows = tuple(TrajectoryOneStage(tuple(H[i].tolist()), int(A[i]), float(Y[i]), float(Z[i]))
                     for i in range(len(idx)))
        ds = Dataset(1, rows, bindings.history, (), bindings.binary)
    else:
        H2 = np.column_stack([table[c][idx] for c in bindings.history2])
        A2 = table[bindings.action2][idx].astype(int)
        rows = tuple(TrajectoryTwoStage(tuple(H[i].tolist()), int(A[i]), tuple(H2[i].tolist()), int(A2[i]),
                                        float(Y[i]), float(Z[i])) for i in range(len(idx)))
        ds = Dataset(2, rows, bindings.history, bindings.history2, bindings.binary)
    return ds, LoadReport(n_read, len(idx), len(dropped_rows), dropped_rows)


def write_csv(dataset: Dataset, path, bindings: Bindings | None = None) -> Bindings:
    """Write a Dataset as CSV; returns bindings that read it back."""
    b = bindings or Bindings.for_dataset(dataset)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if dataset.stage_count == 1:
            w.writerow(list(b.history) + [b.action, b.y, b.z])
            for r in dataset.rows:
                w.writerow([repr(float(v)) for v in r.h] + [r.a, repr(float(r.y)), repr(float(r.z))])
        else:
            w.writerow(list(b.history) + [b.action] + list(b.history2) + [b.action2, b.y, b.z])
            for r in dataset.rows:
                w.writerow([repr(float(v)) for v in r.h1] + [r.a1] + [repr(float(v)) for v in r.h2]
                           + [r.a2, repr(float(r.y)), repr(float(r.z))])
    return b


def region_counts(points: Sequence[tuple[float, float]], thresholds: Thresholds) -> dict[str, int]:
    counts = {r.value: 0 for r in Region}
    for r_y, r_z in points:
        _, label = classify_with_label(r_y, r_z, thresholds)
        counts[label.region.value] += 1
    return counts


def export_region_diagram(points, thresholds: Thresholds, path) -> dict:
    """Two-column ``r_y r_z`` file plus a ``.meta.json`` sidecar with region counts."""
    pts = [(float(a), float(b)) for a, b in points]
    if not all(math.isfinite(a) and math.isfinite(b) for a, b in pts):
        raise ValueError("region diagram points must be finite")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# r_y r_z\n")
        for a, b in pts:
            fh.write(f"{a:.12g} {b:.12g}\n")
    meta = {
        "thresholds": {"delta_y": thresholds.delta_y, "delta_z": thresholds.delta_z},
        "n": len(pts),
        "region_counts": region_counts(pts, thresholds),
    }
    with open(str(path) + ".meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta


def read_region_diagram(path) -> list[tuple[float, float]]:
    pts = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            a, b = line.split()
            pts.append((float(a), float(b)))
    return pts
