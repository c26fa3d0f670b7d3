"""Domain types: thresholds, treatment sets, trajectories, model specs, datasets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, DimensionMismatch

BINARY_ACTIONS = (-1, 1)


@dataclass(frozen=True)
class Thresholds:
    """Clinically meaningful differences for the outcomes Y and Z."""

    delta_y: float
    delta_z: float

    def __post_init__(self):
        for name in ("delta_y", "delta_z"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")


@dataclass(frozen=True)
class TreatmentSet:
    """Nonempty set of action codes, stored in ascending order."""

    members: tuple[int, ...]

    def __post_init__(self):
        members = tuple(sorted({int(a) for a in self.members}))
        if not members:
            raise ValueError("TreatmentSet must be nonempty")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, *actions: int) -> "TreatmentSet":
        return cls(tuple(actions))

    def __contains__(self, action) -> bool:
        return int(action) in self.members

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __or__(self, other: "TreatmentSet") -> "TreatmentSet":
        return TreatmentSet(self.members + other.members)

    def __neg__(self) -> "TreatmentSet":
        return TreatmentSet(tuple(-a for a in self.members))

    @property
    def is_singleton(self) -> bool:
        return len(self.members) == 1

    def __str__(self) -> str:
        return "{" + ",".join(str(a) for a in self.members) + "}"

    @classmethod
    def parse(cls, text: str) -> "TreatmentSet":
        body = text.strip().strip("{}")
        return cls(tuple(int(t) for t in body.split(",") if t.strip()))


BOTH = TreatmentSet.of(-1, 1)
POS = TreatmentSet.of(1)
NEG = TreatmentSet.of(-1)


@dataclass(frozen=True)
class TrajectoryOneStage:
    h: tuple[float, ...]
    a: int
    y: float
    z: float


@dataclass(frozen=True)
class TrajectoryTwoStage:
    h1: tuple[float, ...]
    a1: int
    h2: tuple[float, ...]
    a2: int
    y: float
    z: float


@dataclass(frozen=True)
class ModelSpec:
    """Column selection for a linear working model ``h1'beta + a * h2'psi``.

    ``main_cols`` picks the main-effect subvector and ``interact_cols`` the
    treatment-interaction subvector of a history vector. The two lists may
    overlap; duplicates within one list are rejected.
    """

    main_cols: tuple[int, ...] = ()
    interact_cols: tuple[int, ...] = ()
    intercept_main: bool = True
    intercept_interact: bool = True

    def __post_init__(self):
        object.__setattr__(self, "main_cols", tuple(int(c) for c in self.main_cols))
        object.__setattr__(self, "interact_cols", tuple(int(c) for c in self.interact_cols))
        for name in ("main_cols", "interact_cols"):
            cols = getattr(self, name)
            if len(set(cols)) != len(cols):
                raise ValueError(f"duplicate index in {name}: {cols}")
            if any(c < 0 for c in cols):
                raise ValueError(f"negative index in {name}: {cols}")
        if self.main_dim == 0 or self.interact_dim == 0:
            raise ValueError("both the main and interaction blocks need at least one column")

    @property
    def main_dim(self) -> int:
        return len(self.main_cols) + int(self.intercept_main)

    @property
    def interact_dim(self) -> int:
        return len(self.interact_cols) + int(self.intercept_interact)

    @property
    def n_coef(self) -> int:
        return self.main_dim + self.interact_dim

    def check_width(self, p: int) -> None:
        top = max(self.main_cols + self.interact_cols, default=-1)
        if top >= p:
            raise DimensionMismatch(f"model spec references column {top} but history has {p} columns")

    def main_features(self, H) -> np.ndarray:
        H = np.atleast_2d(np.asarray(H, dtype=float))
        self.check_width(H.shape[1])
        parts = [np.ones((H.shape[0], 1))] if self.intercept_main else []
        parts.append(H[:, list(self.main_cols)])
        return np.hstack(parts)

    def interact_features(self, H) -> np.ndarray:
        H = np.atleast_2d(np.asarray(H, dtype=float))
        self.check_width(H.shape[1])
        parts = [np.ones((H.shape[0], 1))] if self.intercept_interact else []
        parts.append(H[:, list(self.interact_cols)])
        return np.hstack(parts)

    def design(self, H, A) -> np.ndarray:
        """Full design ``[h_main | a * h_interact]``."""
        A = np.asarray(A, dtype=float).reshape(-1, 1)
        return np.hstack([self.main_features(H), A * self.interact_features(H)])

    def coef_names(self, column_names: Sequence[str], action_name: str = "trt") -> list[str]:
        main = (["(Intercept)"] if self.intercept_main else []) + [column_names[c] for c in self.main_cols]
        inter = ([action_name] if self.intercept_interact else []) + [
            f"{column_names[c]}*{action_name}" for c in self.interact_cols
        ]
        return main + inter

    @classmethod
    def from_names(cls, column_names: Sequence[str], main=(), interact=(),
                   intercept_main=True, intercept_interact=True) -> "ModelSpec":
        index = {name: i for i, name in enumerate(column_names)}
        missing = [c for c in list(main) + list(interact) if c not in index]
        if missing:
            raise KeyError(f"unknown history columns {missing}; available: {list(column_names)}")
        return cls(tuple(index[c] for c in main), tuple(index[c] for c in interact),
                   intercept_main, intercept_interact)


def union_interaction_spec(*specs: ModelSpec) -> ModelSpec:
    """Spec whose interaction block is the union of the given interaction blocks.

    Column order is order of first appearance; an intercept is present if any
    input spec has one. The main block is a placeholder intercept.
    """
    cols: list[int] = []
    for s in specs:
        for c in s.interact_cols:
            if c not in cols:
                cols.append(c)
    return ModelSpec((), tuple(cols), True, any(s.intercept_interact for s in specs))


def embed_interaction(psi, spec: ModelSpec, target: ModelSpec) -> np.ndarray:
    """Map interaction coefficients of ``spec`` onto the interaction block of ``target``."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (spec.interact_dim,):
        raise DimensionMismatch(f"psi has shape {psi.shape}, spec expects ({spec.interact_dim},)")
    out = np.zeros(target.interact_dim)
    offset = int(target.intercept_interact)
    k = 0
    if spec.intercept_interact:
        if not target.intercept_interact:
            raise DimensionMismatch("target spec lacks an interaction intercept")
        out[0] += psi[0]
        k = 1
    for c, v in zip(spec.interact_cols, psi[k:]):
        try:
            out[offset + target.interact_cols.index(c)] += v
        except ValueError:
            raise DimensionMismatch(f"column {c} missing from target interaction block") from None
    return out


@dataclass(frozen=True)
class Dataset:
    """Immutable container of one- or two-stage trajectories.

    ``column_names`` labels the (stage-1) history components and
    ``column_names2`` the stage-2 history components. Array views are built
    lazily and are read-only.
    """

    stage_count: int
    rows: tuple
    column_names: tuple[str, ...] = ()
    column_names2: tuple[str, ...] = ()
    binary: bool = True

    def __post_init__(self):
        if self.stage_count not in (1, 2):
            raise ValueError("stage_count must be 1 or 2")
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "column_names2", tuple(self.column_names2))

    @property
    def n(self) -> int:
        return len(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def _stack(self, attr: str) -> np.ndarray:
        vals = [getattr(r, attr) for r in self.rows]
        widths = {len(v) for v in vals}
        if len(widths) > 1:
            raise DataError(f"ragged history field {attr!r}: widths {sorted(widths)}")
        width = widths.pop() if widths else len(self.column_names if attr != "h2" else self.column_names2)
        arr = np.array(vals, dtype=float).reshape(len(vals), width)
        arr.setflags(write=False)
        return arr

    def _vector(self, attr: str, dtype=float) -> np.ndarray:
        arr = np.array([getattr(r, attr) for r in self.rows], dtype=dtype)
        arr.setflags(write=False)
        return arr

    @cached_property
    def H(self) -> np.ndarray:
        return self._stack("h" if self.stage_count == 1 else "h1")

    @cached_property
    def A(self) -> np.ndarray:
        return self._vector("a" if self.stage_count == 1 else "a1", int)

    @cached_property
    def H2(self) -> np.ndarray:
        self._require_two_stage()
        return self._stack("h2")

    @cached_property
    def A2(self) -> np.ndarray:
        self._require_two_stage()
        return self._vector("a2", int)

    @cached_property
    def Y(self) -> np.ndarray:
        return self._vector("y")

    @cached_property
    def Z(self) -> np.ndarray:
        return self._vector("z")

    def _require_two_stage(self):
        if self.stage_count != 2:
            raise DataError("stage-2 fields requested from a one-stage dataset")

    def outcome(self, which: str) -> np.ndarray:
        if which in ("y", "Y"):
            return self.Y
        if which in ("z", "Z"):
            return self.Z
        raise ValueError(f"unknown outcome {which!r}")

    def stage_arrays(self, stage: int) -> tuple[np.ndarray, np.ndarray]:
        if stage == 1:
            return self.H, self.A
        if stage == 2:
            return self.H2, self.A2
        raise ValueError("stage must be 1 or 2")

    def subset(self, index: Iterable[int]) -> "Dataset":
        return Dataset(self.stage_count, tuple(self.rows[i] for i in index),
                       self.column_names, self.column_names2, self.binary)

    @classmethod
    def from_arrays(cls, H, A, Y, Z, H2=None, A2=None, column_names=(), column_names2=(),
                    binary=True) -> "Dataset":
        H = np.asarray(H, dtype=float)
        n = H.shape[0]
        A, Y, Z = (np.asarray(v).reshape(n) for v in (A, Y, Z))
        if H2 is None:
            rows = tuple(TrajectoryOneStage(tuple(map(float, H[i])), int(A[i]), float(Y[i]), float(Z[i]))
                         for i in range(n))
            names = tuple(column_names) or tuple(f"h{j + 1}" for j in range(H.shape[1]))
            return cls(1, rows, names, (), binary)
        H2 = np.asarray(H2, dtype=float)
        A2 = np.asarray(A2).reshape(n)
        rows = tuple(
            TrajectoryTwoStage(tuple(map(float, H[i])), int(A[i]), tuple(map(float, H2[i])), int(A2[i]),
                               float(Y[i]), float(Z[i]))
            for i in range(n)
        )
        names = tuple(column_names) or tuple(f"h1_{j + 1}" for j in range(H.shape[1]))
        names2 = tuple(column_names2) or tuple(f"h2_{j + 1}" for j in range(H2.shape[1]))
        return cls(2, rows, names, names2, binary)

    def to_dict(self) -> dict:
        return {
            "stage_count": self.stage_count,
            "binary": self.binary,
            "column_names": list(self.column_names),
            "column_names2": list(self.column_names2),
            "rows": [_row_to_dict(r) for r in self.rows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        stage_count = int(d["stage_count"])
        rows = tuple(_row_from_dict(stage_count, r) for r in d["rows"])
        return cls(stage_count, rows, tuple(d.get("column_names", ())),
                   tuple(d.get("column_names2", ())), bool(d.get("binary", True)))


def _row_to_dict(r) -> dict:
    if isinstance(r, TrajectoryOneStage):
        return {"h": list(r.h), "a": r.a, "y": r.y, "z": r.z}
    return {"h1": list(r.h1), "a1": r.a1, "h2": list(r.h2), "a2": r.a2, "y": r.y, "z": r.z}


def _row_from_dict(stage_count: int, d: dict):
    if stage_count == 1:
        return TrajectoryOneStage(tuple(d["h"]), int(d["a"]), float(d["y"]), float(d["z"]))
    return TrajectoryTwoStage(tuple(d["h1"]), int(d["a1"]), tuple(d["h2"]), int(d["a2"]),
                              float(d["y"]), float(d["z"]))


@dataclass(frozen=True)
class Violation:
    row: int
    field: str
    message: str

    def __str__(self):
        return f"row {self.row}: {self.field}: {self.message}"


def _is_finite_number(v) -> bool:
    try:
        return math.isfinite(float(v))
    except (TypeError, ValueError):
        return False


def validate(dataset: Dataset) -> list[Violation]:
    """Check every type invariant; return one violation per offending row and field."""
    out: list[Violation] = []
    if dataset.stage_count == 1:
        hist_fields = [("h", len(dataset.column_names))]
        action_fields = ["a"]
        expected_type = TrajectoryOneStage
    else:
        hist_fields = [("h1", len(dataset.column_names)), ("h2", len(dataset.column_names2))]
        action_fields = ["a1", "a2"]
        expected_type = TrajectoryTwoStage

    # expected widths: declared names when present, otherwise the first row
    widths = {}
    for f, declared in hist_fields:
        if declared:
            widths[f] = declared
        elif dataset.rows:
            widths[f] = len(getattr(dataset.rows[0], f, ()))

    for i, r in enumerate(dataset.rows):
        if not isinstance(r, expected_type):
            out.append(Violation(i, "row", f"expected {expected_type.__name__}, got {type(r).__name__}"))
            continue
        for f, _ in hist_fields:
            h = getattr(r, f)
            if len(h) != widths[f]:
                out.append(Violation(i, f, f"length {len(h)} != {widths[f]}"))
            elif not all(_is_finite_number(v) for v in h):
                out.append(Violation(i, f, "non-finite entry"))
        for f in action_fields:
            a = getattr(r, f)
            if dataset.binary:
                if a not in BINARY_ACTIONS:
                    out.append(Violation(i, f, f"binary action must be -1 or +1, got {a!r}"))
            elif not (isinstance(a, (int, np.integer)) and a >= 1):
                out.append(Violation(i, f, f"multi-treatment action must be an integer >= 1, got {a!r}"))
        for f in ("y", "z"):
            if not _is_finite_number(getattr(r, f)):
                out.append(Violation(i, f, "non-finite outcome"))
    return out
