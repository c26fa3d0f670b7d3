"""Run configuration: a YAML document mapped onto dataclasses.

Unknown keys anywhere in the document are errors. Relative data paths are
resolved against the directory holding the config file.

Schema (``?`` marks optional keys)::

    mode: fit-static | fit-dynamic | simulate | enumerate | validate
    seed?: int                      # default 0
    output_dir?: str                # default "out"
    threads?: int                   # default 1
    labeling_cap?: int              # default 1000000
    stage?: 1 | 2                   # stage used by fit-static / enumerate
    thresholds?: {delta_y: float, delta_z: float}
    data?:
      path: str
      history: [str, ...]
      action: str
      y: str
      z: str
      history2?: [str, ...]
      action2?: str
      action_coding?: {label: int, ...}
      binary?: bool
      derived?:
        <name>: {slope: {columns: [...], times: [...], scale?: float}}
        <name>: {percentile: {column: str, reference: str, complement?: bool, shift?: float}}
    models?:                        # keys: y, z, stage1_y, stage1_z, stage2_y, stage2_z
      <key>: {main: [...], interact: [...], intercept_main?: bool, intercept_interact?: bool}
    queries?: [[float, ...], ...]   # histories at which to evaluate the fitted rule
    tree?: {max_depth?: int, min_leaf?: int}
    simulation?:
      settings?: [int, ...]
      threshold_scale?: float
      delta_grid?: [float, ...]
      policies?: [str, ...]         # e.g. "composite:0.25", "compatible:0.75"
      n_mc?: int
      class_probs_n_mc?: int
      noise_sd?: float
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .core import ModelSpec, Thresholds
from .errors import ConfigError
from .io import Bindings, PercentileOutcome, SlopeOutcome
from .simulation import SETTINGS, PolicySpec, compatible, composite, unrestricted

MODES = ("fit-static", "fit-dynamic", "simulate", "enumerate", "validate")
MODEL_KEYS = ("y", "z", "stage1_y", "stage1_z", "stage2_y", "stage2_z")
DEFAULT_POLICIES = (composite(0.0), composite(0.25), composite(0.5), composite(0.75), composite(1.0),
                    compatible(0.75), unrestricted(0.0), unrestricted(1.0))


@dataclass(frozen=True)
class ModelConfig:
    main: tuple[str, ...] = ()
    interact: tuple[str, ...] = ()
    intercept_main: bool = True
    intercept_interact: bool = True

    def to_spec(self, column_names) -> ModelSpec:
        try:
            return ModelSpec.from_names(column_names, self.main, self.interact,
                                        self.intercept_main, self.intercept_interact)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None


@dataclass(frozen=True)
class DataConfig:
    path: Path
    bindings: Bindings


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 3
    min_leaf: int = 1


@dataclass(frozen=True)
class SimulationConfig:
    settings: tuple[int, ...] = (1, 2, 3)
    threshold_scale: float = 1.0
    delta_grid: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    policies: tuple[PolicySpec, ...] = DEFAULT_POLICIES
    n_mc: int = 100_000
    class_probs_n_mc: int = 1_000_000
    noise_sd: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    mode: str
    seed: int = 0
    output_dir: Path = Path("out")
    threads: int = 1
    labeling_cap: int = 1_000_000
    stage: int = 1
    thresholds: Thresholds | None = None
    data: DataConfig | None = None
    models: dict[str, ModelConfig] = field(default_factory=dict)
    queries: tuple[tuple[float, ...], ...] = ()
    tree: TreeConfig | None = None
    simulation: SimulationConfig | None = None

    def with_overrides(self, seed=None, output_dir=None, threads=None, labeling_cap=None) -> "RunConfig":
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = _nonneg_int(seed, "seed")
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        if threads is not None:
            changes["threads"] = _pos_int(threads, "threads")
        if labeling_cap is not None:
            changes["labeling_cap"] = _pos_int(labeling_cap, "labeling_cap")
        return dataclasses.replace(self, **changes)

    def model(self, key: str) -> ModelConfig:
        if key not in self.models:
            raise ConfigError(f"mode {self.mode} needs models.{key}")
        return self.models[key]

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"mode {self.mode} needs a '{name}' section")


def _check_keys(mapping, allowed, where, required=()):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(mapping).__name__}")
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; allowed {sorted(allowed)}")
    absent = [k for k in required if k not in mapping]
    if absent:
        raise ConfigError(f"{where}: missing required keys {absent}")


def _str_list(v, where) -> tuple[str, ...]:
    if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
        raise ConfigError(f"{where}: expected a list of column names")
    return tuple(v)


def _float(v, where) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _bool(v, where) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{where}: expected true/false, got {v!r}")
    return v


def _int(v, where) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}: expected an integer, got {v!r}")
    return v


def _pos_int(v, where) -> int:
    v = _int(v, where)
    if v < 1:
        raise ConfigError(f"{where}: must be positive")
    return v


def _nonneg_int(v, where) -> int:
    v = _int(v, where)
    if v < 0 or v >= 2**64:
        raise ConfigError(f"{where}: must be an unsigned 64-bit integer")
    return v


def _thresholds(d) -> Thresholds:
    _check_keys(d, ("delta_y", "delta_z"), "thresholds", required=("delta_y", "delta_z"))
    try:
        return Thresholds(_float(d["delta_y"], "thresholds.delta_y"), _float(d["delta_z"], "thresholds.delta_z"))
    except ValueError as exc:
        raise ConfigError(f"thresholds: {exc}") from None


def _derived(name, d):
    where = f"data.derived.{name}"
    if not isinstance(d, dict) or len(d) != 1:
        raise ConfigError(f"{where}: expected exactly one of 'slope' or 'percentile'")
    (kind, body), = d.items()
    if kind == "slope":
        _check_keys(body, ("columns", "times", "scale"), f"{where}.slope", required=("columns", "times"))
        cols = _str_list(body["columns"], f"{where}.slope.columns")
        times = tuple(_float(t, f"{where}.slope.times") for t in body["times"])
        if len(cols) != len(times):
            raise ConfigError(f"{where}.slope: columns and times differ in length")
        return SlopeOutcome(cols, times, _float(body.get("scale", 1.0), f"{where}.slope.scale"))
    if kind == "percentile":
        _check_keys(body, ("column", "reference", "complement", "shift"), f"{where}.percentile",
                    required=("column", "reference"))
        return PercentileOutcome(str(body["column"]), str(body["reference"]),
                                 _bool(body.get("complement", True), f"{where}.percentile.complement"),
                                 _float(body.get("shift", 0.0), f"{where}.percentile.shift"))
    raise ConfigError(f"{where}: unknown derived outcome kind {kind!r}")


def _data(d, base: Path) -> DataConfig:
    keys = ("path", "history", "action", "y", "z", "history2", "action2", "action_coding", "binary", "derived")
    _check_keys(d, keys, "data", required=("path", "history", "action", "y", "z"))
    coding = d.get("action_coding")
    if coding is not None:
        if not isinstance(coding, dict):
            raise ConfigError("data.action_coding: expected a mapping")
        coding = {str(k): _int(v, f"data.action_coding.{k}") for k, v in coding.items()}
    derived = d.get("derived") or {}
    if not isinstance(derived, dict):
        raise ConfigError("data.derived: expected a mapping")
    if ("history2" in d) != ("action2" in d):
        raise ConfigError("data: history2 and action2 must be given together")
    bindings = Bindings(
        history=_str_list(d["history"], "data.history"),
        action=str(d["action"]), y=str(d["y"]), z=str(d["z"]),
        history2=_str_list(d.get("history2", []), "data.history2"),
        action2=str(d["action2"]) if "action2" in d else None,
        action_coding=coding,
        derived={str(k): _derived(k, v) for k, v in derived.items()},
        binary=_bool(d.get("binary", True), "data.binary"),
    )
    path = Path(str(d["path"]))
    if not path.is_absolute():
        path = base / path
    return DataConfig(path, bindings)


def _model(key, d) -> ModelConfig:
    where = f"models.{key}"
    _check_keys(d, ("main", "interact", "intercept_main", "intercept_interact"), where)
    return ModelConfig(_str_list(d.get("main", []), f"{where}.main"),
                       _str_list(d.get("interact", []), f"{where}.interact"),
                       _bool(d.get("intercept_main", True), f"{where}.intercept_main"),
                       _bool(d.get("intercept_interact", True), f"{where}.intercept_interact"))


def _simulation(d) -> SimulationConfig:
    keys = [f.name for f in dataclasses.fields(SimulationConfig)]
    _check_keys(d, keys, "simulation")
    out: dict[str, Any] = {}
    if "settings" in d:
        settings = tuple(_int(s, "simulation.settings") for s in d["settings"])
        bad = [s for s in settings if s not in SETTINGS]
        if bad or not settings:
            raise ConfigError(f"simulation.settings: unknown settings {bad}; known {sorted(SETTINGS)}")
        out["settings"] = settings
    if "threshold_scale" in d:
        out["threshold_scale"] = _float(d["threshold_scale"], "simulation.threshold_scale")
        if out["threshold_scale"] <= 0:
            raise ConfigError("simulation.threshold_scale: must be positive")
    if "delta_grid" in d:
        grid = tuple(_float(x, "simulation.delta_grid") for x in d["delta_grid"])
        if not grid or any(not 0.0 <= x <= 1.0 for x in grid):
            raise ConfigError("simulation.delta_grid: need a nonempty list of values in [0, 1]")
        out["delta_grid"] = grid
    if "policies" in d:
        try:
            out["policies"] = tuple(PolicySpec.parse(str(p)) for p in d["policies"])
        except ValueError as exc:
            raise ConfigError(f"simulation.policies: {exc}") from None
    for k in ("n_mc", "class_probs_n_mc"):
        if k in d:
            out[k] = _pos_int(d[k], f"simulation.{k}")
    if "noise_sd" in d:
        out["noise_sd"] = _float(d["noise_sd"], "simulation.noise_sd")
        if out["noise_sd"] < 0:
            raise ConfigError("simulation.noise_sd: must be nonnegative")
    return SimulationConfig(**out)


def parse_config(doc: dict, base: Path = Path(".")) -> RunConfig:
    top = [f.name for f in dataclasses.fields(RunConfig)]
    _check_keys(doc, top, "config", required=("mode",))
    mode = doc["mode"]
    if mode not in MODES:
        raise ConfigError(f"config.mode: {mode!r} is not one of {list(MODES)}")
    kw: dict[str, Any] = {"mode": mode}
    if "seed" in doc:
        kw["seed"] = _nonneg_int(doc["seed"], "seed")
    if "output_dir" in doc:
        kw["output_dir"] = Path(str(doc["output_dir"]))
    if "threads" in doc:
        kw["threads"] = _pos_int(doc["threads"], "threads")
    if "labeling_cap" in doc:
        kw["labeling_cap"] = _pos_int(doc["labeling_cap"], "labeling_cap")
    if "stage" in doc:
        kw["stage"] = _int(doc["stage"], "stage")
        if kw["stage"] not in (1, 2):
            raise ConfigError("stage: must be 1 or 2")
    if "thresholds" in doc:
        kw["thresholds"] = _thresholds(doc["thresholds"])
    if "data" in doc:
        kw["data"] = _data(doc["data"], base)
    if "models" in doc:
        models = doc["models"]
        _check_keys(models, MODEL_KEYS, "models")
        kw["models"] = {k: _model(k, v) for k, v in models.items()}
    if "queries" in doc:
        q = doc["queries"]
        if not isinstance(q, list) or not all(isinstance(r, list) for r in q):
            raise ConfigError("queries: expected a list of history vectors")
        kw["queries"] = tuple(tuple(_float(x, "queries") for x in r) for r in q)
    if "tree" in doc:
        t = doc["tree"] or {}
        _check_keys(t, ("max_depth", "min_leaf"), "tree")
        kw["tree"] = TreeConfig(_pos_int(t.get("max_depth", 3), "tree.max_depth"),
                                _pos_int(t.get("min_leaf", 1), "tree.min_leaf"))
    if "simulation" in doc:
        kw["simulation"] = _simulation(doc["simulation"] or {})
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if doc is None:
        raise ConfigError(f"{path}: empty config")
    return parse_config(doc, path.parent)
