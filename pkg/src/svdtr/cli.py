"""Command-line entry point.

Every subcommand reads a YAML run config (see ``svdtr.config``), writes its
artifacts into the output directory and exits with

    0 success, 2 config error, 3 data error, 4 numerical failure, 5 budget exceeded.

Failures print a one-line JSON error report on stderr and, when the output
directory exists, also write it to ``error.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .core import Dataset, validate
from .dynamic_rule import estimate_two_stage, union_rule, write_trace
from .enumeration import enumerate_feasible, write_labeling_dump
from .errors import (BudgetExceeded, ConfigError, DataError, NumericalFailure, ParseError, RankDeficient,
                     SvdtrError)
from .io import export_region_diagram, load_csv
from .regression import format_coefficient_table
from .simulation import SETTINGS, class_probs, preference_sweep, setting_params, write_sweep
from .static_rule import apply_rule_with_label, estimate_static_rule
from .tree import tree_approx

log = logging.getLogger("svdtr")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_BUDGET = 5


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load(cfg: RunConfig) -> tuple[Dataset, dict]:
    cfg.require("data")
    if not cfg.data.path.exists():
        raise ConfigError(f"data file {cfg.data.path} does not exist")
    ds, report = load_csv(cfg.data.path, cfg.data.bindings)
    problems = validate(ds)
    if problems:
        raise DataError(f"{len(problems)} invalid rows, first: {problems[0]}")
    info = {"n_read": report.n_read, "n_kept": report.n_kept, "dropped": report.dropped,
            "dropped_lines": list(report.dropped_rows)}
    log.info("loaded %d of %d rows from %s", report.n_kept, report.n_read, cfg.data.path)
    return ds, info


def _names(ds: Dataset, stage: int):
    if stage == 2 and ds.stage_count != 2:
        raise ConfigError("stage 2 requested on a one-stage dataset")
    return ds.column_names if stage == 1 else ds.column_names2


def _check_queries(cfg: RunConfig, width: int) -> np.ndarray:
    bad = [k for k, q in enumerate(cfg.queries) if len(q) != width]
    if bad:
        raise ConfigError(f"queries {bad} do not have {width} entries")
    return np.array(cfg.queries, dtype=float).reshape(len(cfg.queries), width)


def run_fit_static(cfg: RunConfig) -> dict:
    cfg.require("thresholds")
    ds, info = _load(cfg)
    names = _names(ds, cfg.stage)
    spec_y = cfg.model("y").to_spec(names)
    spec_z = cfg.model("z").to_spec(names)
    rule = estimate_static_rule(ds, spec_y, spec_z, cfg.thresholds, stage=cfg.stage)
    out = cfg.output_dir
    _write_text(out / "coef_y.txt", format_coefficient_table(rule.model_y, "Outcome Y"))
    _write_text(out / "coef_z.txt", format_coefficient_table(rule.model_z, "Outcome Z"))
    H, _ = ds.stage_arrays(cfg.stage)
    r_y, r_z = rule.contrasts(H)
    meta = export_region_diagram(zip(r_y, r_z), cfg.thresholds, out / "region_diagram.txt")

    summary = {"mode": cfg.mode, "stage": cfg.stage, "data": info, "region_counts": meta["region_counts"]}
    if cfg.queries:
        Q = _check_queries(cfg, len(names))
        lines = ["# query set region r_y r_z"]
        q_y, q_z = rule.contrasts(Q)
        for k, h in enumerate(Q):
            s, lab = apply_rule_with_label(rule, h)
            lines.append(f"{k} {s} {lab} {q_y[k]:.12g} {q_z[k]:.12g}")
        _write_text(out / "queries.txt", "\n".join(lines) + "\n")
    if cfg.tree is not None:
        tree, agreement = tree_approx(rule, H, cfg.tree.max_depth, cfg.tree.min_leaf)
        _write_text(out / "tree.txt", tree.render(names))
        _write_json(out / "tree.json", {"agreement": agreement, "tree": tree.to_dict()})
        summary["tree_agreement"] = agreement
    return summary


def run_fit_dynamic(cfg: RunConfig) -> dict:
    cfg.require("thresholds")
    ds, info = _load(cfg)
    if ds.stage_count != 2:
        raise ConfigError("fit-dynamic needs two-stage data bindings (history2, action2)")
    n1, n2 = ds.column_names, ds.column_names2
    specs = [cfg.model(k).to_spec(n2 if k.startswith("stage2") else n1)
             for k in ("stage2_y", "stage2_z", "stage1_y", "stage1_z")]
    fit = estimate_two_stage(ds, *specs, cfg.thresholds, cap=cfg.labeling_cap, threads=cfg.threads,
                             diagnostics=False)
    stage2 = fit.rule.stage2
    out = cfg.output_dir
    _write_text(out / "stage2_coef_y.txt", format_coefficient_table(stage2.model_y, "Stage 2, outcome Y"))
    _write_text(out / "stage2_coef_z.txt", format_coefficient_table(stage2.model_z, "Stage 2, outcome Z"))
    r_y, r_z = stage2.contrasts(ds.H2)
    meta = export_region_diagram(zip(r_y, r_z), cfg.thresholds, out / "stage2_region_diagram.txt")
    write_labeling_dump(fit.labelings, out / "labelings.txt")

    coef_lines = []
    for k, b in enumerate(fit.rule.bundles):
        for tag, m in (("y", b.model_1y), ("z", b.model_1z)):
            coef_lines.append(f"{k} {tag} " + " ".join(f"{v:.12g}" for v in m.coefficients))
    _write_text(out / "stage1_coefficients.txt", "# bundle outcome coefficients\n" + "\n".join(coef_lines) + "\n")

    union_lines = ["# query set"]
    if cfg.queries:
        Q = _check_queries(cfg, len(n1))
        for k, h in enumerate(Q):
            s, trace = union_rule(fit.rule, h)
            write_trace(trace, out / f"stage1_trace_q{k}.txt")
            union_lines.append(f"{k} {s}")
    _write_text(out / "union.txt", "\n".join(union_lines) + "\n")

    codes = stage2.codes(ds.H2)
    return {
        "mode": cfg.mode, "data": info, "stage2_region_counts": meta["region_counts"],
        "ambiguous_stage2": int((codes == 0).sum()),
        "feasible_labelings": len(fit.labelings),
        "distinct_stage1_fits": len(fit.rule._distinct),
        "canonical_zero_score_points": list(fit.canonical_zero_points),
    }


def run_enumerate(cfg: RunConfig) -> dict:
    cfg.require("thresholds")
    ds, info = _load(cfg)
    names = _names(ds, cfg.stage)
    ky, kz = ("stage2_y", "stage2_z") if cfg.stage == 2 else ("y", "z")
    rule = estimate_static_rule(ds, cfg.model(ky).to_spec(names), cfg.model(kz).to_spec(names),
                                cfg.thresholds, stage=cfg.stage)
    H, _ = ds.stage_arrays(cfg.stage)
    labelings = enumerate_feasible(rule, H, cap=cfg.labeling_cap, threads=cfg.threads)
    write_labeling_dump(labelings, cfg.output_dir / "labelings.txt")
    codes = rule.codes(H)
    return {"mode": cfg.mode, "stage": cfg.stage, "data": info, "ambiguous": int((codes == 0).sum()),
            "feasible_labelings": len(labelings)}


def run_simulate(cfg: RunConfig) -> dict:
    cfg.require("simulation")
    sim = cfg.simulation
    out = cfg.output_dir
    lines = ["setting,uniq,null,opst,target_uniq,target_null,target_opst,n"]
    for s in sim.settings:
        params = setting_params(s, sim.threshold_scale)
        cp = class_probs(params, sim.class_probs_n_mc, seed=cfg.seed, threads=cfg.threads)
        t = SETTINGS[s]["target"]
        lines.append(f"{s},{cp.uniq:.12g},{cp.null:.12g},{cp.opst:.12g},{t[0]:g},{t[1]:g},{t[2]:g},{cp.n}")
        rows = preference_sweep(params, sim.policies, sim.delta_grid, sim.n_mc, seed=cfg.seed,
                                threads=cfg.threads, noise_sd=sim.noise_sd)
        write_sweep(rows, out / f"sweep_setting{s}.csv")
    _write_text(out / "class_probs.csv", "\n".join(lines) + "\n")
    return {"mode": cfg.mode, "settings": list(sim.settings), "policies": [p.name for p in sim.policies],
            "delta_grid": list(sim.delta_grid), "n_mc": sim.n_mc, "seed": cfg.seed}


def run_validate(cfg: RunConfig) -> dict:
    cfg.require("data")
    if not cfg.data.path.exists():
        raise ConfigError(f"data file {cfg.data.path} does not exist")
    ds, report = load_csv(cfg.data.path, cfg.data.bindings)
    problems = validate(ds)
    _write_text(cfg.output_dir / "violations.txt", "".join(f"{p}\n" for p in problems))
    summary = {"mode": cfg.mode, "n_read": report.n_read, "n_kept": report.n_kept,
               "dropped_lines": list(report.dropped_rows), "violations": len(problems)}
    if problems:
        raise DataError(f"{len(problems)} invalid rows, first: {problems[0]}")
    return summary


RUNNERS = {
    "fit-static": run_fit_static,
    "fit-dynamic": run_fit_dynamic,
    "enumerate": run_enumerate,
    "simulate": run_simulate,
    "validate": run_validate,
}


def run(cfg: RunConfig) -> dict:
    """Execute one configured run and return its summary (also written to summary.json)."""
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    summary = RUNNERS[cfg.mode](cfg)
    _write_json(cfg.output_dir / "summary.json", summary)
    return summary


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, BudgetExceeded):
        return EXIT_BUDGET
    if isinstance(exc, (NumericalFailure, RankDeficient)):
        return EXIT_NUMERICAL
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    # data errors and anything else a well-formed config can still trigger on bad input
    return EXIT_DATA


def error_report(exc: BaseException) -> dict:
    report = {"error": type(exc).__name__, "message": str(exc), "exit_code": exit_code(exc)}
    if isinstance(exc, ParseError):
        report.update(path=exc.path, line=exc.line, column=exc.column)
    elif isinstance(exc, BudgetExceeded):
        report.update(cap=exc.cap, found=exc.found)
    elif isinstance(exc, RankDeficient):
        report.update(rank=exc.rank, ncols=exc.ncols)
    elif isinstance(exc, NumericalFailure) and exc.partial_assignment is not None:
        report["partial_assignment"] = [int(v) for v in exc.partial_assignment]
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svdtr", description="Set-valued treatment regimes for two outcomes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name, help=f"run in {name} mode")
        p.add_argument("--config", required=True, help="YAML run config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--threads", type=int, help="worker threads for enumeration and Monte Carlo")
        p.add_argument("--labeling-cap", type=int, help="abort enumeration above this many labelings")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = None
    try:
        cfg = load_config(args.config)
        if cfg.mode != args.command:
            raise ConfigError(f"config mode {cfg.mode!r} does not match subcommand {args.command!r}")
        cfg = cfg.with_overrides(args.seed, args.out, args.threads, args.labeling_cap)
        summary = run(cfg)
    except (SvdtrError, ValueError) as exc:
        report = error_report(exc)
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
        if cfg is not None and cfg.output_dir.is_dir():
            _write_json(cfg.output_dir / "error.json", report)
        return report["exit_code"]
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
