"""Command-line front end: JSON-config runs, reference-table reproduction
and per-iteration history extraction.

Exit codes: 0 success, 2 configuration error, 3 runtime analysis error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys

import jsonschema
import numpy as np

from . import benchmarks
from .errors import ConfigError, S4isError
from .evaluation import builtin_problem, external_problem
from .probability import Marginal, RandomVector
from .pipeline import (S4isConfig, run_akis_baseline, run_form_baseline,
                       run_mcs_baseline, run_s4is)

_S4IS_FIELDS = {f.name for f in dataclasses.fields(S4isConfig)}

_MARGINAL_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["normal", "lognormal", "uniform"]},
        "mean": {"type": "number"},
        "sd": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["kind", "mean", "sd"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "problem": {
            "type": "object",
            "properties": {
                "builtin": {
                    "type": "object",
                    "properties": {
                        "name": {"enum": ["example1", "example2", "example3",
                                          "example4", "example5"]},
                        "c": {"enum": [3, 4, 5]},
                        "d": {"type": "integer", "minimum": 1},
                    },
                    "required": ["name"],
                    "additionalProperties": False,
                },
                "external": {
                    "type": "object",
                    "properties": {
                        "command": {"type": "array", "minItems": 1,
                                    "items": {"type": "string"}},
                        "marginals": {"type": "array", "minItems": 1,
                                      "items": _MARGINAL_SCHEMA},
                    },
                    "required": ["command", "marginals"],
                    "additionalProperties": False,
                },
            },
            "minProperties": 1,
            "maxProperties": 1,
            "additionalProperties": False,
        },
        "method": {"enum": ["mcs", "form", "akis", "s4is"]},
        "seed": {"type": "integer", "minimum": 0},
        "replicates": {"type": "integer", "minimum": 1},
        "mcs": {
            "type": "object",
            "properties": {"n": {"type": "integer", "minimum": 1}},
            "required": ["n"],
            "additionalProperties": False,
        },
        "s4is": {
            "type": "object",
            "properties": {name: {} for name in sorted(_S4IS_FIELDS)},
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "path": {"type": "string"},
                "format": {"enum": ["json", "csv", "both"]},
            },
            "additionalProperties": False,
        },
    },
    "required": ["problem", "method"],
    "additionalProperties": False,
}


def load_config(path):
    """Read and schema-validate a run config; no performance function is
    touched before this returns."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    validate_config(raw)
    return raw


def validate_config(raw):
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(f"invalid config: {e.message}") from e
    if raw["method"] == "mcs" and "mcs" not in raw:
        raise ConfigError("method 'mcs' requires an 'mcs' block with 'n'")


def _build_problem(cfg):
    block = cfg["problem"]
    if "builtin" in block:
        b = dict(block["builtin"])
        return builtin_problem(b.pop("name"), **b)
    ext = block["external"]
    marginals = RandomVector(tuple(
        Marginal(m["kind"], m["mean"], m["sd"]) for m in ext["marginals"]))
    return external_problem(ext["command"], marginals.dim, marginals)


def _run_one(problem, method, cfg, rng):
    if method == "mcs":
        return run_mcs_baseline(problem, cfg["mcs"]["n"], rng), None
    if method == "form":
        return run_form_baseline(problem, rng), None
    s4cfg = S4isConfig(**cfg.get("s4is", {}))
    if method == "akis":
        return run_akis_baseline(problem, s4cfg, rng), None
    result = run_s4is(problem, s4cfg, rng)
    return result.estimate, result


def build_report(cfg):
    """Execute the configured analysis and assemble the JSON-ready report."""
    problem = _build_problem(cfg)
    method = cfg["method"]
    seed = cfg.get("seed", 0)
    n_rep = cfg.get("replicates", 1)
    rng = np.random.default_rng(seed)
    replicates = []
    for i in range(n_rep):
        est, result = _run_one(problem, method, cfg, rng)
        entry = {"replicate": i, **est.to_dict()}
        if result is not None:
            entry["stages"] = {"stage1": result.stage1.to_dict(),
                               "stage2": result.stage2.to_dict()}
        replicates.append(entry)
    mean_pf = float(np.mean([r["pf"] for r in replicates]))
    covs = [r["cov"] for r in replicates if r["cov"] is not None]
    aggregate = {
        "mean_pf": mean_pf,
        "mean_cov": float(np.mean(covs)) if covs else None,
        "mean_n_eval": float(np.mean([r["n_eval"] for r in replicates])),
    }
    if problem.reference_pf is not None:
        aggregate["reference_pf"] = problem.reference_pf
        aggregate["reference_source"] = problem.reference_source
        aggregate["eps_r"] = abs(problem.reference_pf - mean_pf) / problem.reference_pf
    return {
        "method": method,
        "problem": {"name": problem.name, "dim": problem.dim},
        "seed": seed,
        "replicates": replicates,
        "aggregate": aggregate,
    }


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def report_csv_rows(report):
    """One row per replicate."""
    rows = [("replicate", "pf", "cov", "n_eval", "n_samples")]
    for r in report["replicates"]:
        rows.append((r["replicate"], repr(r["pf"]),
                     "" if r["cov"] is None else repr(r["cov"]),
                     r["n_eval"], r["n_samples"]))
    return rows


def history_rows(report):
    """Tidy per-iteration series: stage, iteration, pf, cov, cumulative
    N_eval — one row per recorded iteration of each stage."""
    rows = [("stage", "iteration", "pf", "cov", "n_eval_cumulative")]
    found = False
    for r in report["replicates"]:
        stages = r.get("stages")
        if not stages:
            continue
        found = True
        for stage_name in ("stage1", "stage2"):
            s = stages[stage_name]
            for i, (pf, cov, n) in enumerate(zip(s["pf_history"],
                                                 s["cov_history"],
                                                 s["n_eval_history"])):
                rows.append((stage_name, i, repr(pf),
                             "" if cov is None else repr(cov), n))
    if not found:
        raise ConfigError("report contains no stage histories "
                          "(only s4is runs record them)")
    return rows


def _write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)


def cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.replicates is not None:
        cfg["replicates"] = args.replicates
    if args.method is not None:
        cfg["method"] = args.method
        validate_config(cfg)
    report = build_report(cfg)
    out = cfg.get("output", {})
    path = args.output or out.get("path")
    fmt = args.format or out.get("format", "json")
    text = report_json(report)
    if path:
        if fmt in ("json", "both"):
            with open(path if fmt == "json" else path + ".json", "w",
                      encoding="utf-8") as fh:
                fh.write(text)
        if fmt in ("csv", "both"):
            _write_csv(path if fmt == "csv" else path + ".csv",
                       report_csv_rows(report))
    else:
        sys.stdout.write(text)
    return 0


def cmd_reproduce(args):
    ids = benchmarks.EXAMPLE_IDS if args.example == "all" else (args.example,)
    failed = False
    for example_id in ids:
        exp = benchmarks.reference_table(example_id, replicates=args.replicates)
        rng = np.random.default_rng(args.seed)
        report = benchmarks.run_experiment(exp, rng)
        print(report.format_table())
        print()
        failed = failed or not report.all_passed
    return 1 if failed else 0


def cmd_history(args):
    try:
        with open(args.report, "r", encoding="utf-8") as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read report {args.report}: {e}") from e
    rows = history_rows(report)
    if args.output:
        _write_csv(args.output, rows)
    else:
        csv.writer(sys.stdout).writerows(rows)
    return 0


def make_parser():
    parser = argparse.ArgumentParser(
        prog="s4is",
        description="Two-stage surrogate-based importance sampling for "
                    "structural reliability analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configured analysis")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--replicates", type=int)
    p_run.add_argument("--method", choices=["mcs", "form", "akis", "s4is"])
    p_run.add_argument("--output")
    p_run.add_argument("--format", choices=["json", "csv", "both"])
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("reproduce",
                           help="re-run a reference comparison table")
    p_rep.add_argument("example",
                       choices=list(benchmarks.EXAMPLE_IDS) + ["all"])
    p_rep.add_argument("--replicates", type=int, default=10)
    p_rep.add_argument("--seed", type=int, default=0)
    p_rep.set_defaults(func=cmd_reproduce)

    p_hist = sub.add_parser("history",
                            help="extract per-iteration pf/CoV series as CSV")
    p_hist.add_argument("report")
    p_hist.add_argument("--output")
    p_hist.set_defaults(func=cmd_history)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except S4isError as e:
        print(f"analysis failed: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
