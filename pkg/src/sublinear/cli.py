"""Command-line entry point.

Each subcommand reads a scenario (or a manifest from an earlier run), runs
its checks and writes three files into the output directory:

* ``<subcommand>.json``  structured report, validated against a JSON schema,
* ``<subcommand>.csv``   flat table with reals printed to 17 significant digits,
* ``manifest.json``      everything needed to replay the run.

Exit status is 0 when no assertion is violated, 1 on a violation and 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .capacity import CapacityPair, Event, check_capacity_subadditivity, choquet_integral
from .core import AXIOMS, TOL, check_axioms, lower_expectation, upper_expectation
from .inequalities import (fuzz_chebyshev, fuzz_cr, fuzz_holder, fuzz_jensen,
                           fuzz_positive_part, rosenthal_sweep, verify_chebyshev,
                           verify_holder, verify_jensen)
from .scenario import Scenario, ScenarioError, from_document, load
from .series import three_series_check
from .slln import DEFAULT_CHECKPOINTS, SllnConfig, choquet_moment, marcinkiewicz_check

OUT_ENV = "SUBLINEAR_OUT"
DEFAULT_OUT = "sublinear-out"
EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2

SUBCOMMANDS = ("axioms", "choquet", "inequalities", "rosenthal", "three-series", "slln")


class Result:
    """Outcome of one subcommand: report body, table and violation count."""

    def __init__(self, results: dict, header: list[str], rows: list[list], violations: int):
        self.results = results
        self.header = header
        self.rows = rows
        self.violations = violations


# ---------------------------------------------------------------------------
# Subcommands

def run_axioms(sc: Scenario, threads: int) -> Result:
    report = check_axioms(sc.family, sc.param("trials"), seed=sc.seed)
    sub = check_capacity_subadditivity(CapacityPair(sc.family), sc.param("exhaustive_max"),
                                       seed=sc.seed)
    counts = report.counts()
    results = {
        "trials": report.trials,
        "checks": report.checks,
        "axiom_violations": counts,
        "witnesses": [{"axiom": v.axiom, "excess": v.excess, **v.witness}
                      for v in report.violations[:20]],
        "subadditivity": {
            "mode": sub.mode, "pairs": sub.pairs,
            "upper_violations": len(sub.upper_violations),
            "mixed_violations": len(sub.mixed_violations),
            "lower_capacity_witness": sub.lower_witness,
        },
    }
    rows = [[a, report.trials, counts.get(a, 0)] for a in AXIOMS]
    rows += [["capacity_subadditivity", sub.pairs, len(sub.upper_violations)],
             ["mixed_subadditivity", sub.pairs, len(sub.mixed_violations)]]
    violations = len(report.violations) + len(sub.upper_violations) + len(sub.mixed_violations)
    return Result(results, ["check", "cases", "violations"], rows, violations)


def run_choquet(sc: Scenario, threads: int) -> Result:
    pair = CapacityPair(sc.family)
    x = sc.variable.values
    n = sc.family.n_outcomes
    results = {
        "upper_expectation": upper_expectation(sc.family, x),
        "lower_expectation": lower_expectation(sc.family, x),
        "choquet_upper": choquet_integral(pair, x, "upper").value,
        "choquet_lower": choquet_integral(pair, x, "lower").value,
        "singleton_capacities": [
            {"outcome": o, "upper": pair.upper(Event.of(n, [i])), "lower": pair.lower(Event.of(n, [i]))}
            for i, o in enumerate(sc.outcomes)],
        "moments": [],
    }
    violations = 0
    # Choquet integrals bracket the envelope expectations.
    if results["upper_expectation"] > results["choquet_upper"] + TOL:
        violations += 1
    if results["lower_expectation"] < results["choquet_lower"] - TOL:
        violations += 1
    rows = []
    for p in sc.param("moments"):
        cm = choquet_moment(sc.family, x, p)
        um = upper_expectation(sc.family, np.abs(x) ** p)
        ok = um <= cm + TOL * max(1.0, abs(cm))
        violations += not ok
        results["moments"].append({"p": p, "choquet_moment": cm, "upper_moment": um, "ok": ok})
        rows.append([p, cm, um, int(ok)])
    return Result(results, ["p", "choquet_moment", "upper_moment", "ok"], rows, violations)


def run_inequalities(sc: Scenario, threads: int) -> Result:
    instances = sc.param("fuzz_instances")
    fuzz = [f(instances, seed=sc.seed) for f in
            (fuzz_holder, fuzz_chebyshev, fuzz_jensen, fuzz_cr, fuzz_positive_part)]
    x = sc.variable.values
    fam = sc.family
    scale = float(np.max(np.abs(x)))
    local = [verify_holder(fam, x, np.abs(x) + 1.0, p) for p in (1.5, 2.0, 3.0)]
    local += [verify_jensen(fam, x, f) for f in (np.square, np.abs, np.exp)]
    if scale > 0:
        local += [verify_chebyshev(fam, x, np.exp, scale / 2),
                  verify_chebyshev(fam, x, lambda t: 1.0 + t * t, scale / 2, form="abs")]
    results = {
        "fuzz": [{"name": r.name, "instances": r.instances, "violations": r.violations,
                  "worst_excess": r.worst_excess, "witness": r.witness} for r in fuzz],
        "scenario_checks": [{"name": r.name, "lhs": r.lhs, "rhs": r.rhs, "holds": r.holds}
                            for r in local],
    }
    rows = [[r.name, r.instances, r.violations, r.worst_excess] for r in fuzz]
    rows += [[f"scenario-{r.name}", 1, int(not r.holds), r.lhs - r.rhs] for r in local]
    violations = sum(r.violations for r in fuzz) + sum(not r.holds for r in local)
    return Result(results, ["check", "instances", "violations", "worst_excess"], rows, violations)


def run_rosenthal(sc: Scenario, threads: int) -> Result:
    report = rosenthal_sweep(sc.param("supports"), sc.param("prob_grid"), sc.param("max_length"),
                             sc.param("exponents"), workers=threads)
    gap_ok = report.max_enumeration_gap <= 1e-10
    results = {
        "sequences": report.sequences, "cases": report.cases,
        "violation_count": report.violation_count, "violations": report.violations,
        "max_enumeration_gap": report.max_enumeration_gap,
        "min_slack_ratio": report.min_slack_ratio, "tightest": report.tightest,
        "per_exponent": {str(p): c for p, c in sorted(report.per_exponent.items())},
    }
    rows = [[p, c] for p, c in sorted(report.per_exponent.items())]
    return Result(results, ["p", "cases"], rows, report.violation_count + (not gap_ok))


def run_three_series(sc: Scenario, threads: int) -> Result:
    diag = three_series_check(sc.sequence(), c=sc.param("c"), q=sc.param("q"),
                              eps=sc.param("eps"), window=sc.param("window"))
    names = list(diag.partial_sums)
    results = {
        "overall": diag.overall, "verdicts": diag.verdicts, "checks": diag.checks,
        "final_partial_sums": {k: float(v[-1]) for k, v in diag.partial_sums.items()},
        "expect": sc.param("expect"),
    }
    violations = sum(not ok for ok in diag.checks.values())
    expect = sc.param("expect")
    if expect is not None and diag.overall != f"criterion-{expect}":
        violations += 1
    cols = np.column_stack([diag.partial_sums[k] for k in names])
    rows = [[n, *row] for n, row in enumerate(cols.tolist(), start=1)]
    return Result(results, ["n", *names], rows, violations)


def run_slln(sc: Scenario, threads: int) -> Result:
    # checkpoints beyond an overridden horizon are dropped; the used ones are reported
    checkpoints = [c for c in sc.param("checkpoints") or DEFAULT_CHECKPOINTS if c <= sc.horizon]
    if not checkpoints:
        raise ValueError(f"horizon {sc.horizon} is below the first checkpoint")
    config = SllnConfig(replicates=sc.param("replicates"), horizon=sc.horizon,
                        checkpoints=tuple(checkpoints), threshold=sc.param("threshold"),
                        ratio_bound=sc.param("ratio_bound"), seed=sc.seed)
    out = marcinkiewicz_check(sc.sequence(decay=0), sc.param("p"), sc.param("mu"), config)
    rep = out.report
    hypotheses = dict(out.hypotheses)
    if "tail_expectations" in hypotheses:
        hypotheses["tail_expectations"] = [
            {"a": a, "value": v} for a, v in hypotheses["tail_expectations"].items()]
    results = {"verdict": out.verdict, "final_max": out.final_max,
               "scaling_ratios": out.scaling_ratios, "hypotheses": hypotheses,
               "note": out.note, "report": rep.to_dict()}
    rows = []
    for name in rep.values:
        q = rep.quantiles(name)
        for j, n in enumerate(rep.checkpoints):
            rows.append([name, n, q["median"][j], q["q90"][j], q["max"][j]])
    return Result(results, ["strategy", "n", "median", "q90", "max"], rows,
                  int(not out.consistent))


RUNNERS = {
    "axioms": run_axioms,
    "choquet": run_choquet,
    "inequalities": run_inequalities,
    "rosenthal": run_rosenthal,
    "three-series": run_three_series,
    "slln": run_slln,
}


# ---------------------------------------------------------------------------
# Output

REPORT_SCHEMA = {
    "type": "object",
    "required": ["subcommand", "scenario", "seed", "version", "status", "violations", "results"],
    "properties": {
        "subcommand": {"enum": list(SUBCOMMANDS)},
        "scenario": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "version": {"type": "string"},
        "status": {"enum": ["ok", "violation"]},
        "violations": {"type": "integer", "minimum": 0},
        "results": {"type": "object"},
    },
}

RESULT_SCHEMAS = {
    "axioms": {"required": ["trials", "checks", "axiom_violations", "subadditivity"]},
    "choquet": {"required": ["upper_expectation", "lower_expectation", "choquet_upper",
                             "choquet_lower", "moments"]},
    "inequalities": {"required": ["fuzz", "scenario_checks"]},
    "rosenthal": {"required": ["sequences", "cases", "violation_count", "max_enumeration_gap"]},
    "three-series": {"required": ["overall", "verdicts", "checks"],
                     "properties": {"overall": {"enum": ["criterion-satisfied",
                                                         "criterion-not-satisfied"]}}},
    "slln": {"required": ["verdict", "final_max", "scaling_ratios", "report"]},
}

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["tool", "version", "subcommand", "scenario", "seed", "overrides", "outputs"],
    "properties": {
        "tool": {"const": "sublinear"},
        "subcommand": {"enum": [*SUBCOMMANDS, "all"]},
        "scenario": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
        "overrides": {"type": "object"},
        "outputs": {"type": "object"},
    },
}


def report_schema(subcommand: str) -> dict:
    schema = json.loads(json.dumps(REPORT_SCHEMA))
    schema["properties"]["results"].update(RESULT_SCHEMAS[subcommand])
    return schema


def _jsonable(obj):
    """Convert numpy scalars and arrays to plain JSON; non-finite reals become strings."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def format_table(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([_cell(v) for v in row] for row in rows)
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return __version__


# ---------------------------------------------------------------------------
# Driver

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sublinear",
        description="Checks for sub-linear expectations on finite outcome spaces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in (*SUBCOMMANDS, "all"):
        p = sub.add_parser(name, help=f"run the {name} checks" if name != "all" else "run every check")
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--scenario", type=Path, help="scenario YAML file")
        src.add_argument("--manifest", type=Path, help="replay the scenario and overrides of a manifest")
        p.add_argument("--out", type=Path, default=None,
                       help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--horizon", type=int, default=None, help="override the sequence horizon")
        p.add_argument("--threads", type=int, default=None, help="worker processes for sweeps")
    return parser


def _load(args) -> tuple[Scenario, dict]:
    """Scenario with overrides applied, and the overrides to record."""
    overrides = {"seed": args.seed, "horizon": args.horizon, "threads": args.threads}
    if args.manifest is not None:
        try:
            manifest = json.loads(args.manifest.read_text())
            jsonschema.validate(manifest, MANIFEST_SCHEMA)
        except (OSError, json.JSONDecodeError, jsonschema.ValidationError) as exc:
            raise ScenarioError(f"invalid manifest: {exc}", None, str(args.manifest)) from None
        recorded = manifest["overrides"]
        for key, value in overrides.items():
            if value is None:
                overrides[key] = recorded.get(key)
        scenario = from_document(manifest["scenario"], source=str(args.manifest))
        scenario_path = manifest.get("scenario_path")
    else:
        scenario = load(args.scenario)
        scenario_path = str(args.scenario)
    if overrides["seed"] is not None and not 0 <= overrides["seed"] < 2**64:
        raise ScenarioError(f"--seed must lie in [0, 2^64), got {overrides['seed']}")
    if overrides["horizon"] is not None and overrides["horizon"] < 1:
        raise ScenarioError(f"--horizon must be positive, got {overrides['horizon']}")
    if overrides["threads"] is not None and overrides["threads"] < 1:
        raise ScenarioError(f"--threads must be positive, got {overrides['threads']}")
    scenario = scenario.with_overrides(overrides["seed"], overrides["horizon"])
    return scenario, {"overrides": overrides, "scenario_path": scenario_path}


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario, context = _load(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or Path(os.environ.get(OUT_ENV, DEFAULT_OUT))
    threads = context["overrides"]["threads"] or 1
    names = SUBCOMMANDS if args.subcommand == "all" else (args.subcommand,)
    version = tool_version()

    files: dict[str, str] = {}
    total = 0
    for name in names:
        try:
            result = RUNNERS[name](scenario, threads)
        except ValueError as exc:
            print(f"error: {name}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        report = _jsonable({
            "subcommand": name, "scenario": scenario.name, "seed": scenario.seed,
            "version": version, "status": "violation" if result.violations else "ok",
            "violations": result.violations, "results": result.results,
        })
        jsonschema.validate(report, report_schema(name))
        files[f"{name}.json"] = _dump(report)
        files[f"{name}.csv"] = format_table(result.header, result.rows)
        total += result.violations
        status = "ok" if not result.violations else f"{result.violations} violation(s)"
        print(f"{name}: {status}")

    manifest = _jsonable({
        "tool": "sublinear", "version": version, "subcommand": args.subcommand,
        "scenario": scenario.document, "scenario_path": context["scenario_path"],
        "seed": scenario.seed, "overrides": context["overrides"],
        "outputs": {k: hashlib.sha256(v.encode()).hexdigest() for k, v in sorted(files.items())},
    })
    jsonschema.validate(manifest, MANIFEST_SCHEMA)
    files["manifest.json"] = _dump(manifest)

    # Single writer at the end of the run.
    out.mkdir(parents=True, exist_ok=True)
    for fname, text in files.items():
        (out / fname).write_text(text)
    print(f"wrote {len(files)} files to {out}")
    return EXIT_VIOLATION if total else EXIT_OK


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
