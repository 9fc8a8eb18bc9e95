"""Command-line front end.

Subcommands: build, evaluate, optimize, simulate, adversarial, verify,
pipeline.  JSON is the canonical output (schema version "v1", keys
sorted, optional timestamp suppressed by --no-timestamp so identical
configs and seeds give byte-identical reports); CSV is available only
for the per-level table of evaluate.  Exit codes: 0 success, 1 a
verification check failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
import warnings
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .functionals import (
    classify_good_indices,
    dyadic_bound,
    evaluate_functionals,
    filtered_bound,
    good_children,
    strong_functional,
    weak_functional,
)
from .optimize import (
    OptimizerOptions,
    duality_gap_report,
    maximize_weak,
    minimize_strong,
)
from .processes import (
    AdversarialSampler,
    OrthonormalGenerator,
    bridge_to_orthogonal,
    build_skeleton_variables,
    lower_bound_report,
    s_skeleton,
    second_moment_oracle,
    simulate_sup_square,
    verify_chaining_bound,
)
from .series import (
    CoefficientSequence,
    DiscreteMeasure,
    DomainError,
    InvalidCoefficientError,
    InvalidMeasureError,
    build_index_set,
    build_partition,
    make_measure,
)

SCHEMA = "v1"
DEFAULT_COEFFS = '{"kind": "power", "exponent": 1.0, "count": 64}'
SUITES = ("skeleton", "lemma4", "bridge", "chaining", "lowerbound",
          "inequalities", "all")


class CLIError(Exception):
    """Configuration or input problem; maps to exit code 2."""


# ---------------------------------------------------------------------------
# input parsing


def _load_json_arg(text: str, what: str):
    """Inline JSON when the argument looks like it, else a file path."""
    s = text.strip()
    if s.startswith(("{", "[")):
        try:
            return json.loads(s)
        except json.JSONDecodeError as exc:
            raise CLIError(f"invalid inline JSON for {what}: {exc}")
    try:
        with open(text, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CLIError(f"{what} file not found: {text}")
    except json.JSONDecodeError as exc:
        raise CLIError(f"invalid JSON in {what} file {text}: {exc}")


def _parse_coeffs(arg: str) -> CoefficientSequence:
    obj = _load_json_arg(arg, "coefficients")
    try:
        if isinstance(obj, list):
            return CoefficientSequence.explicit(obj)
        return CoefficientSequence.from_json(obj)
    except InvalidCoefficientError as exc:
        raise CLIError(str(exc))


def _optimizer_options(args) -> OptimizerOptions:
    try:
        return OptimizerOptions(
            max_iters=getattr(args, "max_iters", 2000),
            tol=getattr(args, "tol", 1e-8),
            step0=getattr(args, "step0", 1.0),
            restarts=getattr(args, "restarts", 8),
            seed=getattr(args, "seed", None),
            workers=getattr(args, "workers", 1),
        )
    except ValueError as exc:
        raise CLIError(str(exc))


def _parse_measure(arg: str, index_set, args) -> DiscreteMeasure:
    if arg == "uniform":
        return DiscreteMeasure.uniform(index_set)
    if arg == "optimize":
        return minimize_strong(index_set, _optimizer_options(args)).measure
    obj = _load_json_arg(arg, "measure")
    try:
        return make_measure(index_set, obj)
    except InvalidMeasureError as exc:
        raise CLIError(str(exc))


def _build_objects(args):
    """Coefficients, index set, partition, plus collected warnings."""
    seq = _parse_coeffs(args.coeffs)
    notes: list[str] = []
    with warnings.catch_warnings(record=True) as wl:
        warnings.simplefilter("always")
        index_set = build_index_set(seq)
    notes += [str(w.message) for w in wl]
    tail = seq.tail_mass()
    if tail is not None and math.isinf(tail):
        notes.append("square sum of the full coefficient family diverges; "
                     "truncated tail mass is infinite")
    depth = getattr(args, "depth", "auto")
    if depth != "auto":
        try:
            depth = int(depth)
        except (TypeError, ValueError):
            raise CLIError("depth must be an integer or 'auto'")
        if depth < 0:
            raise CLIError("depth must be nonnegative")
    tree = build_partition(index_set, max_depth=depth)
    return seq, index_set, tree, notes, tail


def _require_seed(args) -> int:
    if args.seed is None:
        raise CLIError("a seed is required for stochastic commands")
    return args.seed


# ---------------------------------------------------------------------------
# output


def _emit(args, command: str, config: dict, report: dict,
          csv_rows: list | None = None) -> None:
    if getattr(args, "format", "json") == "csv":
        if csv_rows is None:
            raise CLIError("csv output is only available for the per-level "
                           "table of evaluate")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "full_sum", "filtered_sum", "good_count"])
        for k, full, filt, count in csv_rows:
            writer.writerow([k, repr(float(full)), repr(float(filt)), count])
        text = buf.getvalue()
    else:
        payload = {"schema": SCHEMA, "command": command,
                   "config": config, "report": report}
        if not getattr(args, "no_timestamp", False):
            payload["timestamp"] = datetime.now(timezone.utc).isoformat()
        text = json.dumps(payload, sort_keys=True, indent=2,
                          allow_nan=False) + "\n"
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# verification suites (importable; each returns {"suite", "checks", "passed"})


def suite_skeleton() -> dict:
    """Exhaustive sign enumeration of E|S_l - S_m|^2 = |l-m|(1 - |l-m|/4)."""
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=4)))
    S = s_skeleton(signs)
    checks = []
    for l in range(5):
        for m in range(5):
            measured = float(((S[:, l] - S[:, m]) ** 2).mean())
            d = abs(l - m)
            expected = d * (1.0 - d / 4.0)
            checks.append({
                "name": f"skeleton_{l}_{m}",
                "measured": measured,
                "expected": expected,
                "tol": 1e-12,
                "ok": bool(abs(measured - expected) <= 1e-12),
            })
    return {"suite": "skeleton", "checks": checks,
            "passed": all(c["ok"] for c in checks)}


def suite_lemma4(seed: int, instances: int = 50) -> dict:
    """Single-level oracle against d(1 - 4**(k-1) d) on random instances."""
    rng = np.random.default_rng(seed)
    checks = []
    for i in range(instances):
        level = int(rng.integers(1, 5))
        parent = int(rng.integers(0, 4 ** (level - 1)))
        masses = rng.dirichlet(np.ones(4))
        flags = good_children(masses)
        sv = build_skeleton_variables(masses, {j for j in range(4) if flags[j]})
        width = 4.0 ** (-(level - 1))
        left = parent * width
        s, t = (left + width * rng.random(2)).tolist()
        measured = second_moment_oracle(sv, level, parent, s, t)
        d = abs(s - t)
        expected = d * (1.0 - 4.0 ** (level - 1) * d)
        checks.append({
            "name": f"one_level_{i}",
            "level": level,
            "measured": measured,
            "expected": expected,
            "tol": 1e-12,
            "ok": bool(abs(measured - expected) <= 1e-12),
        })
    return {"suite": "lemma4", "checks": checks,
            "passed": all(c["ok"] for c in checks)}


def _walk_bridges(node):
    if node.bridge is not None:
        yield node.bridge
        return
    for _, child in node.children:
        yield from _walk_bridges(child)


def suite_bridge(tree, measure, paths: int, seed: int,
                 workers: int = 1, pairs: int = 10) -> dict:
    """Bridge factorization exactness and MC increment second moments."""
    points = tree.index_set.points
    if points.size < 2:
        return {"suite": "bridge", "checks": [], "passed": True}
    base = min(2, tree.depth)
    adv = AdversarialSampler(tree, measure, base)
    fact_err = 0.0
    for bridge in _walk_bridges(adv._root):
        if bridge.dim:
            rebuilt = bridge.chol @ bridge.chol.T
            fact_err = max(fact_err, float(np.abs(rebuilt - bridge.covariance()).max()))
    checks = [{
        "name": "bridge_factorization",
        "measured": fact_err,
        "tol": 1e-8,
        "ok": bool(fact_err <= 1e-8),
    }]
    lift = bridge_to_orthogonal(adv)
    rng = np.random.default_rng(seed)
    idx_pairs = [sorted(rng.choice(points.size, size=2, replace=False).tolist())
                 for _ in range(pairs)]
    for label, sampler in (("bridge", adv), ("lift", lift)):
        vals = sampler.sample(paths, seed, workers)
        for i, j in idx_pairs:
            sq = (vals[:, i] - vals[:, j]) ** 2
            measured = float(sq.mean())
            expected = sampler.second_moment(points[i], points[j])
            se = float(sq.std(ddof=1) / math.sqrt(paths))
            checks.append({
                "name": f"{label}_increment_{i}_{j}",
                "measured": measured,
                "expected": expected,
                "stderr": se,
                "ok": bool(abs(measured - expected) <= 3.0 * se + 1e-9),
            })
    return {"suite": "bridge", "checks": checks,
            "passed": all(c["ok"] for c in checks)}


def suite_chaining(seq, measure, generator, paths: int, seed: int,
                   workers: int = 1) -> dict:
    if seq is None or measure.index_set.points.size < 2:
        return {"suite": "chaining", "checks": [], "passed": True}
    rep = verify_chaining_bound(seq, measure, generator, paths, seed, workers)
    check = {
        "name": "chaining_bound",
        "measured": rep.estimate.mean,
        "stderr": rep.estimate.stderr,
        "bound": None if math.isinf(rep.bound) else rep.bound,
        "skipped": rep.skipped,
        "ok": bool(rep.passed),
    }
    return {"suite": "chaining", "checks": [check], "passed": check["ok"]}


def suite_lowerbound(measure, tree, depth: int, paths: int, seed: int,
                     workers: int = 1) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = lower_bound_report(measure, tree, depth, paths, seed, workers)
    check = {
        "name": "lower_bound",
        "filtered_sum": rep.filtered_sum,
        "threshold": rep.threshold,
        "base_depth": rep.base_depth,
        "ok": bool(rep.passed),
    }
    return {"suite": "lowerbound", "checks": [check], "passed": check["ok"]}


def suite_inequalities(tree, random_measures: int, seed: int) -> dict:
    """Functional inequalities on Dirichlet-random measures.

    Checks weak <= strong, weak <= dyadic, weak <= filtered, and that the
    filtered series terminates at separation_depth + 1.
    """
    index_set = tree.index_set
    rng = np.random.default_rng(seed)
    draw_seeds = rng.integers(0, 2 ** 31, size=random_measures)
    names = ("weak_le_strong", "weak_le_dyadic", "weak_le_filtered")
    violations = {n: 0 for n in names}
    excess = {n: 0.0 for n in names}
    last_level = tree.separation_depth + 1
    max_tail_filtered = 0.0
    for s in draw_seeds:
        m = DiscreteMeasure.dirichlet_random(index_set, seed=int(s))
        weak = weak_functional(m)
        strong, _ = strong_functional(m)
        bounds = {
            "weak_le_strong": strong,
            "weak_le_dyadic": dyadic_bound(m, tree),
            "weak_le_filtered": filtered_bound(m, tree),
        }
        for n in names:
            gap = weak - bounds[n]
            excess[n] = max(excess[n], gap)
            if gap > 1e-12:
                violations[n] += 1
        table = classify_good_indices(m, tree, max_level=last_level)
        max_tail_filtered = max(max_tail_filtered,
                                table.levels[-1].filtered_sum)
    checks = [{
        "name": n,
        "draws": random_measures,
        "violations": violations[n],
        "max_excess": excess[n],
        "ok": violations[n] == 0,
    } for n in names]
    checks.append({
        "name": "filtered_terminates",
        "level": last_level,
        "max_filtered_sum": max_tail_filtered,
        "ok": bool(max_tail_filtered == 0.0),
    })
    return {"suite": "inequalities", "checks": checks,
            "passed": all(c["ok"] for c in checks)}


# ---------------------------------------------------------------------------
# subcommands


def cmd_build(args) -> int:
    seq, index_set, tree, notes, tail = _build_objects(args)
    report = {
        "index_set": index_set.to_json(),
        "partition": {
            "depth": tree.depth,
            "separation_depth": tree.separation_depth,
            "cells_per_level": [len(tree.level_cells(k))
                                for k in range(tree.depth + 1)],
        },
        "tail_mass": None if tail is None or math.isinf(tail) else tail,
        "warnings": notes,
    }
    config = {"coeffs": seq.to_json(), "depth": args.depth}
    _emit(args, "build", config, report)
    return 0


def cmd_evaluate(args) -> int:
    seq, index_set, tree, notes, _ = _build_objects(args)
    measure = _parse_measure(args.measure, index_set, args)
    rep = evaluate_functionals(measure, tree, seq)
    report = rep.to_json()
    report["warnings"] = notes
    config = {"coeffs": seq.to_json(), "depth": args.depth,
              "measure": args.measure}
    _emit(args, "evaluate", config, report, csv_rows=list(rep.per_level))
    return 0


def cmd_optimize(args) -> int:
    seq, index_set, _, notes, _ = _build_objects(args)
    opts = _optimizer_options(args)
    try:
        if args.objective == "strong":
            report = minimize_strong(index_set, opts).to_json()
        elif args.objective == "weak":
            report = maximize_weak(index_set, opts).to_json()
        else:
            report = duality_gap_report(index_set, opts).to_json()
    except ValueError as exc:
        raise CLIError(str(exc))
    report["warnings"] = notes
    config = {"coeffs": seq.to_json(), "objective": args.objective,
              "max_iters": opts.max_iters, "tol": opts.tol,
              "restarts": opts.restarts, "seed": opts.seed}
    _emit(args, "optimize", config, report)
    return 0


def cmd_simulate(args) -> int:
    seed = _require_seed(args)
    seq, index_set, tree, notes, _ = _build_objects(args)
    measure = _parse_measure(args.measure, index_set, args)
    generator = OrthonormalGenerator(args.generator)
    sup = simulate_sup_square(seq, generator, args.paths, seed, args.workers)
    chain = verify_chaining_bound(seq, measure, generator, args.paths, seed,
                                  args.workers)
    report = {
        "sup_square": sup.to_json(),
        "chaining": chain.to_json(),
        "generator": generator.kind,
        "warnings": notes,
        "passed": chain.passed,
    }
    config = {"coeffs": seq.to_json(), "generator": generator.kind,
              "measure": args.measure, "paths": args.paths, "seed": seed}
    _emit(args, "simulate", config, report)
    return 0 if chain.passed else 1


def cmd_adversarial(args) -> int:
    seed = _require_seed(args)
    seq, index_set, tree, notes, _ = _build_objects(args)
    measure = _parse_measure(args.measure, index_set, args)
    with warnings.catch_warnings(record=True) as wl:
        warnings.simplefilter("always")
        rep = lower_bound_report(measure, tree, args.base_depth, args.paths,
                                 seed, args.workers)
    notes += [str(w.message) for w in wl]
    report = rep.to_json()
    report["warnings"] = notes
    config = {"coeffs": seq.to_json(), "measure": args.measure,
              "depth": args.base_depth, "paths": args.paths, "seed": seed}
    _emit(args, "adversarial", config, report)
    return 0 if rep.passed else 1


def cmd_verify(args) -> int:
    if args.suite != "skeleton":
        _require_seed(args)
    names = SUITES[:-1] if args.suite == "all" else (args.suite,)
    needs_objects = {"bridge", "chaining", "lowerbound", "inequalities"}
    seq = index_set = tree = measure = None
    if set(names) & needs_objects:
        seq, index_set, tree, _, _ = _build_objects(args)
        measure = _parse_measure(args.measure, index_set, args)
    results = []
    for name in names:
        if name == "skeleton":
            results.append(suite_skeleton())
        elif name == "lemma4":
            results.append(suite_lemma4(args.seed))
        elif name == "bridge":
            results.append(suite_bridge(tree, measure, args.paths, args.seed,
                                        args.workers))
        elif name == "chaining":
            generator = OrthonormalGenerator(args.generator)
            results.append(suite_chaining(seq, measure, generator, args.paths,
                                          args.seed, args.workers))
        elif name == "lowerbound":
            results.append(suite_lowerbound(measure, tree, args.base_depth,
                                            args.paths, args.seed,
                                            args.workers))
        else:
            results.append(suite_inequalities(tree, args.random_measures,
                                              args.seed))
    passed = all(r["passed"] for r in results)
    report = {"suites": results, "passed": passed}
    config = {"suite": args.suite, "coeffs": args.coeffs,
              "seed": args.seed, "paths": args.paths,
              "random_measures": args.random_measures}
    _emit(args, "verify", config, report)
    return 0 if passed else 1


def cmd_pipeline(args) -> int:
    seed = _require_seed(args)
    stage = "build"
    try:
        seq, index_set, tree, notes, tail = _build_objects(args)
        stage = "optimize"
        opt = minimize_strong(index_set, _optimizer_options(args))
        stage = "evaluate"
        fr = evaluate_functionals(opt.measure, tree, seq)
        stage = "chaining"
        generator = OrthonormalGenerator(args.generator)
        chain = verify_chaining_bound(seq, opt.measure, generator, args.paths,
                                      seed, args.workers)
        stage = "lowerbound"
        with warnings.catch_warnings(record=True) as wl:
            warnings.simplefilter("always")
            lower = lower_bound_report(opt.measure, tree,
                                       args.adversarial_depth, args.paths,
                                       seed, args.workers)
        notes += [str(w.message) for w in wl]
    except CLIError as exc:
        raise CLIError(f"{stage}: {exc}")
    except (InvalidCoefficientError, InvalidMeasureError, DomainError,
            ValueError) as exc:
        raise CLIError(f"{stage}: {exc}")
    passed = chain.passed and lower.passed
    report = {
        "build": {
            "index_set": index_set.to_json(),
            "separation_depth": tree.separation_depth,
            "depth": tree.depth,
            "tail_mass": None if tail is None or math.isinf(tail) else tail,
        },
        "optimize": opt.to_json(),
        "evaluate": fr.to_json(),
        "chaining": chain.to_json(),
        "lower_bound": lower.to_json(),
        "warnings": notes,
        "passed": passed,
    }
    config = {"coeffs": seq.to_json(), "depth": args.depth,
              "generator": generator.kind, "paths": args.paths, "seed": seed,
              "adversarial_depth": args.adversarial_depth}
    _emit(args, "pipeline", config, report)
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orthomm",
        description="Majorizing-measure functionals and chaining checks "
                    "on partial-sum index sets.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--coeffs", default=DEFAULT_COEFFS,
                        help="coefficient spec: inline JSON or a file path")
    common.add_argument("--out", default=None, help="write the report here "
                        "instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit the timestamp field for reproducible bytes")
    common.add_argument("--workers", type=int, default=1)

    depth_opt = argparse.ArgumentParser(add_help=False)
    depth_opt.add_argument("--depth", default="auto",
                           help="partition depth or 'auto'")

    measure_opt = argparse.ArgumentParser(add_help=False)
    measure_opt.add_argument("--measure", default="uniform",
                             help="'uniform', 'optimize', inline JSON, or a "
                                  "file path")

    mc_opt = argparse.ArgumentParser(add_help=False)
    mc_opt.add_argument("--paths", type=int, default=100000)
    mc_opt.add_argument("--seed", type=int, default=None)

    optim_opt = argparse.ArgumentParser(add_help=False)
    optim_opt.add_argument("--max-iters", type=int, default=2000)
    optim_opt.add_argument("--tol", type=float, default=1e-8)
    optim_opt.add_argument("--restarts", type=int, default=8)
    optim_opt.add_argument("--step0", type=float, default=1.0)

    p = sub.add_parser("build", parents=[common, depth_opt],
                       help="index set and partition summary")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("evaluate",
                       parents=[common, depth_opt, measure_opt, mc_opt,
                                optim_opt],
                       help="functional values and per-level tables")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("optimize", parents=[common, mc_opt, optim_opt],
                       help="optimize a functional over the simplex")
    p.add_argument("--objective", choices=("strong", "weak", "gap"),
                   default="strong")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate",
                       parents=[common, depth_opt, measure_opt, mc_opt,
                                optim_opt],
                       help="Monte Carlo supremum estimates and the "
                            "chaining bound")
    p.add_argument("--generator", choices=("gaussian", "rademacher", "trig"),
                   default="gaussian")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("adversarial",
                       parents=[common, measure_opt, mc_opt, optim_opt],
                       help="adversarial construction and the lower-bound "
                            "check")
    p.add_argument("--depth", dest="base_depth", type=int, default=3,
                   help="construction base depth")
    p.set_defaults(func=cmd_adversarial)

    p = sub.add_parser("verify",
                       parents=[common, depth_opt, measure_opt, mc_opt,
                                optim_opt],
                       help="named property suites")
    p.add_argument("--suite", choices=SUITES, required=True)
    p.add_argument("--random-measures", type=int, default=100)
    p.add_argument("--generator", choices=("gaussian", "rademacher", "trig"),
                   default="gaussian")
    p.add_argument("--base-depth", type=int, default=3)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("pipeline",
                       parents=[common, depth_opt, mc_opt, optim_opt],
                       help="build, optimize, evaluate, and verify in one run")
    p.add_argument("--generator", choices=("gaussian", "rademacher", "trig"),
                   default="gaussian")
    p.add_argument("--adversarial-depth", type=int, default=3)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InvalidCoefficientError, InvalidMeasureError, DomainError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
