"""Command-line front end: dataset generation, single-pair matching, the
benchmark grid, and brute-force oracle verification.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or parse error,
3 oracle gap above threshold.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import figures
from .baselines import ObjectiveKind, PgdParams, brute_force, evaluate
from .clap_solver import SolverParams, build_problem, solve, with_attributes
from .errors import EnumerationSizeError, InvalidInputError, MatchingError
from .graph_model import accuracy, pair_from_dict, pair_to_dict
from .synthetic_bench import SynthConfig, emit_report, gen_pair, run_benchmark

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_GAP = 3


class UsageError(Exception):
    pass


def _add_synth_options(p: argparse.ArgumentParser):
    p.add_argument("--pairs", type=int, default=None, help="number of pairs")
    p.add_argument("--nodes", type=int, default=None, help="nodes per graph")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (sole entropy source)")
    p.add_argument("--sigma", type=float, default=None, help="descriptor noise std dev")
    p.add_argument("--descriptor-dim", type=int, default=None, help="descriptor dimension")
    p.add_argument("--image-size", default=None, metavar="WxH", help="image extent, e.g. 256x256")


def _add_solver_options(p: argparse.ArgumentParser):
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="structure weight")
    p.add_argument("--epsilon", type=float, default=None, help="entropy weight")
    p.add_argument("--epsilon-start", type=float, default=None,
                   help="anneal the entropy weight from here down to --epsilon")
    p.add_argument("--anneal-factor", type=float, default=None)
    p.add_argument("--refine", action=argparse.BooleanOptionalAction, default=None,
                   help="hill-climb the discrete assignment after rounding")
    p.add_argument("--sinkhorn-tol", type=float, default=None)
    p.add_argument("--sinkhorn-iters", type=int, default=None)
    p.add_argument("--outer-tol", type=float, default=None)
    p.add_argument("--outer-iters", type=int, default=None)
    p.add_argument("--scale", type=float, default=None, help="node similarity scale")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None,
                   help="normalize edge lengths by the per-graph maximum")


GEN_DEFAULTS = {"pairs": 1000, "nodes": 10, "seed": 0, "sigma": 0.0,
                "descriptor_dim": 512, "image_size": (256.0, 256.0), "out": None}

MATCH_DEFAULTS = {"attr": "length", "normalize": True, "scale": 1.0, "lam": 0.1,
                  "epsilon": 1.0, "epsilon_start": None, "anneal_factor": 0.5,
                  "refine": False, "sinkhorn_tol": 1e-6, "sinkhorn_iters": 1000,
                  "outer_tol": 1e-5, "outer_iters": 50, "out": None, "figure": None}

BENCH_DEFAULTS = {"pairs": 1000, "nodes": 10, "seed": 0, "sigma": 0.0,
                  "descriptor_dim": 512, "image_size": (256.0, 256.0),
                  "solvers": "clap", "attrs": "length", "normalize": True,
                  "lam": 0.1, "epsilon": 1.0, "epsilon_start": None,
                  "anneal_factor": 0.5, "refine": False,
                  "sinkhorn_tol": 1e-6, "sinkhorn_iters": 1000,
                  "outer_tol": 1e-5, "outer_iters": 50,
                  "pgd_iters": 100, "format": "csv", "out": None, "jobs": 1,
                  "figures": True, "scale": 1.0}

ORACLE_DEFAULTS = {"instances": 100, "nodes": 6, "seed": 2, "sigma": 0.0,
                   "descriptor_dim": 512, "image_size": (256.0, 256.0),
                   "gap": 0.01, "lam": 0.1, "epsilon": 0.1, "epsilon_start": 1.0,
                   "anneal_factor": 0.5, "refine": True,
                   "sinkhorn_tol": 1e-3, "sinkhorn_iters": 600,
                   "outer_tol": 1e-5, "outer_iters": 50, "normalize": True,
                   "scale": 1.0}


def _parse_image_size(text) -> tuple[float, float]:
    if isinstance(text, tuple):
        return text
    sep = "x" if "x" in text else ","
    try:
        w, h = (float(t) for t in text.split(sep))
        return (w, h)
    except ValueError:
        raise UsageError(f"cannot parse image size {text!r}, expected WxH") from None


def _coerce(text: str, default):
    if isinstance(default, bool):
        if text.lower() in ("true", "1", "yes", "on"):
            return True
        if text.lower() in ("false", "0", "no", "off"):
            return False
        raise UsageError(f"expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return _parse_image_size(text)
    return text


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(args, defaults: dict) -> dict:
    """CLI flags override config-file values override built-in defaults."""
    config = _read_config_file(args.config) if getattr(args, "config", None) else {}
    unknown = set(config) - set(defaults)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    merged = {}
    for key, default in defaults.items():
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            merged[key] = _parse_image_size(cli_value) if key == "image_size" else cli_value
        elif key in config:
            try:
                merged[key] = _coerce(config[key], default if default is not None else "")
            except ValueError as exc:
                raise UsageError(f"config key {key}: {exc}") from exc
        else:
            merged[key] = default
    return merged


def _synth_config(opts: dict, pairs_key: str = "pairs") -> SynthConfig:
    return SynthConfig(pairs=opts[pairs_key], nodes=opts["nodes"], seed=opts["seed"],
                       descriptor_noise=opts["sigma"],
                       descriptor_dim=opts["descriptor_dim"],
                       image_size=opts["image_size"])


def _solver_params(opts: dict) -> SolverParams:
    return SolverParams(lam=opts["lam"], epsilon=opts["epsilon"],
                        sinkhorn_max_iters=opts["sinkhorn_iters"],
                        sinkhorn_tol=opts["sinkhorn_tol"],
                        outer_max_iters=opts["outer_iters"],
                        outer_tol=opts["outer_tol"],
                        epsilon_start=opts["epsilon_start"],
                        anneal_factor=opts["anneal_factor"],
                        refine=opts["refine"])


def cmd_gen(args) -> int:
    opts = _resolve(args, GEN_DEFAULTS)
    if opts["out"] is None:
        raise UsageError("gen requires --out DIRECTORY")
    if opts["pairs"] < 1:
        raise UsageError("--pairs must be >= 1")
    config = _synth_config(opts)
    outdir = Path(opts["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    for index in range(config.pairs):
        problem = gen_pair(config, index)
        payload = pair_to_dict(problem.a, problem.b, problem.truth)
        path = outdir / f"pair_{index:05d}.json"
        path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")
    print(f"wrote {config.pairs} pairs to {outdir}")
    return EXIT_OK


def _load_pair_file(path: str):
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON: {exc}") from exc
    try:
        return pair_from_dict(payload)
    except InvalidInputError as exc:
        raise UsageError(f"{path}: does not match the graph-pair schema: {exc}") from exc


def cmd_match(args) -> int:
    opts = _resolve(args, MATCH_DEFAULTS)
    a, b, truth = _load_pair_file(args.input)
    problem = build_problem(a, b, attribute=opts["attr"], normalize=opts["normalize"],
                            scale=opts["scale"], truth=truth)
    result = solve(problem, _solver_params(opts))
    payload = {
        "solver": "clap",
        "assignment": [[i, j] for i, j in result.hard.pairs],
        "match_lines": [[a.points[i].tolist(), b.points[j].tolist()]
                        for i, j in result.hard.pairs],
        "objective_trace": list(result.objective_trace),
        "outer_iters": result.outer_iters,
        "sinkhorn_iters_total": result.sinkhorn_iters_total,
        "converged": result.converged,
        "wall_time_ms": result.wall_time_ms,
    }
    if truth is not None:
        payload["acc"] = accuracy(result.hard, truth)
    text = json.dumps(payload, indent=2) + "\n"
    if opts["out"]:
        Path(opts["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if opts["figure"]:
        figures.save_match_figure(a, b, result.hard, truth, opts["figure"])
    return EXIT_OK


def cmd_bench(args) -> int:
    opts = _resolve(args, BENCH_DEFAULTS)
    if opts["out"] is None:
        raise UsageError("bench requires --out DIRECTORY")
    if opts["pairs"] < 1:
        raise UsageError("--pairs must be >= 1")
    solvers = tuple(s.strip() for s in opts["solvers"].split(",") if s.strip())
    attributes = tuple(s.strip() for s in opts["attrs"].split(",") if s.strip())
    config = _synth_config(opts)
    try:
        report = run_benchmark(config, solvers=solvers, attributes=attributes,
                               params=_solver_params(opts),
                               pgd_params=PgdParams(lam=opts["lam"], iters=opts["pgd_iters"]),
                               normalize=opts["normalize"], jobs=opts["jobs"])
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from exc

    outdir = Path(opts["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    if opts["format"] == "json":
        emit_report(report, "json", outdir / "report.json")
    elif opts["format"] == "csv":
        for solver in solvers:
            for attribute in attributes:
                sub = replace(report, records=tuple(
                    r for r in report.records
                    if (r.solver, r.attribute) == (solver, attribute)))
                emit_report(sub, "csv", outdir / f"{solver}_{attribute}.csv")
        agg_lines = ["solver,attribute,pairs,failures,mean_acc_pct,mean_time_ms,fps"]
        for a in report.aggregates():
            agg_lines.append(f"{a.solver},{a.attribute},{a.pairs},{a.failures},"
                             f"{a.mean_acc_pct:.9g},{a.mean_time_ms:.9g},{a.fps:.9g}")
        (outdir / "aggregates.csv").write_text("\n".join(agg_lines) + "\n",
                                               encoding="utf-8")
    else:
        raise UsageError(f"unknown format {opts['format']!r}")
    if opts["figures"]:
        figures.save_benchmark_figures(report, outdir)
    for a in report.aggregates():
        print(f"{a.solver}/{a.attribute}: acc {a.mean_acc_pct:.1f}% "
              f"time {a.mean_time_ms:.2f} ms fps {a.fps:.1f} failures {a.failures}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    opts = _resolve(args, ORACLE_DEFAULTS)
    if opts["nodes"] > 8:
        print(f"error: {opts['nodes']} nodes exceed the enumeration bound (8)",
              file=sys.stderr)
        return EXIT_USAGE
    config = _synth_config(opts, pairs_key="instances")
    params = _solver_params(opts)
    worst_gap = 0.0
    ratios = []
    for index in range(opts["instances"]):
        problem = with_attributes(gen_pair(config, index), "length",
                                  normalize=opts["normalize"])
        s = problem.structure
        result = solve(problem, params)
        achieved = evaluate(ObjectiveKind.LINEAR_L1, result.hard, problem.u,
                            opts["lam"], h_a=s.h_a, h_b=s.h_b)
        try:
            _, best = brute_force(problem.u, opts["lam"], ObjectiveKind.LINEAR_L1,
                                  h_a=s.h_a, h_b=s.h_b)
        except EnumerationSizeError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        gap = (best - achieved) / max(abs(best), 1e-12)
        worst_gap = max(worst_gap, gap)
        ratios.append(achieved / best if best != 0 else 1.0)
        print(f"instance {index}: oracle {best:.6f} clap {achieved:.6f} gap {gap:.6f}")
    print(f"summary: instances {opts['instances']} mean_ratio {np.mean(ratios):.6f} "
          f"max_gap {worst_gap:.6f} threshold {opts['gap']:.6f}")
    return EXIT_OK if worst_gap <= opts["gap"] else EXIT_GAP


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clapmatch",
        description="Graph matching via a concave-linear relaxation, with a "
                    "synthetic benchmark and an exhaustive verification oracle.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="write graph-pair JSON files")
    _add_synth_options(p_gen)
    p_gen.add_argument("--out", default=None, help="output directory")
    p_gen.add_argument("--config", default=None, help="key = value config file")
    p_gen.set_defaults(func=cmd_gen)

    p_match = sub.add_parser("match", help="match one graph-pair JSON file")
    p_match.add_argument("input", help="graph-pair JSON file")
    p_match.add_argument("--attr", choices=("length", "adjacency", "inner_product"),
                         default=None)
    _add_solver_options(p_match)
    p_match.add_argument("--out", default=None, help="write result JSON here instead of stdout")
    p_match.add_argument("--figure", default=None, help="render the matching to this image file")
    p_match.add_argument("--config", default=None)
    p_match.set_defaults(func=cmd_match)

    p_bench = sub.add_parser("bench", help="run the synthetic benchmark grid")
    _add_synth_options(p_bench)
    p_bench.add_argument("--solvers", default=None, help="comma list from {clap,pgd}")
    p_bench.add_argument("--attrs", default=None,
                         help="comma list from {length,adjacency,inner_product}")
    _add_solver_options(p_bench)
    p_bench.add_argument("--pgd-iters", type=int, default=None)
    p_bench.add_argument("--format", choices=("csv", "json"), default=None)
    p_bench.add_argument("--out", default=None, help="output directory")
    p_bench.add_argument("--jobs", type=int, default=None, help="worker processes")
    p_bench.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None,
                         help="render accuracy/timing charts next to the reports")
    p_bench.add_argument("--config", default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_oracle = sub.add_parser("oracle",
                              help="compare the solver with the exhaustive oracle")
    p_oracle.add_argument("--instances", type=int, default=None)
    _add_synth_options(p_oracle)
    p_oracle.add_argument("--gap", type=float, default=None,
                          help="maximum tolerated relative objective gap")
    _add_solver_options(p_oracle)
    p_oracle.add_argument("--config", default=None)
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MatchingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
