"""Command-line entry point: ``steadytrunc run`` and ``steadytrunc diff``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .bounds import outside_mass_estimate, statewise_bounds
from .io import FormatError, compare, marginal, write_distribution, write_summary, write_table
from .lyapunov import LyapunovError, LyapunovSpec, lyapunov_box
from .model import ModelError
from .oracle import OracleError, analytic_pmf, ssa_occupancy
from .parser import load_model
from .refinement import RefinementConfig, RefinementError, refine
from .solver import SolverError

log = logging.getLogger("steadytrunc")

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2
DEEP_EXPONENT = 16


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="steadytrunc", description=__doc__)
    p.add_argument("--version", action="version", version=f"steadytrunc {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-level reports")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="compute a truncation and its stationary distribution")
    run.add_argument("--model", required=True, help="model file")
    run.add_argument("--epsilon", type=float, default=1e-2, help="mass dropped per filter step")
    run.add_argument("--epsilon-l", type=float, default=1e-4, help="Lyapunov mass threshold")
    run.add_argument("--init-exponent", type=int, default=4, help="initial cell width is 2**m")
    run.add_argument("--init-box", type=int, default=None, help="override the initial extent: cover [0, N) per axis")
    run.add_argument("--max-levels", type=int, default=None, help="stop after this many coarse levels")
    run.add_argument("--deep", action="store_true", help=f"allow full-depth runs with exponent >= {DEEP_EXPONENT}")
    run.add_argument("--solver", choices=["auto", "dense", "sparse", "iterative"], default="auto")
    run.add_argument("--bounds", action="store_true", help="state-wise bounds (one solve per in-boundary state)")
    run.add_argument("--oracle", choices=["none", "analytic", "ssa"], default="none")
    run.add_argument("--ssa-horizon", type=float, default=1e5, help="simulated time for the SSA oracle")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, help="output directory")

    diff = sub.add_parser("diff", help="compare two distribution CSV files")
    diff.add_argument("a")
    diff.add_argument("b")
    return p


def _lyapunov_info(network, args) -> dict:
    info: dict = {"g": "", "c": None, "box": None}
    try:
        spec = LyapunovSpec.build(network, args.epsilon_l)
        info["g"] = spec.g.format(network.names)
        info["c"] = float(spec.c)
        info["box"] = [int(b) for b in lyapunov_box(network, spec)]
    except LyapunovError as err:
        if args.init_box is None:
            raise
        info["error"] = str(err)
    return info


def _oracle(network, args, result) -> dict | None:
    states = result.states
    values = result.distribution.values
    if args.oracle == "analytic":
        pmf = analytic_pmf(network)
        if pmf is None:
            raise OracleError("model has no closed-form stationary distribution; use --oracle ssa")
        ref = pmf(states.states)
        outside = outside_mass_estimate(states, pmf)
        diff = np.abs(values - ref)
        return {
            "kind": "analytic",
            "outside_mass": outside,
            "total_abs_error": float(diff.sum() + outside),
            "max_abs_error": float(diff.max()),
        }
    if args.oracle == "ssa":
        x0 = states.states[int(np.argmax(values))]
        occ = ssa_occupancy(network, x0, args.ssa_horizon, 0.1, args.seed)
        ref = occ.distribution_on(states)
        outside = outside_mass_estimate(states, occ.as_mapping())
        diff = np.abs(values - ref)
        return {
            "kind": "ssa",
            "outside_mass": outside,
            "total_abs_error": float(diff.sum() + outside),
            "max_abs_error": float(diff.max()),
            "seed": args.seed,
            "horizon": args.ssa_horizon,
            "jumps": occ.jumps,
        }
    return None


def run(args) -> int:
    t0 = time.perf_counter()
    try:
        network = load_model(args.model)
        config = RefinementConfig(
            epsilon=args.epsilon,
            m=args.init_exponent,
            epsilon_l=args.epsilon_l,
            solver=args.solver,
            init_extent=args.init_box,
            max_levels=args.max_levels,
        )
    except (OSError, ModelError, ValueError) as err:
        print(f"steadytrunc: input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    if config.m >= DEEP_EXPONENT and config.max_levels is None and not args.deep:
        print(f"steadytrunc: exponent {config.m} means a full-depth run; pass --deep or --max-levels", file=sys.stderr)
        return EXIT_INPUT
    try:
        lyap = _lyapunov_info(network, args)
        result = refine(network, config)
        oracle = _oracle(network, args, result)
        bounds = statewise_bounds(network, result.states, args.solver) if args.bounds and result.complete else None
    except (LyapunovError, SolverError, RefinementError, OracleError) as err:
        print(f"steadytrunc: numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.bounds and not result.complete:
        log.warning("bounds skipped: the run stopped before unit granularity")

    lyap["initial_cells"] = int(result.reports[0].size)
    lyap["initial_cell_width"] = 2**config.m

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    states = result.states.states
    values = result.distribution.values
    write_distribution(out / "distribution.csv", network.names, states, values)
    fields = ["level", "size", "cell_width", "residual", "kept_mass", "kept", "wall_time", "method", "warning"]
    write_table(out / "iterations.csv", fields, ([getattr(r, f) for f in fields] for r in result.reports))
    if result.complete:
        for a, name in enumerate(network.names):
            counts, probs = marginal(states, values, a)
            write_table(out / f"marginal_{name}.csv", [name, "probability"], zip(counts.tolist(), probs.tolist()))
    if bounds is not None:
        rows = (
            list(map(int, s)) + [float(lo), float(hi)]
            for s, lo, hi in zip(states, bounds.lower, bounds.upper)
        )
        write_table(out / "bounds.csv", network.names + ["lower", "upper"], rows)
    summary = {
        "schema_version": 1,
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "model": {
            "path": str(args.model),
            "species": network.names,
            "mode_species": [network.names[i] for i in network.mode_indices],
        },
        "config": {
            "epsilon": config.epsilon,
            "epsilon_l": config.epsilon_l,
            "init_exponent": config.m,
            "init_box": config.init_extent,
            "max_levels": config.max_levels,
            "solver": config.solver,
            "bounds": bool(args.bounds),
            "oracle": args.oracle,
            "seed": args.seed,
        },
        "lyapunov": lyap,
        "iterations": [r.as_dict() for r in result.reports],
        "final_size": result.final_size,
        "complete": result.complete,
        "reentry": config.reentry,
        "oracle": oracle,
        "bounds": None
        if bounds is None
        else {
            "total_width": bounds.total_width,
            "max_width": bounds.max_width,
            "targets": int(len(bounds.targets)),
            "failed_targets": bounds.failed,
        },
        "runtime_seconds": time.perf_counter() - t0,
    }
    write_summary(out / "summary.json", summary)
    print(json.dumps({"final_size": result.final_size, "out": str(out)}))
    return EXIT_OK


def diff(args) -> int:
    try:
        report = compare(args.a, args.b)
    except (OSError, FormatError) as err:
        print(f"steadytrunc: input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(report, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "run":
        return run(args)
    return diff(args)


if __name__ == "__main__":
    sys.exit(main())
