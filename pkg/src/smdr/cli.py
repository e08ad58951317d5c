"""Command-line surface: simulate, screen, benchmark, render.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
All commands are deterministic given flags + seed + input bytes and never
leave partial outputs behind (atomic per-file writes after computing).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import gridio, simulation
from .errors import DataFormatError, NumericalError
from .estimator import SpatialMDR
from .fused import default_lambda_grid

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

TABLE_METHODS = {
    "1": ["bh:0.05", "fdrs:0.05", "smdr:0.1"],
    "2": ["mdr:0.1", "smdr:0.1"],
    "3": ["jc", "smdr:0.1"],
}


def _default_out() -> str:
    return os.environ.get("SMDR_OUT_DIR", ".")


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smdr",
                                     description="Spatially adaptive screening with "
                                                 "missed-discovery-rate control")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a synthetic z-grid and truth mask")
    sim.add_argument("--scenario", required=True, choices=simulation.SCENARIO_TAGS)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--rep", type=int, default=0, help="replication index")
    sim.add_argument("--width", type=int, default=128)
    sim.add_argument("--height", type=int, default=128)
    sim.add_argument("--out", default=None, help="output directory")

    scr = sub.add_parser("screen", help="run the screening pipeline on a z-grid")
    scr.add_argument("--input", required=True, help="z-grid file (.grid or .csv)")
    scr.add_argument("--beta", type=_parse_floats, default=[0.1],
                     help="comma-separated control levels")
    scr.add_argument("--lambda", dest="lam", default="auto",
                     help="'auto' (BIC over the default grid) or a fixed value")
    scr.add_argument("--null", choices=["theoretical", "empirical"], default="theoretical")
    scr.add_argument("--sweeps", type=int, default=10)
    scr.add_argument("--seed", type=int, default=0)
    scr.add_argument("--tol", type=float, default=1e-5)
    scr.add_argument("--max-iter", type=int, default=60)
    scr.add_argument("--out", default=None, help="output directory")

    ben = sub.add_parser("benchmark", help="replicated scenario x method benchmark")
    ben.add_argument("--table", choices=sorted(TABLE_METHODS), default=None,
                     help="preset method set reproducing one benchmark table")
    ben.add_argument("--methods", default=None,
                     help="comma-separated method kinds (smdr, fdrs, bh, mdr, jc)")
    ben.add_argument("--beta", type=_parse_floats, default=[0.1],
                     help="levels for smdr/mdr methods")
    ben.add_argument("--alpha", type=_parse_floats, default=[0.05],
                     help="levels for bh/fdrs methods")
    ben.add_argument("--scenarios", default=",".join(simulation.SCENARIO_TAGS))
    ben.add_argument("--reps", type=int, default=20)
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--width", type=int, default=128)
    ben.add_argument("--height", type=int, default=128)
    ben.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ben.add_argument("--sweeps", type=int, default=10)
    ben.add_argument("--out", default=None, help="output directory")

    ren = sub.add_parser("render", help="render a mask, optionally against truth")
    ren.add_argument("--mask", required=True, help="selection mask (PGM)")
    ren.add_argument("--truth", default=None, help="truth mask (PGM)")
    ren.add_argument("--out", required=True, help="output image path (PGM)")

    return parser


def cmd_simulate(args) -> int:
    out_dir = args.out or _default_out()
    scenario = simulation.paper_scenario(args.scenario, seed=args.seed)
    if (args.width, args.height) != (128, 128):
        scenario = simulation.SimScenario(
            width=args.width, height=args.height, circles=scenario.circles,
            theta_law=scenario.theta_law, background_c=scenario.background_c,
            seed=args.seed, tag=scenario.tag)
    zg = simulation.simulate(scenario, args.rep)
    os.makedirs(out_dir, exist_ok=True)
    gridio.write_zgrid(os.path.join(out_dir, "z.grid"), zg)
    gridio.write_mask(os.path.join(out_dir, "truth.pgm"), zg.truth)
    print(f"wrote {out_dir}/z.grid and {out_dir}/truth.pgm")
    return 0


def _format_level(value: float) -> str:
    return f"{value:g}"


def cmd_screen(args) -> int:
    out_dir = args.out or _default_out()
    zg = gridio.read_zgrid(args.input)
    betas = args.beta
    for b in betas:
        if not 0.0 < b < 1.0:
            raise DataFormatError(f"beta must be in (0, 1), got {b}")
    lam = "auto" if args.lam == "auto" else float(args.lam)

    est = SpatialMDR(beta=betas[0], lam=lam, null_kind=args.null, sweeps=args.sweeps,
                     tol=args.tol, max_iter=args.max_iter, seed=args.seed)
    est.fit(zg.values)

    selections = {b: est.select(b) for b in betas}

    os.makedirs(out_dir, exist_ok=True)
    for b, sel in selections.items():
        path = os.path.join(out_dir, f"mask_beta_{_format_level(b)}.pgm")
        gridio.write_mask(path, sel.mask.reshape(est.shape_))
    trace = est.selection_.bmdr_trace
    trace_lines = ["j,bmdr"] + [f"{j},{v:.17g}" for j, v in enumerate(trace)]
    gridio.atomic_write_bytes(os.path.join(out_dir, "bmdr_trace.csv"),
                              ("\n".join(trace_lines) + "\n").encode())
    summary = {
        "width": est.shape_[1],
        "height": est.shape_[0],
        "lambda": est.lambda_,
        "s_hat": est.posterior_.s_hat,
        "betas": [{"beta": b, "j_star": selections[b].j_star} for b in betas],
        "null": {"kind": est.density_model_.null_kind,
                 "mu0": est.density_model_.mu0, "sigma0": est.density_model_.sigma0},
        "prior": {"plateaus": est.prior_.plateau_count,
                  "iterations": est.prior_.iterations,
                  "converged": est.prior_.converged},
    }
    gridio.atomic_write_bytes(os.path.join(out_dir, "summary.json"),
                              (json.dumps(summary, sort_keys=True, indent=2) + "\n").encode())
    print(f"lambda={est.lambda_:g} s_hat={est.posterior_.s_hat:.2f} "
          + " ".join(f"j*({b:g})={selections[b].j_star}" for b in betas))
    return 0


def _benchmark_methods(args) -> list[str]:
    if args.table is not None:
        methods = list(TABLE_METHODS[args.table])
        extra_betas = [b for b in args.beta if b != 0.1]
        for b in extra_betas:
            methods.append(f"smdr:{_format_level(b)}")
        return methods
    if args.methods is None:
        raise DataFormatError("pass --table or --methods")
    methods = []
    for kind in args.methods.split(","):
        kind = kind.strip()
        if kind == "jc":
            methods.append("jc")
        elif kind in ("smdr", "mdr"):
            methods.extend(f"{kind}:{_format_level(b)}" for b in args.beta)
        elif kind in ("bh", "fdrs"):
            methods.extend(f"{kind}:{_format_level(a)}" for a in args.alpha)
        else:
            raise DataFormatError(f"unknown method kind {kind!r}")
    return methods


def cmd_benchmark(args) -> int:
    out_dir = args.out or _default_out()
    methods = _benchmark_methods(args)
    scenarios = []
    for tag in args.scenarios.split(","):
        tag = tag.strip()
        sc = simulation.paper_scenario(tag, replications=args.reps, seed=args.seed)
        if (args.width, args.height) != (128, 128):
            sc = simulation.SimScenario(
                width=args.width, height=args.height, circles=sc.circles,
                theta_law=sc.theta_law, background_c=sc.background_c,
                replications=args.reps, seed=args.seed, tag=tag)
        scenarios.append(sc)
    config = simulation.PipelineConfig(sweeps=args.sweeps)
    records = simulation.run_benchmark(scenarios, methods, out=out_dir,
                                       threads=args.threads, config=config)
    print(simulation.format_table(records), end="")
    if any(r.aborted for r in records):
        print("error: some cells aborted (>10% failed replications)", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


def cmd_render(args) -> int:
    mask = gridio.read_mask(args.mask)
    truth = None
    if args.truth is not None:
        truth = gridio.read_mask(args.truth)
        if truth.shape != mask.shape:
            raise DataFormatError(
                f"mask {mask.shape} and truth {truth.shape} dimensions disagree")
    gridio.write_pgm(args.out, gridio.render_map(mask, truth))
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"simulate": cmd_simulate, "screen": cmd_screen,
                "benchmark": cmd_benchmark, "render": cmd_render}
    try:
        return handlers[args.command](args)
    except (DataFormatError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, DegeneratePosteriorError):
            print("hint: the field carries no posterior signal mass; check that "
                  "the statistics are standardized or try --null empirical",
                  file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
