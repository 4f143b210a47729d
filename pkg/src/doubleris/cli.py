"""Command-line front end: ``doubleris <command> [scenario.cfg] [options]``.

Monte-Carlo heavy commands (``validate``, ``sweep``, ``benchmark``,
``optimize``) shrink both surfaces to 16 elements unless the scenario file
sets their size or ``--full-scale`` is given.  Exit status is 0 only when
every requested check passes.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import DoubleRisError
from .io import write_matrix
from .optimize import PsoSettings, alternating_optimize
from .scenario import (AXES, METHODS, LN2, SweepSpec, echo, parse_scenario, parse_scenario_text,
                       records_to_csv, run_benchmarks, run_sweep, run_validate, scenario_hash)


def _load(args):
    sc = parse_scenario(args.scenario) if args.scenario else parse_scenario_text("")
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        over["trials"] = args.trials
    if getattr(args, "threads", None) is not None:
        over["threads"] = args.threads
    if over:
        sc = replace(sc, **over, explicit=sc.explicit)
    if getattr(args, "full_scale", True) is False:
        sc = sc.at_desk_scale()
    return sc


def _csv_list(text, cast=float):
    return tuple(cast(v) for v in text.replace(",", " ").split())


def cmd_echo(args) -> int:
    sc = _load(args)
    text = echo(sc)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"# scenario hash {scenario_hash(sc)}", file=sys.stderr)
    return 0


def cmd_validate(args) -> int:
    sc = _load(args)
    rep = run_validate(sc, threshold=args.threshold)
    print(f"scenario {scenario_hash(sc)}  M={sc.dims.M} N={sc.dims.N} L1={sc.dims.L1} "
          f"L2={sc.dims.L2}  trials={rep.trials} seed={rep.seed}")
    for line in rep.lines():
        print(line)
    print(f"max relative error {100 * rep.max_rel_error:.2f}% "
          f"(threshold {100 * args.threshold:.1f}%): {'PASS' if rep.passed else 'FAIL'}")
    if args.output:
        rep.to_csv(args.output)
    return 0 if rep.passed else 1


def cmd_sweep(args) -> int:
    sc = _load(args)
    cast = int if args.axis in ("element_count", "antenna_count") else float
    spec = SweepSpec(args.axis, _csv_list(args.values, cast), _csv_list(args.methods, str), args.snr)
    records = run_sweep(sc, spec, output=args.output, timing=args.timing)
    if not args.output:
        sys.stdout.write(records_to_csv(records, timing=args.timing))
    bad = [r for r in records if r.status != "ok"]
    for r in bad:
        print(f"point {r.value} {r.method}: {r.status}", file=sys.stderr)
    return 0 if not bad else 1


def cmd_optimize(args) -> int:
    sc = _load(args)
    snr = args.snr if args.snr is not None else max(sc.snr_db)
    pso = sc.pso
    if args.swarm is not None or args.iterations is not None:
        pso = PsoSettings(**{**pso.__dict__,
                             "swarm_size": args.swarm or pso.swarm_size,
                             "iterations": pso.iterations if args.iterations is None else args.iterations})
    link = sc.link(snr)
    try:
        Q, phases, trace = alternating_optimize(link, pso, sc.solver, common=sc.common_phase,
                                                seed=sc.seed)
    except DoubleRisError as exc:
        print(f"optimisation failed: {exc}", file=sys.stderr)
        trace = getattr(exc, "trace", None)
        if trace is not None and args.output:
            Path(args.output).mkdir(parents=True, exist_ok=True)
            trace.to_csv(Path(args.output) / "trace.csv")
        return 1
    for r in trace.records:
        print(f"iter {r.iteration:3d}  rate {r.rate / LN2:10.5f} bit/s/Hz  {r.wall_ms:10.1f} ms")
    print(f"monotone: {trace.is_monotone()}")
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        trace.to_csv(out / "trace.csv")
        write_matrix(out / "Q.txt", Q.matrix, "Q")
        write_matrix(out / "theta1.txt", phases.theta1[None, :], "theta1")
        write_matrix(out / "theta2.txt", phases.theta2[None, :], "theta2")
    return 0 if trace.is_monotone() else 1


def cmd_benchmark(args) -> int:
    sc = _load(args)
    table = run_benchmarks(sc, args.snr, optimize=args.optimize)
    print(f"scenario {scenario_hash(sc)}  snr {table.snr_db} dB  optimized={args.optimize}")
    for line in table.lines():
        print(line)
    fails = table.ordering_failures()
    print("ordering: " + ("ok" if not fails else "violated: " + ", ".join(fails)))
    if args.output:
        table.to_csv(args.output)
    return 0 if not fails else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="doubleris", description="Double-RIS MIMO rate analysis")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, heavy=True):
        sp.add_argument("scenario", nargs="?", help="scenario file (omit for defaults)")
        sp.add_argument("--output", "-o", help="output path")
        if heavy:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--trials", type=int)
            sp.add_argument("--threads", type=int)
            sp.add_argument("--full-scale", action="store_true",
                            help="keep the scenario's surface size instead of 16 elements")

    sp = sub.add_parser("echo-config", help="print the resolved scenario")
    common(sp, heavy=False)
    sp.set_defaults(func=cmd_echo)

    sp = sub.add_parser("validate", help="asymptotic rate against Monte-Carlo")
    common(sp)
    sp.add_argument("--threshold", type=float, default=0.03)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("sweep", help="rate along one axis, CSV output")
    common(sp)
    sp.add_argument("--axis", choices=AXES, default="snr")
    sp.add_argument("--values", required=True, help="comma-separated grid")
    sp.add_argument("--methods", default="asymptotic", help=f"comma-separated subset of {METHODS}")
    sp.add_argument("--snr", type=float, help="SNR (dB) for non-SNR axes")
    sp.add_argument("--timing", action="store_true", help="add a wall_ms column")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("optimize", help="alternating covariance/phase optimisation")
    common(sp)
    sp.add_argument("--snr", type=float)
    sp.add_argument("--swarm", type=int)
    sp.add_argument("--iterations", type=int)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("benchmark", help="compare the five deployments")
    common(sp)
    sp.add_argument("--snr", type=float)
    sp.add_argument("--optimize", action="store_true")
    sp.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DoubleRisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
