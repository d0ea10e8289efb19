"""Command-line entry point: simulate, sweep, analytic, verify."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .diagnostics import Tolerances, admissibility_report, read_diagnostics_csv
from .errors import BlowupError, StratVortexError
from .experiments import (
    PRESETS,
    apply_overrides,
    default_output_dir,
    load_config,
    preset,
    run_sweep,
    write_run_outputs,
)

log = logging.getLogger("stratvortex")


def _overrides(args) -> dict:
    out = {}
    for item in args.set or ():
        if "=" not in item:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    if getattr(args, "h", None) is not None:
        out["grid.h"] = args.h
    if getattr(args, "H", None) is not None:
        out["profile.H"] = args.H
    if getattr(args, "t_end", None) is not None:
        out["t_end"] = args.t_end
        out.setdefault("snapshot_times", ",".join(
            str(t) for t in (3.0, 7.0, 8.0, 9.0, 14.0) if t <= args.t_end) or "0")
    return out


def _tolerances(args) -> Tolerances:
    return Tolerances(energy=args.energy_tol, mass=args.mass_tol, f_rel=args.f_tol, h_rel=args.h_tol)


def _add_tolerance_args(p):
    d = Tolerances()
    p.add_argument("--energy-tol", type=float, default=d.energy, help="energy drift / initial KE")
    p.add_argument("--mass-tol", type=float, default=d.mass, help="relative mass drift")
    p.add_argument("--f-tol", type=float, default=d.f_rel, help="allowed rise of F, relative to |F(0)|")
    p.add_argument("--h-tol", type=float, default=d.h_rel, help="allowed rise of H_nonl, relative to its max")


def cmd_simulate(args) -> int:
    from .solver import run

    cfg = load_config(args.config) if args.config else preset(args.preset)
    cfg = apply_overrides(cfg, _overrides(args))
    out_dir = args.out or cfg.output_dir or default_output_dir(cfg.name)
    cfg = dataclasses.replace(cfg, output_dir=out_dir)

    def progress(n, state):
        if n % 100 == 0:
            log.info("step %d  t=%.3f s", n, state.t)

    try:
        snapshots, report = run(cfg, progress=progress)
    except BlowupError as exc:
        print(f"blowup: {exc}", file=sys.stderr)
        return 2
    verdict = report.evaluate(_tolerances(args))
    write_run_outputs(cfg, snapshots, report, out_dir)
    print(f"{cfg.name}: {report.steps} steps, outputs in {out_dir}")
    print("\n".join(verdict.lines()))
    return 0 if verdict.passed else 1


def cmd_sweep(args) -> int:
    names = [n.strip() for n in args.presets.split(",") if n.strip()]
    out_dir = args.out or default_output_dir("sweep")
    result = run_sweep(names, _overrides(args), workers=args.workers, output_dir=out_dir,
                       tol=_tolerances(args))
    print(result.table())
    ok = all(r.error is None and r.report.verdict.passed for r in result.rows)
    return 0 if ok else 1


def cmd_analytic(args) -> int:
    from .analytic import oracle_checks

    rows = oracle_checks()
    for name, passed, detail in rows:
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return 0 if all(p for _, p, _ in rows) else 1


def cmd_verify(args) -> int:
    try:
        series = read_diagnostics_csv(args.path)
        verdict = admissibility_report(series, _tolerances(args))
    except (OSError, StratVortexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print("\n".join(verdict.lines()))
    return 0 if verdict.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratvortex", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario")
    p.add_argument("--preset", default="baseline", choices=PRESETS)
    p.add_argument("--config", help="key=value scenario file")
    p.add_argument("--h", type=float, help="grid spacing [m]")
    p.add_argument("--H", type=float, help="stratification scale [m]")
    p.add_argument("--t-end", dest="t_end", type=float, help="end time [s]")
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted config override")
    _add_tolerance_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run several presets and compare mixing")
    p.add_argument("--presets", required=True, help="comma separated preset names")
    p.add_argument("--h", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    _add_tolerance_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analytic", help="closed-form vortex checks")
    p.add_argument("--check", action="store_true", required=True)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("verify", help="admissibility verdicts for a saved diagnostics.csv")
    p.add_argument("path")
    _add_tolerance_args(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
