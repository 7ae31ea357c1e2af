"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 I/O failure, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import design, detection, spectral
from .config import RunConfig, make_grid
from .errors import (FitDegenerate, InvalidArgument, InvalidConfiguration, MaxIterations,
                     NoSwitchingPossible, RootNotBracketed)

EXIT_OK, EXIT_INPUT, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
log = logging.getLogger("spfl")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_config(path: str) -> RunConfig:
    try:
        return RunConfig.load(path)
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_IO) from None


def _parse_grid(text: str):
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise CliError(f"grid must be start:stop:step, got {text!r}", EXIT_INPUT) from None
    try:
        return make_grid(start, stop, step)
    except InvalidArgument as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def _parse_floats(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"{name}: expected comma-separated numbers, got {text!r}", EXIT_INPUT) from None


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc}", EXIT_IO) from None
    log.info("wrote %s", out)


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    grid = _parse_grid(args.grid) if args.grid else cfg.grid()
    seed = cfg["run.seed"] if args.seed is None else args.seed
    n_gates = cfg["run.n_gates"] if args.n_gates is None else args.n_gates
    averaged = cfg["run.averaged"]
    if args.montecarlo:
        curve = detection.sweep_experiment(cfg.spectral(), cfg.source(), cfg.detectors(), grid,
                                           n_gates, seed, averaged=averaged,
                                           batch_size=cfg["run.batch_size"])
    else:
        curve = spectral.analytic_sweep(cfg.spectral(), grid, averaged=True)
    _emit(curve.to_csv(), args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    init = _parse_floats(args.init, "--init")
    if len(init) != 3:
        raise CliError("--init needs xi_same,xi_diff,alpha", EXIT_INPUT)
    try:
        curve = spectral.SweepCurve.from_csv(args.data)
    except OSError as exc:
        raise CliError(f"cannot read {args.data}: {exc}", EXIT_IO) from None
    res = spectral.fit_sweep(curve, init, args.lambda_p0, weighted=args.weighted)
    print(f"xi_same={res.xi_same!r} xi_diff={res.xi_diff!r} alpha={res.alpha!r} "
          f"residual={res.residual!r}")
    report = {
        "data": str(args.data),
        "initial": init,
        "lambda_p0_nm": args.lambda_p0,
        "xi_same_cps": res.xi_same,
        "xi_diff_cps": res.xi_diff,
        "alpha_ps2": res.alpha,
        "residual": res.residual,
        "iterations": res.iterations,
    }
    path = args.report or str(Path(args.data).with_suffix(".fit.json"))
    _emit(json.dumps(report, indent=2) + "\n", path)
    return EXIT_OK


def cmd_design(args) -> int:
    if args.n_max < 0:
        raise CliError("--n-max must be >= 0", EXIT_INPUT)
    cfg = _load_config(args.config)
    table = design.switching_table(cfg["loop.smf_beta2_ps2_per_m"], cfg["loop.smf1_length_m"],
                                   cfg["loop.smf2_length_m"], cfg["spectral.lambda_p0_nm"],
                                   args.n_max)
    _emit(table.to_csv(), args.out)
    return EXIT_OK


def cmd_power(args) -> int:
    cfg = _load_config(args.config)
    powers = _parse_floats(args.powers, "--powers")
    dl = cfg["run.power_delta_lambda_nm"] if args.delta_lambda is None else args.delta_lambda
    seed = cfg["run.seed"] if args.seed is None else args.seed
    n_gates = cfg["run.n_gates"] if args.n_gates is None else args.n_gates
    routing = detection.routing_at(cfg.spectral(), dl, cfg["run.averaged"])
    pts = detection.power_sweep(cfg.source(), cfg.detectors(), routing, powers, n_gates, seed,
                                batch_size=cfg["run.batch_size"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["power_mw", "ct_same", "ct_diff", "err_same", "err_diff"])
    for p in pts:
        w.writerow([repr(p.power_mw), repr(p.ct_same), repr(p.ct_diff),
                    repr(p.err_same), repr(p.err_diff)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_config(args) -> int:
    cfg = _load_config(args.config)
    _emit(cfg.to_text(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spfl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="coincidence fringe versus detuning")
    s.add_argument("--config", default="setup", help="config file, or 'setup' for the bundled one")
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--analytic", action="store_true", help="passband-averaged model (default)")
    mode.add_argument("--montecarlo", action="store_true", help="simulated counting experiment")
    s.add_argument("--grid", help="start:stop:step in nm (inclusive)")
    s.add_argument("--seed", type=int)
    s.add_argument("--n-gates", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    f = sub.add_parser("fit", help="fit xi_same, xi_diff, alpha to a sweep CSV")
    f.add_argument("--data", required=True)
    f.add_argument("--init", required=True, help="xi_same,xi_diff,alpha")
    f.add_argument("--lambda-p0", type=float, default=1547.5)
    f.add_argument("--weighted", action="store_true", help="weight residuals by err columns")
    f.add_argument("--report", help="JSON report path (default: <data>.fit.json)")
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("design", help="switching table for orders 0..n-max")
    d.add_argument("--config", default="setup")
    d.add_argument("--n-max", type=int, required=True)
    d.add_argument("--out")
    d.set_defaults(func=cmd_design)

    w = sub.add_parser("power", help="Monte Carlo C_T versus pump power")
    w.add_argument("--config", default="setup")
    w.add_argument("--powers", required=True, help="comma-separated powers in mW")
    w.add_argument("--delta-lambda", type=float)
    w.add_argument("--seed", type=int)
    w.add_argument("--n-gates", type=int)
    w.add_argument("--out")
    w.set_defaults(func=cmd_power)

    c = sub.add_parser("config", help="print a config in canonical form")
    c.add_argument("--config", default="setup")
    c.add_argument("--out")
    c.set_defaults(func=cmd_config)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (FitDegenerate, MaxIterations, NoSwitchingPossible, RootNotBracketed) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidArgument, InvalidConfiguration) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
