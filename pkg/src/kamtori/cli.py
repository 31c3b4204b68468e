"""Command-line entry points.

Subcommands:

* ``run --config F --out R.json --csv T.csv`` -- full iteration + verdicts
* ``certify-frequency --omega 1,0.618 --tau 1 --kmax 1000``
* ``constants --config F`` -- the evaluated constant chain
* ``selftest`` -- the built-in worked-example battery

Exit codes: 0 success, 1 hypothesis/validation failure, 2 numerical
failure (step abort), 3 I/O error.  Reports are deterministic for a fixed
config, seed and thread-count setting: streams come from the documented
splitmix generator and JSON keys are sorted.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import ConfigError, load_config, prepare_run
from .constants import ScheduleError
from .diophantine import certify
from .engine import (HypothesisError, run_iteration, quadratic_fit_exponent,
                     verify_main_theorem)
from .selftest import run_selftest

__all__ = ["main", "console_main"]

EXIT_OK = 0
EXIT_HYPOTHESIS = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def _dump_json(obj, path=None):
    text = json.dumps(obj, sort_keys=True, indent=1)
    if path is None:
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _write_csv(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _cmd_run(args):
    cfg = load_config(args.config)
    decomp, chain, schedule, options, omega, C = prepare_run(cfg)
    report = run_iteration(decomp, chain, schedule, options, C,
                           theta=cfg.theta)
    if report.completed_steps > 0:
        verify_main_theorem(report, chain, cfg.theta)
    obj = report.to_json_obj()
    obj["config"] = cfg.to_dict()
    obj["omega"] = omega.to_json_obj()
    obj["quadratic_exponent"] = quadratic_fit_exponent(
        report.R_majorants,
        floor=options.floor_rel * max(report.R_majorants[0], 1e-300))
    _dump_json(obj, args.out)
    if args.csv:
        _write_csv(report.csv_rows(), args.csv)
    if report.error is not None:
        print(f"run aborted after {report.completed_steps} steps: "
              f"{report.error}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_certify(args):
    omega = np.array([float(v) for v in args.omega.split(",")])
    cert = certify(omega, args.tau, args.kmax)
    _dump_json({"gamma_min": cert.gamma_min,
                "argmin_k": list(cert.argmin_k),
                "K_max": cert.K_max}, args.out)
    return EXIT_OK


def _cmd_constants(args):
    cfg = load_config(args.config)
    _decomp, chain, schedule, _opts, _omega, _C = prepare_run(cfg)
    _dump_json({"constants_chain": chain.to_json_obj(),
                "schedule": schedule.to_json_obj()}, args.out)
    return EXIT_OK


def _cmd_selftest(_args):
    failures = run_selftest()
    return EXIT_OK if failures == 0 else EXIT_HYPOTHESIS


def _parser():
    p = argparse.ArgumentParser(
        prog="kamtori",
        description="Numerical KAM iteration: small-divisor solves, "
                    "canonical flows, quadratic remainder decay, "
                    "invariant-torus diagnostics.")
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run the iteration from a config")
    runp.add_argument("--config", required=True)
    runp.add_argument("--out", default=None, help="report JSON path")
    runp.add_argument("--csv", default=None, help="per-step CSV path")
    runp.set_defaults(func=_cmd_run)

    cert = sub.add_parser("certify-frequency",
                          help="brute-force Diophantine scan")
    cert.add_argument("--omega", required=True,
                      help="comma-separated components")
    cert.add_argument("--tau", type=float, required=True)
    cert.add_argument("--kmax", type=int, required=True)
    cert.add_argument("--out", default=None)
    cert.set_defaults(func=_cmd_certify)

    cons = sub.add_parser("constants",
                          help="evaluate the constant chain and schedule")
    cons.add_argument("--config", required=True)
    cons.add_argument("--out", default=None)
    cons.set_defaults(func=_cmd_constants)

    st = sub.add_parser("selftest", help="run the worked-example battery")
    st.set_defaults(func=_cmd_selftest)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, HypothesisError, ScheduleError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def console_main():
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
