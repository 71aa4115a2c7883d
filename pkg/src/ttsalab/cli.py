"""Command line entry point: ``ttsalab {run,theory,order,check}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .asymptotics import HurwitzError
from .chains import ChainError, GraphError
from .harness import (
    ConfigError,
    ExperimentConfig,
    build_setup,
    check_report,
    load_config,
    ordering_report,
    run_experiment,
    theory_model,
)
from .applications import FormatError
from .ttsa import TTSADivergence

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("ttsalab")


def _print_json(obj):
    json.dump(obj, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")


def cmd_run(args):
    cfg = load_config(args.config)
    if args.output:
        cfg.output_dir = args.output
    files = run_experiment(cfg, workers=args.workers)
    for f in files:
        print(f)
    return EXIT_OK


def _theory_config(args):
    if args.config:
        return load_config(args.config)
    params = {}
    for item in args.param or ():
        key, _, val = item.partition("=")
        if not _:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        try:
            params[key] = json.loads(val)
        except ValueError:
            params[key] = val
    return ExperimentConfig.from_dict({
        "application": args.application,
        "application_params": params,
        "sampler": {"kind": args.sampler},
        "schedule": {"a": args.a, "b": args.b},
        "n_steps": 1,
        "n_trials": 1,
    })


def cmd_theory(args):
    if not args.config and not args.application:
        raise ConfigError("give an application name or --config")
    cfg = _theory_config(args)
    setup = build_setup(cfg)
    model = theory_model(setup, cfg.schedule, seed=cfg.master_seed)
    out = model.to_dict()
    out.update(application=cfg.application, x_star=setup.x_star.tolist(), y_star=setup.y_star.tolist())
    _print_json(out)
    return EXIT_OK


def cmd_order(args):
    cfg = load_config(args.config)
    setup = build_setup(cfg)
    if setup.compare_spec is None:
        raise ConfigError("order needs both 'sampler' and 'compare_sampler' in the config")
    rep = ordering_report(setup.drift, setup.spec, setup.compare_spec, setup.x_star, setup.y_star, cfg.schedule,
                          method=args.method, horizon=args.horizon, trials=args.trials, seed=cfg.master_seed)
    if args.output:
        with open(args.output, "w") as fh:
            json.dump(rep, fh, indent=1, sort_keys=True)
    _print_json({k: v for k, v in rep.items() if k not in ("a", "b")} | {
        "trace_U": [rep["a"]["trace_U"], rep["b"]["trace_U"]],
        "trace_V_x": [rep["a"]["trace_V_x"], rep["b"]["trace_V_x"]],
    })
    return EXIT_OK


def cmd_check(args):
    problems = check_report(args.directory)
    for p in problems:
        print(p, file=sys.stderr)
    if problems:
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="ttsalab", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a JSON or TOML config")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="override the output directory")
    p.add_argument("-j", "--workers", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("theory", help="print the asymptotic covariance model")
    p.add_argument("application", nargs="?", choices=["momentum-sgd", "sgda", "gtd2", "tdc"])
    p.add_argument("--config")
    p.add_argument("--sampler", default=None)
    p.add_argument("-a", type=float, default=0.501)
    p.add_argument("-b", type=float, default=0.6)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("order", help="compare two samplers by sampling covariance")
    p.add_argument("config")
    p.add_argument("--method", choices=["auto", "closed", "mc"], default="auto")
    p.add_argument("--horizon", type=int, default=100_000)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("check", help="validate a report directory")
    p.add_argument("directory")
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "sampler", "x") is None:
        args.sampler = "finite-chain" if args.application in ("gtd2", "tdc") else "iid"
    try:
        return args.func(args)
    except (ConfigError, FormatError, GraphError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TTSADivergence, HurwitzError, ChainError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
