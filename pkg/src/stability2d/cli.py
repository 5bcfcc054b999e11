"""Command line entry point.

Subcommands: ``simulate``, ``path``, ``analyze``, ``filter-probes`` and
``verify-theory``. Exit codes: 0 success, 2 configuration error, 3 data
error, 4 a theory check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import harness
from .config import ConfigError, SimulationConfig, load_config
from .harness import DataError, OutputExistsError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_VERIFY = 0, 2, 3, 4


def _u64(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def _lambda(text):
    if text in ("auto", "auto-1se"):
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--lambda takes a positive real, 'auto' or 'auto-1se', got {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("--lambda must be positive")
    return text


def _common(p, alpha_help):
    p.add_argument("--config", help="sectioned key = value configuration file")
    p.add_argument("--seed", type=_u64, help="master seed")
    p.add_argument("--workers", type=int, help="worker processes / threads")
    p.add_argument("--lambda", dest="lam", type=_lambda, help="real, 'auto' (sqrt(log p / n)) or 'auto-1se'")
    p.add_argument("--alpha", type=float, help=alpha_help)
    p.add_argument("--grid", help="jitter levels lo:hi:count[:log]")
    p.add_argument("--bags", type=int, help="jittered fits per level")
    p.add_argument("--out", help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite an existing run")


def build_parser():
    parser = argparse.ArgumentParser(prog="stability2d", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo campaign: stability and F1 per noise level and method")
    _common(p, "elastic-net l1 weight of the ENet-based methods")
    p.add_argument("--reps", type=int, help="replications per noise level")

    p = sub.add_parser("path", help="selection frequencies along a jitter grid for one dataset")
    _common(p, "l1 weight of the base selector (1 = Lasso)")
    p.add_argument("--delta-obs", type=float, default=0.0, help="observation noise of the dataset")

    p = sub.add_parser("analyze", help="jitter and Stability Selection on a CSV")
    p.add_argument("data", help="CSV with a header row; all cells numeric")
    p.add_argument("--response", required=True, help="name of the response column")
    _common(p, "l1 weight of the base selector (1 = Lasso)")
    p.add_argument("--taus", default="0.6,0.7,0.8,0.9", help="Stability Selection thresholds")
    p.add_argument("--no-standardize", action="store_true", help="use predictors as given")

    p = sub.add_parser("filter-probes", help="drop weakly expressed or flat probes")
    p.add_argument("data", help="samples x probes CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--min-range", type=float, default=2.0)
    p.add_argument("--quantile", type=float, default=25.0)
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("verify-theory", help="Monte Carlo checks of the perturbation bounds")
    p.add_argument("--config", help="configuration file ([theory] section)")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--alpha", type=float, help="probability level of the bounds")
    p.add_argument("--ct", type=float, help="absolute constant of the Gaussian bound")
    p.add_argument("--quick", action="store_true", help="fewer Monte Carlo draws")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    return parser


def _config(args, grid_field):
    cfg = load_config(args.config) if args.config else SimulationConfig()
    changes = {}
    for arg, fld in (("seed", "base_seed"), ("workers", "workers"), ("lam", "lam"), ("bags", "bags"),
                     ("out", "output_dir"), ("grid", grid_field), ("reps", "n_rep")):
        v = getattr(args, arg, None)
        if v is not None:
            changes[fld] = v
    if args.alpha is not None:
        changes["enet_alpha" if args.command == "simulate" else "path_alpha"] = args.alpha
    return dataclasses.replace(cfg, **changes).validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            cfg = _config(args, "grid")
            rows = harness.run_table1(cfg, force=args.force)
            for dobs, method, phi, f1 in rows:
                print(f"delta_obs={harness.fmt(dobs)} {method}: stability={harness.fmt(phi)} f1={harness.fmt(f1)}")
        elif args.command == "path":
            cfg = _config(args, "path_grid")
            harness.run_path(cfg, force=args.force, delta_obs=args.delta_obs)
            print(f"wrote {cfg.output_dir}/path.csv")
        elif args.command == "analyze":
            cfg = _config(args, "grid")
            taus = tuple(float(t) for t in args.taus.split(","))
            if any(not 0.5 < t <= 1 for t in taus):
                raise ConfigError(["thresholds must lie in (0.5, 1]"])
            res = harness.analyze(args.data, args.response, cfg.output_dir, lam=args.lam or "auto-1se",
                                  alpha=cfg.path_alpha, grid=cfg.grid, bags=cfg.bags, taus=taus,
                                  stab_bags=cfg.stab_bags, seed=cfg.base_seed, workers=cfg.workers,
                                  standardize_X=not args.no_standardize, force=args.force)
            print(f"tau_hat={harness.fmt(res.tau_hat) if res.tau_hat is not None else 'none'} "
                  f"selected={len(res.selected)}")
        elif args.command == "filter-probes":
            rep = harness.filter_probes(args.data, args.out, args.min_range, args.quantile, force=args.force)
            print(f"kept {rep['n_kept']} of {rep['n_probes']} probes")
        elif args.command == "verify-theory":
            cfg = load_config(args.config) if args.config else SimulationConfig()
            alpha = cfg.theory_alpha if args.alpha is None else args.alpha
            C_t = cfg.C_t if args.ct is None else args.ct
            if not 0 < alpha < 1 or C_t <= 0:
                raise ConfigError(["alpha must lie in (0, 1) and C_t must be positive"])
            reports = harness.verify_theory(args.out, args.seed, alpha, C_t, force=args.force, quick=args.quick)
            for r in reports:
                print(r.summary())
            if not all(r.passed for r in reports):
                return EXIT_VERIFY
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
