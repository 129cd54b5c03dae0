"""Command-line interface.

Subcommands::

    gpfbst droplet   [--data PATH] [--config PATH] [--alpha A] [--epsilon E|stokes]
                     [--measure uniform|dp:TAU:LO:HI] [--seed S] [--out DIR]
    gpfbst test      --data PATH [same options]
    gpfbst threshold [--data PATH] [--delta D] [--eta H] [--ks K]
    gpfbst draws     [--data PATH] [--config PATH] [--seed S] [--out DIR]

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import experiment
from .exceptions import ConfigError, DataError, FbstError, NegativeRadicand, NumericalError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _common(p, data_required=False):
    p.add_argument("--data", required=data_required, help="CSV with header t,radius[,v_mean]")
    p.add_argument("--config", help="flat key = value file with dotted keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")


def _testing(p):
    p.add_argument("--alpha", type=float)
    p.add_argument("--epsilon", help="pragmatic tolerance, or 'stokes' to derive it")
    p.add_argument("--measure", help="uniform or dp:TAU:LO:HI (applies to both domains)")
    p.add_argument("--grid", help="'continuous', 'lo:hi:step' or comma-separated points")
    p.add_argument("--hypotheses", help="comma-separated presets or file:PATH bases")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="gpfbst", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("droplet", help="reproduce the water-droplet analysis")
    _common(p)
    _testing(p)

    p = sub.add_parser("test", help="run the tests on a custom dataset")
    _common(p, data_required=True)
    _testing(p)

    p = sub.add_parser("threshold", help="derive epsilon from the velocity column")
    p.add_argument("--data")
    p.add_argument("--delta", type=float, default=experiment.STOKES_DELTA)
    p.add_argument("--eta", type=float, default=experiment.STOKES_ETA)
    p.add_argument("--ks", type=float, default=experiment.STOKES_KS)

    p = sub.add_parser("draws", help="emit prior and posterior GP sample paths")
    _common(p)
    p.add_argument("--count", type=int)
    return parser


def resolve_config(args, droplet):
    config = experiment.ExperimentConfig.droplet() if droplet else experiment.ExperimentConfig()
    if args.config:
        experiment.apply_settings(config, experiment.read_config_file(args.config))
    overrides = {
        "data_path": args.data,
        "seed": args.seed,
        "output_dir": args.out,
        "alpha": getattr(args, "alpha", None),
        "draw_count": getattr(args, "count", None),
    }
    for attr, value in overrides.items():
        if value is not None:
            setattr(config, attr, value)
    if getattr(args, "epsilon", None) is not None:
        config.epsilon = experiment.parse_epsilon(args.epsilon)
    if getattr(args, "measure", None) is not None:
        config.measure_finite = config.measure_infinite = args.measure
    if getattr(args, "grid", None) is not None:
        config.grid = experiment.parse_grid(args.grid)
    if getattr(args, "hypotheses", None) is not None:
        config.hypotheses = [h.strip() for h in args.hypotheses.split(",") if h.strip()]
    return config.validate()


def print_table(rows, out=None):
    out = out or sys.stdout
    print(f"{'hypothesis':<18}{'domain':<10}{'pragmatic':<11}{'e_value':>12}  decision",
          file=out)
    for r in rows:
        decision = "reject" if r.outcome.reject else "not reject"
        print(f"{r.hypothesis:<18}{r.domain_assumption:<10}{str(r.pragmatic).lower():<11}"
              f"{r.outcome.e_value:>12.4g}  {decision}", file=out)


def cmd_run(args, droplet):
    config = resolve_config(args, droplet)
    if droplet and not Path(config.data_path).exists():
        raise DataError(f"droplet data not found at {config.data_path}; pass --data or set "
                        f"{experiment.DROPLET_ENV}")
    rows = experiment.run(config, droplet=droplet)
    print_table(rows)
    print(f"wrote {config.output_dir}/evalues.csv")
    return EXIT_OK


def cmd_threshold(args):
    path = args.data or experiment.droplet_fixture_path()
    ds = experiment.load_dataset(path, droplet=True)
    if ds.v_mean is None:
        raise DataError(f"{path} has no v_mean column")
    eps_inf, eps_l2 = experiment.stokes_threshold(ds.v_mean, ds.y, args.delta, args.eta,
                                                  args.ks, t=ds.x[:, 0])
    print(f"eps_inf = {eps_inf:.4f}")
    print(f"eps_l2 = {eps_l2:.4f}  (n = {len(ds)})")
    return EXIT_OK


def cmd_draws(args):
    config = resolve_config(args, droplet=args.data is None)
    ds = experiment.load_dataset(config.data_path, config.x_columns, config.y_column)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    x, y = experiment.canonical_order(ds.x, ds.y)
    for name in experiment.emit_draws(config, x, y, out):
        print(f"wrote {out / name}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "droplet":
            return cmd_run(args, droplet=True)
        if args.command == "test":
            return cmd_run(args, droplet=False)
        if args.command == "threshold":
            return cmd_threshold(args)
        return cmd_draws(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, NegativeRadicand, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FbstError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
