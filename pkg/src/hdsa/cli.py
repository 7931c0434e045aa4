"""Command line interface.

Exit status: 0 on success, 1 on usage or configuration errors, 2 on numerical
failure (non-convergence, divergence, infeasible data).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .datagen import Dataset, generate_dataset, write_dataset_csv
from .fit import FitConfig, InfeasibleDataError, NonconvergenceError, fit
from .harness import read_csv, run_sweep, write_csv
from .rs import DivergedError, build_population, rs_solve
from .streams import Purpose, stream, value_key

log = logging.getLogger("hdsa")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--quiet", action="store_true", help="only print errors")

    cell = _Parser(add_help=False)
    cell.add_argument("--zeta", type=float, help="p/n ratio (default: first of zeta_grid)")
    cell.add_argument("--eta", type=float, help="ridge strength (default: first of eta_grid)")

    parser = _Parser(prog="hdsa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    sub.add_parser("gen", parents=[common, cell], help="simulate and dump one dataset")
    p_fit = sub.add_parser("fit", parents=[common, cell], help="fit one dataset")
    p_fit.add_argument("--data", type=Path, help="dataset CSV (id,time,status,x1..xp) instead of simulating")
    sub.add_parser("rs", parents=[common, cell], help="solve the RS equations for one (zeta, eta)")
    p_sw = sub.add_parser("sweep", parents=[common], help="run the full (zeta, eta) experiment")
    p_sw.add_argument("--no-plots", action="store_true", help="skip the figures")
    p_pl = sub.add_parser("plot", parents=[common], help="render figures from a sweep CSV")
    p_pl.add_argument("csv", type=Path)
    p_pl.add_argument("--format", default="svg", choices=["svg", "png", "pdf"])
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return cfg.with_overrides(seed=args.seed)


def _cell(args, cfg):
    zeta = args.zeta if args.zeta is not None else cfg.zeta_grid[0]
    eta = args.eta if args.eta is not None else cfg.eta_grid[0]
    if zeta <= 0 or eta <= 0:
        raise UsageError("--zeta and --eta must be > 0")
    return zeta, eta


def _simulate(cfg, zeta) -> Dataset:
    return generate_dataset(
        cfg.n, cfg.p_for(zeta), cfg.model, stream(cfg.seed, Purpose.TRAIN, value_key(zeta), 0)
    )


def _read_dataset(path: Path) -> Dataset:
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:3] != ["id", "time", "status"]:
                raise ConfigError(f"{path}: expected header id,time,status,x1..xp")
            recs = np.array([[float(v) for v in r] for r in reader if r], dtype=float)
    except FileNotFoundError:
        raise ConfigError(f"dataset file not found: {path}") from None
    p = len(header) - 3
    recs = recs.reshape(-1, 3 + p)
    X = recs[:, 3:]
    return Dataset(X=X, T=recs[:, 1], delta=recs[:, 2].astype(int), theta=np.full(len(recs), np.nan), beta0=np.zeros(p))


def _emit(lines, quiet):
    if not quiet:
        print("\n".join(lines))


def _fmt_vec(a):
    return "[" + ", ".join(format(float(x), ".10g") for x in a) + "]"


def cmd_gen(args, cfg):
    zeta, _ = _cell(args, cfg)
    data = _simulate(cfg, zeta)
    out = (args.out or Path(".")) / "dataset.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(data, out)
    _emit([f"wrote {out} (n={data.n}, p={data.p}, censored={data.censored_fraction:.4f})"], args.quiet)
    return EXIT_OK


def cmd_fit(args, cfg):
    zeta, eta = _cell(args, cfg)
    data = _read_dataset(args.data) if args.data else _simulate(cfg, zeta)
    res = fit(data, cfg.grid, FitConfig(eta=eta, alpha=cfg.alpha, grad_tol=cfg.grad_tol, max_iter=cfg.fit_max_iter))
    _emit(
        [
            f"n: {data.n}",
            f"p: {data.p}",
            f"eta: {eta:g}",
            f"alpha: {cfg.alpha:g}",
            f"objective: {res.objective:.17g}",
            f"grad_norm: {res.grad_norm:.3e}",
            f"iterations: {res.iterations}",
            f"w_hat: {res.w_hat:.10g}",
            f"v_hat: {res.v_hat:.10g}",
            f"beta_norm: {np.linalg.norm(res.beta_hat):.10g}",
            f"omega_hat: {_fmt_vec(res.omega_hat)}",
        ],
        args.quiet,
    )
    return EXIT_OK


def cmd_rs(args, cfg):
    zeta, eta = _cell(args, cfg)
    pop = build_population(
        cfg.population_m, cfg.model, cfg.grid, stream(cfg.seed, Purpose.RS_POPULATION, value_key(zeta))
    )
    sol = rs_solve(pop, eta, cfg.alpha, zeta, tol=cfg.rs_tol, damping=cfg.rs_damping, max_iter=cfg.rs_max_iter)
    s = sol.state
    lines = [
        f"zeta: {zeta:g}",
        f"eta: {eta:g}",
        f"alpha: {cfg.alpha:g}",
        f"m: {pop.m}",
        f"w: {s.w:.12g}",
        f"v: {s.v:.12g}",
        f"nu: {s.nu:.12g}",
        f"tau: {sol.tau:.12g}",
        f"phi: {sol.phi:.12g}",
        f"omega: {_fmt_vec(s.omega)}",
        f"iterations: {sol.iterations}",
        f"converged: {sol.converged}",
    ] + [f"residual_{k}: {v:.3e}" for k, v in sol.residuals.items()]
    _emit(lines, args.quiet)
    if not sol.converged:
        print(f"hdsa: RS iteration did not reach tol {cfg.rs_tol:g}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sweep(args, cfg):
    from .plotting import plot_sweep

    out = args.out or Path("out")
    rows = run_sweep(cfg)
    path = write_csv(rows, out / "sweep.csv")
    lines = [f"wrote {path} ({len(rows)} rows)"]
    if not args.no_plots:
        lines += [f"wrote {p}" for p in plot_sweep(rows, out)]
    _emit(lines, args.quiet)
    return EXIT_OK


def cmd_plot(args, cfg):
    from .plotting import plot_sweep

    if not args.csv.exists():
        raise ConfigError(f"sweep CSV not found: {args.csv}")
    try:
        rows = read_csv(args.csv)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = args.out or args.csv.parent
    _emit([f"wrote {p}" for p in plot_sweep(rows, out, fmt=args.format)], args.quiet)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "fit": cmd_fit, "rs": cmd_rs, "sweep": cmd_sweep, "plot": cmd_plot}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.WARNING,
        format="%(name)s: %(levelname)s: %(message)s",
    )
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"hdsa: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonconvergenceError, DivergedError, InfeasibleDataError, FloatingPointError) as exc:
        print(f"hdsa: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"hdsa: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
