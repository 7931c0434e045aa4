"""Simulation sweeps over (zeta, eta) compared against the RS theory."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ExperimentConfig
from .datagen import generate_dataset
from .fit import FitConfig, InfeasibleDataError, NonconvergenceError, _Design, fit
from .metrics import (
    UndefinedMetricError,
    empirical_test_metrics,
    theoretical_metrics,
    training_null_omega,
)
from .rs import DivergedError, RSSolution, build_population, rs_solve
from .streams import Purpose, stream, value_key

log = logging.getLogger(__name__)

__all__ = [
    "CSV_HEADER",
    "SweepRow",
    "run_cell",
    "run_sweep",
    "write_csv",
    "read_csv",
    "sweep_to_csv",
]

CSV_HEADER = (
    "zeta,eta,alpha,n,p,reps,sim_w_mean,sim_w_std,sim_v_mean,sim_v_std,"
    "sim_cindex_mean,sim_cindex_std,sim_ribs_mean,sim_ribs_std,"
    "th_w,th_v,th_cindex,th_ribs,rs_residual,rs_iterations"
)
_COLUMNS = CSV_HEADER.split(",")


@dataclass(frozen=True)
class SweepRow:
    zeta: float
    eta: float
    alpha: float
    n: int
    p: int
    reps: int
    sim_w_mean: float
    sim_w_std: float
    sim_v_mean: float
    sim_v_std: float
    sim_cindex_mean: float
    sim_cindex_std: float
    sim_ribs_mean: float
    sim_ribs_std: float
    th_w: float
    th_v: float
    th_cindex: float
    th_ribs: float
    rs_residual: float
    rs_iterations: int
    # not part of the CSV
    failures: int = 0
    low_confidence: bool = False

    def csv_values(self) -> list:
        d = asdict(self)
        return [d[c] for c in _COLUMNS]


@dataclass(frozen=True)
class _RepResult:
    w: float
    v: float
    cindex: float
    ribs: float


def _replicate(cfg: ExperimentConfig, zeta: float, rep: int, etas: Sequence[float]):
    """One training set fitted along ``etas`` (largest first, warm-started).

    Returns one ``_RepResult`` (or ``None`` on failure) per entry of ``etas``.
    """
    model, grid = cfg.model, cfg.grid
    zk = value_key(zeta)
    data = generate_dataset(cfg.n, cfg.p_for(zeta), model, stream(cfg.seed, Purpose.TRAIN, zk, rep))
    out = [None] * len(etas)
    try:
        design = _Design(data, grid)
    except InfeasibleDataError as exc:
        log.warning("zeta=%g rep=%d: %s", zeta, rep, exc)
        return out
    null_om = training_null_omega(data, grid, cfg.alpha)
    prev = None
    for j in sorted(range(len(etas)), key=lambda j: -etas[j]):
        fcfg = FitConfig(eta=etas[j], alpha=cfg.alpha, grad_tol=cfg.grad_tol, max_iter=cfg.fit_max_iter)
        try:
            res = fit(data, grid, fcfg, init=prev, _design=design)
            rep_metrics = empirical_test_metrics(
                res, model, grid, cfg.test_size,
                stream(cfg.seed, Purpose.TEST, zk, rep), data.beta0, null_om,
            )
        except (NonconvergenceError, UndefinedMetricError) as exc:
            log.warning("zeta=%g eta=%g rep=%d failed: %s", zeta, etas[j], rep, exc)
            prev = None
            continue
        prev = res
        out[j] = _RepResult(res.w_hat, res.v_hat, rep_metrics.cindex, rep_metrics.ribs)
    return out


def _theory(cfg: ExperimentConfig, zeta: float, etas: Sequence[float]):
    """RS solutions and predicted metrics along ``etas`` on one population."""
    model, grid = cfg.model, cfg.grid
    zk = value_key(zeta)
    pop = build_population(cfg.population_m, model, grid, stream(cfg.seed, Purpose.RS_POPULATION, zk))
    out = [None] * len(etas)
    prev = None
    for j in sorted(range(len(etas)), key=lambda j: -etas[j]):
        try:
            sol = rs_solve(
                pop, etas[j], cfg.alpha, zeta, tol=cfg.rs_tol, damping=cfg.rs_damping,
                max_iter=cfg.rs_max_iter, init=prev.state if prev is not None else None,
            )
        except DivergedError as exc:
            log.warning("RS solve diverged at zeta=%g eta=%g: %s", zeta, etas[j], exc)
            prev = None
            continue
        report = None
        if sol.converged:
            prev = sol
            report = theoretical_metrics(
                sol, model, grid, cfg.theory_population,
                stream(cfg.seed, Purpose.THEORY_POPULATION, zk),
            )
        out[j] = (sol, report)
    return out


def _mean_std(vals):
    a = np.asarray(vals, dtype=float)
    if a.size == 0:
        return math.nan, math.nan
    if a.size == 1:
        return float(a[0]), 0.0
    return float(a.mean()), float(a.std(ddof=1))


def _row(cfg: ExperimentConfig, zeta, eta, reps: list, theory) -> SweepRow:
    ok = [r for r in reps if r is not None]
    wm, ws = _mean_std([r.w for r in ok])
    vm, vs = _mean_std([r.v for r in ok])
    cm, cs = _mean_std([r.cindex for r in ok])
    rm, rsd = _mean_std([r.ribs for r in ok])
    sol: Optional[RSSolution] = theory[0] if theory is not None else None
    rep = theory[1] if theory is not None else None
    populated = sol is not None and sol.converged and rep is not None
    failures = len(reps) - len(ok)
    if failures:
        log.warning("zeta=%g eta=%g: %d of %d replications failed", zeta, eta, failures, len(reps))
    return SweepRow(
        zeta=zeta, eta=eta, alpha=cfg.alpha, n=cfg.n, p=cfg.p_for(zeta), reps=len(ok),
        sim_w_mean=wm, sim_w_std=ws, sim_v_mean=vm, sim_v_std=vs,
        sim_cindex_mean=cm, sim_cindex_std=cs, sim_ribs_mean=rm, sim_ribs_std=rsd,
        th_w=sol.state.w if populated else math.nan,
        th_v=sol.state.v if populated else math.nan,
        th_cindex=rep.cindex if populated else math.nan,
        th_ribs=rep.ribs if populated else math.nan,
        rs_residual=sol.max_residual if sol is not None else math.nan,
        rs_iterations=sol.iterations if sol is not None else 0,
        failures=failures,
        low_confidence=len(ok) < 2,
    )


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(fn, *t) for t in tasks]
        return [f.result() for f in futures]


def run_cell(cfg: ExperimentConfig, zeta: float, eta: float) -> SweepRow:
    """All replications and the theory for a single ``(zeta, eta)``, cold-started."""
    workers = cfg.effective_workers()
    reps = _map(_replicate, [(cfg, zeta, r, [eta]) for r in range(cfg.reps)], workers)
    theory = _theory(cfg, zeta, [eta])[0]
    return _row(cfg, zeta, eta, [r[0] for r in reps], theory)


def run_sweep(cfg: ExperimentConfig) -> list:
    """One :class:`SweepRow` per ``(zeta, eta)``, ``zeta`` major, in grid order."""
    workers = cfg.effective_workers()
    etas = list(cfg.eta_grid)
    tasks = [(cfg, z, r, etas) for z in cfg.zeta_grid for r in range(cfg.reps)]
    theory_tasks = [(cfg, z, etas) for z in cfg.zeta_grid]
    rep_results = _map(_replicate, tasks, workers)
    theory_results = _map(_theory, theory_tasks, workers)
    rows = []
    for iz, z in enumerate(cfg.zeta_grid):
        per_rep = rep_results[iz * cfg.reps : (iz + 1) * cfg.reps]
        for j, eta in enumerate(etas):
            rows.append(_row(cfg, z, eta, [r[j] for r in per_rep], theory_results[iz][j]))
    return rows


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row.csv_values()) + "\n")
    return buf.getvalue()


def write_csv(rows: Sequence[SweepRow], path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            fh.write(sweep_to_csv(rows))
    except OSError as exc:
        raise OSError(f"cannot write sweep CSV {path}: {exc.strerror or exc}") from exc
    return path


_INT_COLUMNS = {"n", "p", "reps", "rs_iterations"}


def read_csv(path) -> list:
    """Rows of a sweep CSV as :class:`SweepRow` objects."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or ",".join(header) != CSV_HEADER:
                raise ValueError(f"{path} does not have the sweep CSV header")
            rows = []
            for rec in reader:
                vals = {c: (int(v) if c in _INT_COLUMNS else float(v)) for c, v in zip(header, rec)}
                rows.append(SweepRow(**vals))
    except OSError as exc:
        raise OSError(f"cannot read sweep CSV {path}: {exc.strerror or exc}") from exc
    return rows
