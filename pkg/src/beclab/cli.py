"""Command line entry point: ``beclab <subcommand>``.

Exit codes: 0 ok, 1 configuration error, 2 solver non-convergence,
3 property violation, 4 budget refusal. Failures also print one JSON error
record on standard error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .cache import CacheError
from .chaos import ChaosReport, tv_density
from .config import ConfigError, RunConfig, load_config
from .core import DomainError, GridFunction, drift_from_density
from .flow import ConvergenceError, MonotonicityError
from .nbody import BudgetError, marginal_density, nbody_drift_component
from .nelson import (FieldDrift, SymmetricDrift, empirical_density, sample_density, simulate,
                     write_ensemble_csv)
from .pipeline import Session, ensure_dir
from .scattering import scattering_limit_sweep

EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_PROPERTY, EXIT_BUDGET = 1, 2, 3, 4


class PropertyViolation(RuntimeError):
    def __init__(self, failed: list[str]):
        super().__init__(f"{len(failed)} properties violated: {', '.join(failed)}")
        self.failed = failed


# -- serialization ------------------------------------------------------------

def _num(x) -> str:
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    text = json.dumps(_jsonable(obj), indent=2, ensure_ascii=False, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_bytes(buf.getvalue().encode("utf-8"))


def _table(pairs: list[tuple[str, float]]) -> str:
    width = max(len(k) for k, _ in pairs)
    return "\n".join(f"{k:<{width}}  {v: .10f}" for k, v in pairs)


# -- subcommands ----------------------------------------------------------------

def cmd_solve_nls(session: Session, args) -> int:
    sol = session.nls()
    rows = [("E", sol.energy), ("kinetic", sol.kinetic), ("trap", sol.trap),
            ("interaction", sol.interaction), ("mu", sol.mu), ("residual", sol.residual)]
    print(_table(rows))
    if sol.boundary_warning:
        print("warning: ground state does not vanish near the box faces", file=sys.stderr)
    out = ensure_dir(args.out)
    write_json(out / "nls.json", {"g": sol.coupling, **{k: v for k, v in rows},
                                  "boundaryWarning": sol.boundary_warning})
    return 0


def cmd_solve_nbody(session: Session, args) -> int:
    st = session.nbody(args.N, args.beta)
    rows = [("E_N", st.energy), ("E_N/N", st.energy / st.N), ("kinetic", st.kinetic),
            ("trap", st.trap), ("interaction", st.interaction), ("residual", st.residual)]
    print(_table(rows))
    out = ensure_dir(args.out)
    write_json(out / f"nbody_N{st.N}_beta{st.beta:g}.json",
               {"N": st.N, "beta": st.beta, **{k: v for k, v in rows}})
    return 0


def cmd_scattering(session: Session, args) -> int:
    sc = session.cfg.scattering
    rows = scattering_limit_sweep(sc.potential(), sc.beta, sc.Ns)
    table = [[r.N, r.a, r.four_pi_a, r.g, r.gap] for r in rows]
    out = ensure_dir(args.out)
    write_csv(out / "scattering.csv", ["N", "a_N", "4pi_a_N", "g", "gap"], table)
    for r in rows:
        print(f"N={r.N:<6d} a={r.a:.12g}  4pi a={r.four_pi_a:.12g}  g={r.g:.12g}  gap={r.gap:.3e}")
    return 0


def cmd_simulate(session: Session, args) -> int:
    grid = session.grid
    params = session.sde_params()
    if args.N == 1:
        rho = GridFunction(grid, session.nls().phi.values ** 2)
        drift = FieldDrift(grid, drift_from_density(rho).components)
        target = rho
    else:
        st = session.nbody(args.N, args.beta)
        rho = GridFunction(grid, st.density(), st.N)
        drift = SymmetricDrift(grid, nbody_drift_component(st).values)
        target = marginal_density(st, 1)
    init = sample_density(rho, params.M, params.seed)
    ens = simulate(drift, init, params)
    out = ensure_dir(args.out)
    write_ensemble_csv(ens, out / "ensemble.csv")
    tvs = [tv_density(empirical_density(ens, 0, (t, t), grid), target) for t in ens.times]
    summary = {"N": args.N, "beta": args.beta, "M": params.M, "T": params.T, "dt": params.dt,
               "seed": params.seed, "tvInitial": tvs[0], "tvFinal": tvs[-1], "tvMax": max(tvs)}
    write_json(out / "stationarity.json", summary)
    print(json.dumps(_jsonable(summary)))
    return 0


def _report_doc(cell) -> dict:
    doc = cell.report.as_dict()
    doc["diagnostics"] = {**cell.diagnostics, "kacBound": cell.kac_bound}
    return doc


def cmd_chaos_report(session: Session, args) -> int:
    cell = session.chaos_cell(args.N, args.beta, args.t)
    out = ensure_dir(args.out)
    doc = _report_doc(cell)
    write_json(out / f"chaos_N{args.N}_beta{args.beta:g}.json", doc)
    print(json.dumps(_jsonable(doc), indent=2, ensure_ascii=False))
    return 0


def _sweep_cell(payload):
    cfg, use_cache, cache_root, seed, N, beta = payload
    return Session(cfg, use_cache, cache_root, seed).chaos_cell(N, beta)


TREND_FIELDS = ("driftMismatch", "normalizedEntropy", "kacMetric")


def sweep_rows(cells: list, betas, Ns) -> tuple[list[str], list[list]]:
    header = list(ChaosReport.FIELDS) + ["kacBound", "kacBoundOK", "kMarginalTV1", "trendOK"]
    rows = []
    by_key = {(c.report.N, c.report.beta): c for c in cells}
    for beta in betas:
        prev = None
        for N in Ns:
            c = by_key[(N, float(beta))]
            r = c.report
            trend = True
            if prev is not None:
                trend = all(getattr(r, f) <= getattr(prev, f) for f in TREND_FIELDS)
                trend = trend and r.kMarginalTV[0] <= prev.kMarginalTV[0]
            rows.append(r.csv_row() + [_num(c.kac_bound), str(c.kac_ok).lower(),
                                       _num(r.kMarginalTV[0]), str(trend).lower()])
            prev = r
    return header, rows


def cmd_sweep(session: Session, args) -> int:
    cfg = session.cfg
    Ns = sorted(cfg.sweep.N)
    jobs = [(cfg, session.use_cache, session.cache_root, session.seed, N, float(b))
            for b in cfg.sweep.beta for N in Ns]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            cells = list(pool.map(_sweep_cell, jobs))
    else:
        cells = [session.chaos_cell(N, b) for (_, _, _, _, N, b) in jobs]
    out = ensure_dir(args.out)
    for c in cells:
        write_json(out / f"chaos_N{c.report.N}_beta{c.report.beta:g}.json", _report_doc(c))
    header, rows = sweep_rows(cells, cfg.sweep.beta, Ns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    (out / "sweep.csv").write_bytes(buf.getvalue().encode("utf-8"))
    trends = all(r[-1] == "true" for r in rows)
    bounds = all(r[-3] == "true" for r in rows)
    print(f"{len(cells)} cells; trends {'ok' if trends else 'BROKEN'}; "
          f"kac bounds {'ok' if bounds else 'BROKEN'}")
    return 0


def cmd_verify(session: Session, args) -> int:
    from .properties import run_all
    results = run_all(session, log=lambda s: print(s, flush=True))
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)} passed, {len(failed)} failed")
    out = ensure_dir(args.out)
    write_json(out / "verify.json", [r.as_dict() for r in results])
    if failed:
        raise PropertyViolation(failed)
    return 0


COMMANDS = {"solve-nls": cmd_solve_nls, "solve-nbody": cmd_solve_nbody,
            "scattering": cmd_scattering, "simulate": cmd_simulate,
            "chaos-report": cmd_chaos_report, "sweep": cmd_sweep, "verify": cmd_verify}


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="INI run configuration")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--seed", type=_u64, default=None)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--no-cache", action="store_true")
    common.add_argument("--cache", default=None, help="cache directory (else $BECLAB_CACHE)")
    parser = argparse.ArgumentParser(prog="beclab", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("solve-nbody", "simulate", "chaos-report"):
            p.add_argument("--N", type=int, default=1 if name == "simulate" else 2)
            p.add_argument("--beta", type=float, default=0.5)
        if name == "chaos-report":
            p.add_argument("--t", type=float, default=None)
    return parser


def _error(kind: str, code: int, exc: BaseException, **extra) -> int:
    record = {"error": kind, "exit_code": code, "message": str(exc), **extra}
    print(json.dumps(_jsonable(record), sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _error("usage", EXIT_CONFIG, ValueError("invalid command line"))
    try:
        cfg: RunConfig = load_config(args.config)
        if args.out is None:
            args.out = cfg.output.directory
        if args.workers < 1:
            raise ConfigError("--workers must be positive")
        session = Session(cfg, not args.no_cache, args.cache, args.seed)
        return COMMANDS[args.command](session, args)
    except (ConfigError, DomainError) as exc:
        return _error("config", EXIT_CONFIG, exc)
    except CacheError as exc:
        return _error("cache", EXIT_CONFIG, exc)
    except (ConvergenceError, MonotonicityError) as exc:
        return _error("convergence", EXIT_CONVERGENCE, exc)
    except PropertyViolation as exc:
        return _error("property", EXIT_PROPERTY, exc, failed=exc.failed)
    except BudgetError as exc:
        return _error("budget", EXIT_BUDGET, exc, required=exc.required, budget=exc.budget)


if __name__ == "__main__":
    sys.exit(main())
