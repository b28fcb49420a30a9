"""Command-line entry point: ``scoreline <command> [options]``.

Every command writes its outputs under ``--out`` together with a
``manifest.json`` recording the command, its configuration, the package
version, the kernel backend and the root seed.  Exit codes: 0 success,
1 finished with warnings, 2 fatal error.
"""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import platform
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .estimation import DEFAULT_XI_GRID, FitConfig, tune_xi
from .evaluation import ModelSpec, backtest, bootstrap_theta_ci, cumulative_diff, reshuffle_test
from .kernels import BACKEND
from .league_data import IngestError, LeagueDataset, ingest_csv
from .paramfile import append_fit_log, write_params
from .prediction import FORECAST_COLUMNS, parse_market

log = logging.getLogger("scoreline")

EXIT_OK, EXIT_WARN, EXIT_FATAL = 0, 1, 2
SEED_SCHEME = ("numpy SeedSequence(seed, spawn_key=(crc32(stream name),)); replicate i of a "
               "loop uses the i-th spawned child")


class Fatal(Exception):
    """Error that aborts a command with exit code 2."""


class _Run:
    """Output directory, manifest and warning bookkeeping of one command."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.warnings: list[str] = []

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def warn(self, message: str) -> None:
        log.warning(message)
        self.warnings.append(message)

    def write_manifest(self, status: str, extra: dict | None = None) -> None:
        config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(self.args).items()
                  if k != "func"}
        manifest = {
            "command": self.args.command,
            "config": config,
            "version": __version__,
            "backend": BACKEND,
            "seed": getattr(self.args, "seed", None),
            "seed_scheme": SEED_SCHEME,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "pandas": pd.__version__,
            "status": status,
            "warnings": self.warnings,
            "outputs": self.outputs,
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        if extra:
            manifest.update(extra)
        with open(self.out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _parse_grid(text: str | None) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    if text is None:
        return [float(v) for v in DEFAULT_XI_GRID]
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise Fatal(f"bad --xi-grid {text!r}; expected start:stop:step")
        start, stop, step = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise Fatal(f"bad --xi-grid {text!r}: {exc}") from exc


def _load(args) -> LeagueDataset:
    try:
        return ingest_csv(args.data, date_format_hint=getattr(args, "date_format_hint", None),
                          league=getattr(args, "league", None))
    except FileNotFoundError as exc:
        raise Fatal(f"data file not found: {exc.filename}") from exc
    except IngestError as exc:
        raise Fatal(f"ingest failed: {exc}") from exc


# ---------------------------------------------------------------- commands

def cmd_ingest(args, run: _Run) -> dict:
    ds = _load(args)
    ds.to_csv(run.path("matches.csv"))
    summary = {"matches": len(ds), "teams": ds.m, "seasons": ds.seasons, "leagues": ds.leagues,
               "skipped_rows": ds.skipped_rows, "duplicate_rows": ds.duplicate_rows}
    _write_json(run.path("ingest.json"), summary)
    if ds.skipped_rows:
        run.warn(f"{ds.skipped_rows} malformed rows skipped")
    if ds.duplicate_rows:
        run.warn(f"{ds.duplicate_rows} duplicate rows dropped")
    print(f"ingested {len(ds)} matches, {ds.m} teams, {len(ds.seasons)} seasons")
    return summary


def cmd_tune_xi(args, run: _Run) -> dict:
    ds = _load(args)
    grid = _parse_grid(args.xi_grid)
    curves, chosen = [], {}
    for league, league_ds in ds.by_league().items():
        for model in args.model:
            try:
                xi, curve = tune_xi(league_ds, model, grid, burn_in_seasons=args.burn_in_seasons,
                                    jobs=args.jobs)
            except (ValueError, RuntimeError) as exc:
                raise Fatal(f"{league}/{model}: {exc}") from exc
            curve.insert(0, "model", model)
            curve.insert(0, "league", league)
            curves.append(curve)
            chosen.setdefault(league, {})[model] = xi
            print(f"{league} {model}: xi* = {xi:g}")
    pd.concat(curves, ignore_index=True).to_csv(run.path("xi_curve.csv"), index=False)
    _write_json(run.path("xi.json"), chosen)
    return {"xi": chosen}


def _read_xi_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise Fatal(f"xi file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise Fatal(f"xi file {path} is not valid JSON: {exc}") from exc
    return data


def _read_model_spec(path) -> ModelSpec:
    """JSON model file: ``{"name": ..., "model": "dc"|"marco", "xi": ..., ...}``."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise Fatal(f"model file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise Fatal(f"model file {path} is not valid JSON: {exc}") from exc
    raw = dict(raw)
    name = raw.pop("name", None) or raw.get("model")
    xi_by_league = raw.pop("xi_by_league", {})
    try:
        config = FitConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise Fatal(f"model file {path}: {exc}") from exc
    return ModelSpec(str(name), config, {k: float(v) for k, v in xi_by_league.items()})


def _model_specs(args) -> list[ModelSpec]:
    if args.model_file:
        specs = [_read_model_spec(p) for p in args.model_file]
    else:
        xi_table = _read_xi_file(args.xi_file) if args.xi_file else {}
        specs = []
        for model in args.model:
            by_league = {lg: float(v[model]) for lg, v in xi_table.items() if model in v}
            specs.append(ModelSpec(model, FitConfig(model=model, xi=args.xi), by_league))
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise Fatal(f"model names must be unique, got {names}")
    return specs


def cmd_backtest(args, run: _Run) -> dict:
    specs = _model_specs(args)
    ds = _load(args)
    try:
        markets = [parse_market(m) for m in args.markets]
    except ValueError as exc:
        raise Fatal(str(exc)) from exc
    try:
        ledger = backtest(ds, specs, markets, burn_in_seasons=args.burn_in_seasons, jobs=args.jobs)
    except ValueError as exc:
        raise Fatal(str(exc)) from exc
    ledger.to_csv(run.path("ledger.csv"))
    _forecast_table(ledger, ds).to_csv(run.path("forecasts.csv"), index=False)

    fit_log = run.path("fit_log.jsonl")
    fit_log.unlink(missing_ok=True)
    append_fit_log(fit_log, ledger.fit_log)
    params_dir = run.out / "params"
    params_dir.mkdir(exist_ok=True)
    for (league, name), params in sorted(ledger.final_params.items()):
        fname = f"params/{_safe(name)}_{_safe(league)}.txt"
        write_params(params, run.path(fname))

    if ledger.skipped:
        pd.DataFrame(ledger.skipped, columns=["match_id", "model", "reason"]).to_csv(
            run.path("skipped.csv"), index=False)
    reports = {}
    for a, b in itertools.combinations([s.name for s in specs], 2):
        for mk in markets:
            tag = f"{_safe(a)}_vs_{_safe(b)}_{mk.name}"
            frames = [cumulative_diff(ledger, a, b, mk.name, "all"),
                      cumulative_diff(ledger, a, b, mk.name, "league")]
            pd.concat(frames, ignore_index=True).to_csv(run.path(f"cumdiff_{tag}.csv"),
                                                        index=False)
            report = reshuffle_test(ledger, a, b, mk.name, n_b=args.n_boot, seed=args.seed)
            (run.path(f"reshuffle_{tag}.json")).write_text(report.to_json() + "\n")
            reports[tag] = report.exceedance
            print(f"{a} vs {b} [{mk.name}]: mean RPS diff {report.observed_diff:+.6f}, "
                  f"exceedance {report.exceedance:.4f} over {report.n_matches} matches")
    if not len(ledger):
        run.warn("no forecasts were produced")
    return {"n_forecasts": len(ledger), "n_skipped": len(ledger.skipped),
            "exceedance": reports}


def _safe(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-." else "_" for c in str(text))


def _forecast_table(ledger, ds: LeagueDataset) -> pd.DataFrame:
    rows = ledger.rows
    teams = ds.matches.set_index("match_id")[["home_team", "away_team"]]
    cols = {"1x2": ["pH", "pD", "pA"], "uo1.5": ["pU15", "pO15"], "uo2.5": ["pU25", "pO25"]}
    out: dict[tuple[str, str], dict] = {}
    for rec in rows.itertuples(index=False):
        key = (rec.match_id, rec.model)
        if key not in out:
            home, away = teams.loc[rec.match_id]
            out[key] = {"match_id": rec.match_id, "t": rec.t, "home": home, "away": away,
                        "model": rec.model}
        row = out[key]
        for col, p in zip(cols.get(rec.market, []), (rec.p1, rec.p2, rec.p3)):
            row[col] = p
    frame = pd.DataFrame(list(out.values()))
    return frame.reindex(columns=FORECAST_COLUMNS)


def cmd_diagnose(args, run: _Run) -> dict:
    from .diagnostics import ratio_table, run_all, spearman_curve

    ds = _load(args)
    groups = ds.by_league() if args.per_league else {"all": ds}
    bundle = {}
    for label, sub in groups.items():
        try:
            bundle[label] = run_all(sub, n_rep=args.n_boot, seed=args.seed)
        except ValueError as exc:
            raise Fatal(f"{label}: {exc}") from exc
        table = ratio_table(sub, n_rep=args.n_boot, seed=args.seed)
        table.to_frame().to_csv(run.path(f"ratio_table_{_safe(label)}.csv"), index=False)
    _write_json(run.path("diagnostics.json"), bundle)
    run.path("diagnostics.txt").write_text(_report_text(bundle))
    print(_report_text(bundle), end="")

    if args.spearman:
        grid = np.round(np.arange(-0.3, 0.3001, 0.05), 10)
        spearman_curve(grid, n_rep=args.spearman_reps, seed=args.seed).to_csv(
            run.path("spearman_curve.csv"), index=False)

    if args.theta_ci:
        xi_table = _read_xi_file(args.xi_file) if args.xi_file else {}
        out = {}
        for label, sub in ds.by_league().items():
            xi = float(xi_table.get(label, {}).get("marco", args.xi))
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", RuntimeWarning)
                res = bootstrap_theta_ci(sub, FitConfig(model="marco", xi=xi), n_rep=args.theta_reps,
                                         seed=args.seed, jobs=args.jobs)
            for w in caught:
                run.warn(str(w.message))
            out.update({k: v.to_dict() for k, v in res.items()})
        _write_json(run.path("theta_ci.json"), out)
    return {"groups": list(groups)}


def _report_text(bundle: dict) -> str:
    lines = []
    for label, tests in bundle.items():
        lines.append(f"[{label}]")
        for name, rep in tests.items():
            p = rep["p_value"]
            ptxt = "   n/a" if p is None else f"{p:.4f}"
            lines.append(f"  {name:<24} statistic {rep['statistic']:>10.5f}   p {ptxt}   "
                         f"({rep['alternative']}, n={rep['n']}, reps={rep['n_replicates']})")
    return "\n".join(lines) + "\n"


def cmd_simulate(args, run: _Run) -> dict:
    from .simulate import SimScenario, generate

    try:
        scenario = SimScenario(m=args.teams, seasons=args.seasons, model=args.model[0],
                               rho=args.rho, theta=tuple(args.theta), gamma=args.gamma,
                               step=args.step, start_year=args.start_year, league=args.league,
                               seed=args.seed)
    except ValueError as exc:
        raise Fatal(str(exc)) from exc
    ds, truth = generate(scenario)
    ds.to_csv(run.path("matches.csv"))
    truth.write(run.path("truth.json"))
    print(f"simulated {len(ds)} matches ({scenario.model}, {scenario.m} teams, "
          f"{scenario.seasons} seasons)")
    return {"matches": len(ds)}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scoreline",
                                     description="Dixon-Coles and Mar-Co football score models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True, models=True):
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="root seed for all random streams")
        p.add_argument("--jobs", type=int, default=None,
                       help="worker processes (default: available CPUs)")
        if data:
            p.add_argument("--data", nargs="+", required=True, type=Path,
                           help="raw results CSV(s) or a canonical matches.csv")
            p.add_argument("--date-format-hint", default=None,
                           help="strftime format for dates that are not dd/mm/yy(yy)")
            p.add_argument("--league", default=None,
                           help="league label (default: Div column or file name)")
        if models:
            p.add_argument("--model", nargs="+", choices=("dc", "marco"), default=["dc", "marco"])

    p = sub.add_parser("ingest", help="normalise results CSVs into the canonical dataset")
    common(p, models=False)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("tune-xi", help="choose the decay rate by out-of-sample log score")
    common(p)
    p.add_argument("--xi-grid", default=None, help="start:stop:step or comma list "
                   "(default 0:0.02:0.0005)")
    p.add_argument("--burn-in-seasons", type=int, default=1)
    p.set_defaults(func=cmd_tune_xi)

    p = sub.add_parser("backtest", help="rolling forecasts, RPS ledger and model comparison")
    common(p)
    p.add_argument("--xi", type=float, default=0.0, help="decay rate for all leagues")
    p.add_argument("--xi-file", type=Path, default=None,
                   help="xi.json from tune-xi (per league and model; overrides --xi)")
    p.add_argument("--model-file", nargs="+", type=Path, default=None,
                   help="JSON model specs (name, model, xi, ...) instead of --model")
    p.add_argument("--markets", nargs="+", default=["1x2", "uo1.5", "uo2.5"])
    p.add_argument("--burn-in-seasons", type=int, default=1)
    p.add_argument("--n-boot", type=int, default=10000, help="reshuffle replicates")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("diagnose", help="dependence and Poissonity tests")
    common(p, models=False)
    p.add_argument("--n-boot", type=int, default=1000, help="replicates per test")
    p.add_argument("--per-league", action="store_true", help="one report per league")
    p.add_argument("--spearman", action="store_true", help="also write the Spearman curve")
    p.add_argument("--spearman-reps", type=int, default=250)
    p.add_argument("--theta-ci", action="store_true",
                   help="bootstrap interval for the Mar-Co dependence parameter per league")
    p.add_argument("--theta-reps", type=int, default=250)
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--xi-file", type=Path, default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("simulate", help="synthetic league with known parameters")
    common(p, data=False, models=False)
    p.add_argument("--model", nargs=1, choices=("dc", "marco"), default=["dc"])
    p.add_argument("--teams", type=int, default=20)
    p.add_argument("--seasons", type=int, default=5)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--theta", type=float, nargs=3, default=[0.0, 1.0, 0.0])
    p.add_argument("--gamma", type=float, default=0.25)
    p.add_argument("--step", type=float, default=0.0,
                   help="per-season random-walk step of team strengths")
    p.add_argument("--start-year", type=int, default=2010)
    p.add_argument("--league", default="SIM")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    run = _Run(args)
    try:
        extra = args.func(args, run)
    except Fatal as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.write_manifest("fatal", {"error": str(exc)})
        return EXIT_FATAL
    status = "warnings" if run.warnings else "ok"
    run.write_manifest(status, {"result": extra})
    for w in run.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_WARN if run.warnings else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
