"""Ranked probability scores, backtests and model-comparison tests."""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
import pandas as pd

from ._util import pmap, replicate_rngs
from .estimation import FitConfig, fit, rolling_refit
from .league_data import LeagueDataset, prediction_calendar
from .prediction import MarketPartition, parse_market, predict_day

log = logging.getLogger(__name__)

NATURAL_ORDERS = (("Home", "Draw", "Away"), ("Under", "Over"))
LEDGER_COLUMNS = ["order", "match_id", "t", "league", "market", "model",
                  "p1", "p2", "p3", "realized", "rps"]


class ComparabilityError(RuntimeError):
    """Models were not scored on the same matches."""


def rps(forecast, realized: int, classes: Sequence[str] | None = None) -> float:
    """Ranked probability score of one forecast over ordered classes."""
    p = np.asarray(forecast, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("forecast needs at least two classes")
    if classes is not None and tuple(classes) not in NATURAL_ORDERS:
        raise ValueError(f"classes {tuple(classes)} are not in a natural order {NATURAL_ORDERS}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"forecast probabilities must be non-negative and sum to 1: {p}")
    if not 0 <= realized < p.size:
        raise ValueError(f"realized class {realized} out of range")
    e = np.zeros_like(p)
    e[realized] = 1.0
    return float(np.sum(np.cumsum(p - e)[:-1] ** 2) / (p.size - 1))


def rps_many(P: np.ndarray, realized: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    E = np.zeros_like(P)
    E[np.arange(len(P)), np.asarray(realized)] = 1.0
    return np.sum(np.cumsum(P - E, axis=1)[:, :-1] ** 2, axis=1) / (P.shape[1] - 1)


@dataclass
class ModelSpec:
    """A named model configuration; ``xi_by_league`` overrides ``config.xi`` per league."""

    name: str
    config: FitConfig
    xi_by_league: dict[str, float] = field(default_factory=dict)

    def config_for(self, league: str) -> FitConfig:
        if league in self.xi_by_league:
            return replace(self.config, xi=float(self.xi_by_league[league]))
        return self.config


@dataclass
class BacktestLedger:
    rows: pd.DataFrame
    skipped: list = field(default_factory=list)
    fit_log: list = field(default_factory=list)  # one dict per refit
    final_params: dict = field(default_factory=dict)  # (league, model name) -> params

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self, path) -> None:
        self.rows.to_csv(path, index=False)

    @classmethod
    def read_csv(cls, path) -> "BacktestLedger":
        return cls(pd.read_csv(path, dtype={"match_id": str, "league": str, "market": str,
                                            "model": str}))

    def paired(self, model_a: str, model_b: str, market: str) -> pd.DataFrame:
        """Per-match RPS of both models, ordered by (t, order)."""
        rows = self.rows[self.rows["market"] == market]
        a = rows[rows["model"] == model_a].set_index("match_id")
        b = rows[rows["model"] == model_b].set_index("match_id")
        if set(a.index) != set(b.index) or len(a) == 0:
            raise ComparabilityError(
                f"models {model_a!r} and {model_b!r} do not cover the same {market} matches")
        out = a[["t", "order", "league"]].copy()
        out["rps_a"] = a["rps"]
        out["rps_b"] = b.loc[a.index, "rps"]
        return out.sort_values(["t", "order"], kind="stable").reset_index()


def backtest(dataset: LeagueDataset, models: Sequence[ModelSpec],
             markets: Sequence[MarketPartition | str], calendar: Sequence[int] | None = None,
             burn_in_seasons: int = 1, jobs: int | None = 1) -> BacktestLedger:
    """Rolling out-of-sample forecasts and RPS for every model and market.

    Leagues are fitted separately.  ``calendar`` defaults to
    :func:`prediction_calendar` with ``burn_in_seasons``.
    """
    markets = [parse_market(m) if isinstance(m, str) else m for m in markets]
    if calendar is None:
        calendar = prediction_calendar(dataset, burn_in_seasons)
    calendar = sorted(set(int(d) for d in calendar))
    order = pd.Series(np.arange(len(dataset.matches)), index=dataset.matches["match_id"])
    tasks = [(league, league_ds, spec, markets, calendar)
             for league, league_ds in dataset.by_league().items() for spec in models]
    results = pmap(_backtest_task, tasks, jobs)

    frames, skipped, fit_log, final = [], [], [], {}
    for (league, _, spec, _, _), (rows, sk, fl, last) in zip(tasks, results):
        frames.append(rows)
        skipped.extend(sk)
        fit_log.extend(fl)
        if last is not None:
            final[(league, spec.name)] = last
    rows = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=LEDGER_COLUMNS)
    if len(rows):
        rows["order"] = order.loc[rows["match_id"]].to_numpy()
        rows = rows.sort_values(["t", "order", "market", "model"], kind="stable")
    rows = rows.reset_index(drop=True)[LEDGER_COLUMNS]

    names = [s.name for s in models]
    for mk in markets:
        sub = rows[rows["market"] == mk.name]
        covered = [frozenset(sub.loc[sub["model"] == n, "match_id"]) for n in names]
        if any(c != covered[0] for c in covered[1:]):
            raise ComparabilityError(f"models cover different matches in market {mk.name}")
    return BacktestLedger(rows, skipped, fit_log, final)


def _backtest_task(args):
    league, league_ds, spec, markets, calendar = args
    config = spec.config_for(league)
    days = [d for d in calendar if (league_ds.matches["t"] == d).any()]
    records, skipped, fit_log, last = [], [], [], None
    for day, res in rolling_refit(league_ds, config, days, skip_unfittable=True):
        fixtures = league_ds.on_day(day)
        if res is None:
            skipped.extend((r.match_id, spec.name, "unfittable window") for r in fixtures)
            continue
        fit_log.append({"league": league, "model": spec.name, "day": int(day), **res.log_record()})
        last = res.params
        forecasts, sk = predict_day(res, fixtures, markets, model_tag=spec.name)
        skipped.extend((mid, spec.name, why) for mid, why in sk)
        by_id = {r.match_id: r for r in fixtures}
        for fc in forecasts:
            r = by_id[fc.match_id]
            mk = parse_market(fc.market)
            realized = mk.realized(r.home_goals, r.away_goals)
            p = list(fc.probs) + [np.nan] * (3 - len(fc.probs))
            records.append({"match_id": fc.match_id, "t": r.t, "league": r.league,
                            "market": fc.market, "model": spec.name, "p1": p[0], "p2": p[1],
                            "p3": p[2], "realized": realized, "rps": rps(fc.probs, realized)})
    frame = pd.DataFrame(records, columns=[c for c in LEDGER_COLUMNS if c != "order"])
    return frame, skipped, fit_log, last


def cumulative_diff(ledger: BacktestLedger, model_a: str, model_b: str, market: str,
                    group: str = "all") -> pd.DataFrame:
    """Running sum of rps_a - rps_b over time; positive values favour ``model_b``.

    ``group="league"`` returns one series per league, stacked, with the
    league label in the ``group`` column.
    """
    paired = ledger.paired(model_a, model_b, market)
    paired["d"] = paired["rps_a"] - paired["rps_b"]
    if group == "all":
        parts = [("all", paired)]
    elif group in ("league", "per-league"):
        parts = [(lg, sub) for lg, sub in paired.groupby("league", sort=True)]
    else:
        raise ValueError(f"group must be 'all' or 'league', got {group!r}")
    frames = []
    for label, sub in parts:
        frames.append(pd.DataFrame({"t": sub["t"].to_numpy(),
                                    "match_counter": np.arange(1, len(sub) + 1),
                                    "diff": np.cumsum(sub["d"].to_numpy()),
                                    "group": label}))
    return pd.concat(frames, ignore_index=True)


@dataclass
class ReshuffleReport:
    model_a: str
    model_b: str
    market: str
    observed_diff: float
    exceedance: float
    favoured: str | None
    n_b: int
    seed: int
    n_matches: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def reshuffle_exceedance(d: np.ndarray, n_b: int, rng: np.random.Generator,
                         chunk: int = 2000) -> tuple[float, float]:
    """Paired sign-flip test on per-match differences.

    Returns ``(observed mean, fraction of replicates at least as extreme in the
    observed direction)``.  Swapping a match's two scores flips the sign of
    its difference.
    """
    d = np.asarray(d, dtype=float)
    observed = float(d.mean())
    direction = 1.0 if observed >= 0 else -1.0
    tol = 1e-12 * max(1.0, float(np.abs(d).max(initial=0.0)))
    hits, done = 0, 0
    while done < n_b:
        k = min(chunk, n_b - done)
        signs = np.where(rng.random((k, d.size)) < 0.5, -1.0, 1.0)
        means = signs @ d / d.size
        hits += int(np.count_nonzero(direction * means >= abs(observed) - tol))
        done += k
    return observed, hits / n_b


def reshuffle_test(ledger: BacktestLedger, model_a: str, model_b: str, market: str,
                   n_b: int = 10000, seed: int = 0) -> ReshuffleReport:
    """Randomly swap each match's pair of scores and count stronger evidence.

    The observed statistic is mean(rps_a - rps_b); positive favours
    ``model_b``.  The exceedance fraction counts replicates whose mean
    difference is at least as large in the observed direction.
    """
    from ._util import stream

    paired = ledger.paired(model_a, model_b, market)
    d = (paired["rps_a"] - paired["rps_b"]).to_numpy()
    observed, frac = reshuffle_exceedance(d, n_b, stream(seed, "reshuffle"))
    favoured = None if observed == 0 else (model_b if observed > 0 else model_a)
    return ReshuffleReport(model_a, model_b, market, observed, frac, favoured, int(n_b), int(seed),
                           int(d.size))


@dataclass
class ThetaInterval:
    league: str
    estimate: float
    lower: float
    upper: float
    level: float
    n_rep: int
    n_dropped: int
    warning: str | None = None
    replicates: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("replicates")
        return d


def _boot_task(args):
    window, config, base, t, rng = args
    idx = rng.integers(0, len(window), len(window))
    sample = LeagueDataset(window.matches.iloc[idx].reset_index(drop=True), window.epoch)
    try:
        res = fit(sample, config, warm_start=base, t=t)
    except ValueError:
        return None
    if not res.converged:
        return None
    return res.params.theta[2]


def bootstrap_theta_ci(dataset: LeagueDataset, config: FitConfig, n_rep: int = 250,
                       level: float = 0.95, seed: int = 0, t: float | None = None,
                       jobs: int | None = 1) -> dict[str, ThetaInterval]:
    """Percentile bootstrap interval for the Mar-Co dependence parameter.

    Matches of each league's estimation window are resampled with
    replacement (keeping their dates, hence their weights) and refitted.
    Replicates that fail or do not converge are dropped and counted.
    """
    if n_rep < 2:
        raise ValueError("n_rep must be >= 2")
    config = replace(config, model="marco")
    out = {}
    for league, ds in dataset.by_league().items():
        tt = float(ds.matches["t"].max()) + 1.0 if t is None else float(t)
        window = ds.window(tt)
        base = fit(window, config, t=tt)
        rngs = replicate_rngs(seed, f"bootstrap-theta:{league}", n_rep)
        thetas = pmap(_boot_task, [(window, config, base, tt, r) for r in rngs], jobs)
        ok = np.array([v for v in thetas if v is not None])
        dropped = n_rep - ok.size
        warn = None
        if dropped > 0.1 * n_rep:
            warn = f"{dropped} of {n_rep} bootstrap replicates dropped"
            warnings.warn(f"{league}: {warn}", RuntimeWarning, stacklevel=2)
        q = (1 - level) / 2
        if ok.size:
            lo, hi = np.quantile(ok, [q, 1 - q], method="inverted_cdf")
        else:
            lo = hi = float("nan")
        out[league] = ThetaInterval(league, float(base.params.theta[2]), float(lo), float(hi),
                                    level, n_rep, int(dropped), warn, ok.tolist())
    return out
