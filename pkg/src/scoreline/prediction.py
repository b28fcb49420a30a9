"""Market probabilities (1-X-2 and Under/Over) from score grids."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .dixon_coles import intensities
from .marco import DEFAULT_G, DEFAULT_TAIL_TOL, ScoreGrid, build_score_grid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarketPartition:
    kind: str  # "1x2" or "uo"
    threshold: float | None = None

    def __post_init__(self):
        if self.kind == "uo":
            if self.threshold is None or self.threshold < 0 or (self.threshold - 0.5) % 1 != 0:
                raise ValueError(f"Under/Over threshold must be a half-integer, got {self.threshold}")
        elif self.kind != "1x2":
            raise ValueError(f"unknown market kind {self.kind!r}")

    @property
    def name(self) -> str:
        return "1x2" if self.kind == "1x2" else f"uo{self.threshold:g}"

    @property
    def classes(self) -> tuple[str, ...]:
        return ("Home", "Draw", "Away") if self.kind == "1x2" else ("Under", "Over")

    def realized(self, home_goals: int, away_goals: int) -> int:
        if self.kind == "1x2":
            return 0 if home_goals > away_goals else (1 if home_goals == away_goals else 2)
        return 0 if home_goals + away_goals <= math.floor(self.threshold) else 1


ONE_X_TWO = MarketPartition("1x2")
UNDER_OVER_15 = MarketPartition("uo", 1.5)
UNDER_OVER_25 = MarketPartition("uo", 2.5)


def parse_market(name: str) -> MarketPartition:
    name = name.strip().lower()
    if name in ("1x2", "1-x-2"):
        return ONE_X_TWO
    if name.startswith("uo"):
        return MarketPartition("uo", float(name[2:]))
    raise ValueError(f"unknown market {name!r}; expected 1x2 or uo<threshold>")


@dataclass
class MarketForecast:
    match_id: str
    market: str
    probs: np.ndarray
    model: str
    t: int = -1
    home: str = ""
    away: str = ""


class ExcessTailMass(ValueError):
    pass


def market_probs(grid: ScoreGrid, partition: MarketPartition,
                 tail_tolerance: float = DEFAULT_TAIL_TOL) -> np.ndarray:
    """Class probabilities of ``partition`` from a truncated score grid.

    Missing tail mass goes to the open-ended class: Over for Under/Over; for
    1-X-2 it is spread in proportion to the in-grid class masses.
    """
    if grid.tail_mass > tail_tolerance:
        raise ExcessTailMass(f"grid tail mass {grid.tail_mass:.3g} above {tail_tolerance:.3g}")
    P = grid.probs
    if partition.kind == "1x2":
        home = np.tril(P, -1).sum()
        draw = np.trace(P)
        away = np.triu(P, 1).sum()
        masses = np.array([home, draw, away])
        return masses / masses.sum()
    n = P.shape[0]
    total = np.add.outer(np.arange(n), np.arange(n))
    under = min(P[total <= math.floor(partition.threshold)].sum(), 1.0)
    return np.array([under, 1.0 - under])


def fixture_grid(params, home: str, away: str, G: int = DEFAULT_G,
                 tail_tolerance: float = DEFAULT_TAIL_TOL) -> ScoreGrid:
    lam, mu = intensities(params.ratings, home, away)
    return build_score_grid(lam, mu, params, G, tail_tolerance)


def predict_day(fit, fixtures, markets: Sequence[MarketPartition], model_tag: str | None = None,
                G: int = DEFAULT_G, tail_tolerance: float = DEFAULT_TAIL_TOL):
    """Forecasts for each fixture and market from a fitted model.

    ``fixtures`` is a LeagueDataset or an iterable of objects with
    ``match_id``, ``home_team``, ``away_team`` (and optionally ``t``).
    Returns ``(forecasts, skipped)`` where ``skipped`` lists
    ``(match_id, reason)`` for fixtures involving unrated teams.
    """
    params = fit.params
    tag = model_tag or params.model
    out, skipped = [], []
    for fx in fixtures:
        try:
            grid = fixture_grid(params, fx.home_team, fx.away_team, G, tail_tolerance)
        except KeyError as exc:
            reason = str(exc.args[0]) if exc.args else "unrated team"
            log.info("fixture %s skipped: %s", fx.match_id, reason)
            skipped.append((fx.match_id, reason))
            continue
        for mk in markets:
            out.append(MarketForecast(fx.match_id, mk.name, market_probs(grid, mk, tail_tolerance),
                                      tag, int(getattr(fx, "t", -1)), fx.home_team, fx.away_team))
    return out, skipped


FORECAST_COLUMNS = ["match_id", "t", "home", "away", "model",
                    "pH", "pD", "pA", "pU15", "pO15", "pU25", "pO25"]
_MARKET_COLUMNS = {"1x2": ["pH", "pD", "pA"], "uo1.5": ["pU15", "pO15"], "uo2.5": ["pU25", "pO25"]}


def forecasts_frame(forecasts: Iterable[MarketForecast]) -> pd.DataFrame:
    """Wide forecast table, one row per (match, model)."""
    rows: dict[tuple[str, str], dict] = {}
    for fc in forecasts:
        row = rows.setdefault((fc.match_id, fc.model), {
            "match_id": fc.match_id, "t": fc.t, "home": fc.home, "away": fc.away, "model": fc.model})
        for col, p in zip(_MARKET_COLUMNS.get(fc.market, []), fc.probs):
            row[col] = float(p)
    return pd.DataFrame(list(rows.values()), columns=FORECAST_COLUMNS)
