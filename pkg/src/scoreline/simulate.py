"""Synthetic double round-robin leagues with known generating parameters."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from ._util import stream
from .dixon_coles import RatingSet, dc_grid
from .league_data import LeagueDataset
from .marco import INDEPENDENCE, sample_matches

SEASON_START = (8, 10)  # (month, day)
SEASON_SPAN_DAYS = 283  # 10 August to 20 May


@dataclass
class SimScenario:
    m: int = 20
    seasons: int = 5
    model: str = "dc"
    rho: float = 0.0
    theta: tuple[float, float, float] = INDEPENDENCE
    gamma: float = 0.25
    attack_sd: float = 0.25
    defence_sd: float = 0.25
    base_log_rate: float = 0.2
    step: float = 0.0
    start_year: int = 2010
    league: str = "SIM"
    seed: int = 0

    def __post_init__(self):
        self.theta = tuple(float(v) for v in self.theta)
        if self.m < 2 or self.m % 2:
            raise ValueError("m must be an even number >= 2")
        if self.seasons < 1:
            raise ValueError("seasons must be >= 1")
        if self.step < 0:
            raise ValueError("step must be >= 0")
        if self.model not in ("dc", "marco"):
            raise ValueError(f"unknown model {self.model!r}")


@dataclass
class SimTruth:
    scenario: SimScenario
    teams: list[str]
    ratings: dict[str, RatingSet] = field(default_factory=dict)  # by season label

    def to_dict(self) -> dict:
        return {
            "scenario": asdict(self.scenario),
            "teams": self.teams,
            "seasons": {label: {"alpha": dict(zip(r.teams, r.alpha.tolist())),
                                "beta": dict(zip(r.teams, r.beta.tolist())),
                                "gamma": r.gamma}
                        for label, r in self.ratings.items()},
        }

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def round_robin(m: int, rng: np.random.Generator) -> list[list[tuple[int, int]]]:
    """Double round robin by the circle method; rounds of (home, away) pairs."""
    order = list(rng.permutation(m))
    rounds = []
    arr = order[:]
    for r in range(m - 1):
        pairs = []
        for i in range(m // 2):
            a, b = arr[i], arr[m - 1 - i]
            if (i == 0 and r % 2) or (i > 0 and i % 2):
                a, b = b, a
            pairs.append((a, b))
        rounds.append(pairs)
        arr = [arr[0], arr[-1]] + arr[1:-1]
    return rounds + [[(b, a) for a, b in rnd] for rnd in rounds]


def _round_dates(year: int, n_rounds: int) -> list[pd.Timestamp]:
    start = pd.Timestamp(year=year, month=SEASON_START[0], day=SEASON_START[1])
    spacing = max(7, SEASON_SPAN_DAYS // max(1, n_rounds - 1))
    return [start + pd.Timedelta(days=spacing * r) for r in range(n_rounds)]


def _dc_sample(lam, mu, rho, rng, tail=1e-10):
    h = np.empty(lam.size, dtype=np.int64)
    a = np.empty(lam.size, dtype=np.int64)
    u = rng.random(lam.size)
    for k in range(lam.size):
        G = 15
        grid = dc_grid(lam[k], mu[k], rho, G)
        while 1.0 - grid.sum() > tail and G < 128:
            G *= 2
            grid = dc_grid(lam[k], mu[k], rho, G)
        cdf = np.cumsum(grid.ravel())
        idx = min(int(np.searchsorted(cdf, u[k] * cdf[-1], side="right")), cdf.size - 1)
        h[k], a[k] = divmod(idx, G + 1)
    return h, a


def generate(scenario: SimScenario) -> tuple[LeagueDataset, SimTruth]:
    """Simulate a league; scores are exact draws from the scenario's model."""
    sc = scenario
    rng_r = stream(sc.seed, "sim-ratings")
    rng_f = stream(sc.seed, "sim-fixtures")
    rng_s = stream(sc.seed, "sim-scores")
    teams = [f"Team{i:02d}" for i in range(sc.m)]
    attack = rng_r.normal(0.0, sc.attack_sd, sc.m)
    defence = rng_r.normal(0.0, sc.defence_sd, sc.m)
    truth = SimTruth(sc, teams)
    rows = []
    for s in range(sc.seasons):
        if s > 0 and sc.step > 0:
            attack = attack + rng_r.normal(0.0, sc.step, sc.m)
            defence = defence + rng_r.normal(0.0, sc.step, sc.m)
        alpha = attack - attack.mean() + 1.0
        beta = defence - defence.mean() + sc.base_log_rate - 1.0
        year = sc.start_year + s
        label = f"{year}-{year + 1}"
        ratings = RatingSet(teams, alpha, beta, sc.gamma)
        truth.ratings[label] = ratings
        rounds = round_robin(sc.m, rng_f)
        dates = _round_dates(year, len(rounds))
        home = np.array([p[0] for rnd in rounds for p in rnd])
        away = np.array([p[1] for rnd in rounds for p in rnd])
        day = [d for d, rnd in zip(dates, rounds) for _ in rnd]
        lam = np.exp(sc.gamma + alpha[home] + beta[away])
        mu = np.exp(alpha[away] + beta[home])
        if sc.model == "dc":
            x, y = _dc_sample(lam, mu, sc.rho, rng_s)
        else:
            x, y = sample_matches(lam, mu, sc.theta, rng_s)
        for k in range(home.size):
            rows.append({"match_id": f"{sc.league}:{label}:{k:04d}", "date": day[k], "season": label,
                         "league": sc.league, "home_team": teams[home[k]],
                         "away_team": teams[away[k]], "home_goals": int(x[k]),
                         "away_goals": int(y[k])})
    return LeagueDataset.from_frame(pd.DataFrame(rows)), truth
