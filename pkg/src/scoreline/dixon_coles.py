"""Dixon-Coles score model: log-linear intensities, tau adjustment, likelihood."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import kernels
from .league_data import LeagueDataset

WEIGHT_CUTOFF = 1e-6


class InfeasibleRho(ValueError):
    pass


@dataclass
class RatingSet:
    """Per-team attack/defence effects (log scale) and the home effect.

    Identifiability requires ``alpha.sum() == m``.
    """

    teams: list[str]
    alpha: np.ndarray
    beta: np.ndarray
    gamma: float
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.gamma = float(self.gamma)
        self.index = {name: i for i, name in enumerate(self.teams)}
        if not (len(self.teams) == len(self.alpha) == len(self.beta)):
            raise ValueError("teams, alpha and beta must have equal length")

    @property
    def m(self) -> int:
        return len(self.teams)

    def check(self, tol: float = 1e-8) -> None:
        if not (np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.beta))
                and np.isfinite(self.gamma)):
            raise ValueError("non-finite rating")
        if abs(self.alpha.sum() - self.m) > tol * max(1, self.m):
            raise ValueError(f"sum(alpha) = {self.alpha.sum():.12g}, expected {self.m}")

    def team_ids(self, names) -> np.ndarray:
        try:
            return np.fromiter((self.index[n] for n in names), dtype=np.int64)
        except KeyError as exc:
            raise KeyError(f"team not rated: {exc.args[0]!r}") from None

    @classmethod
    def neutral(cls, teams, gamma: float = 0.0, beta: float = -1.0) -> "RatingSet":
        m = len(teams)
        return cls(list(teams), np.ones(m), np.full(m, beta), gamma)


@dataclass
class DcParams:
    ratings: RatingSet
    rho: float = 0.0
    xi: float = 0.0

    model = "dc"


def intensities(ratings: RatingSet, home: str, away: str) -> tuple[float, float]:
    i, j = ratings.team_ids([home, away])
    lam = np.exp(ratings.gamma + ratings.alpha[i] + ratings.beta[j])
    mu = np.exp(ratings.alpha[j] + ratings.beta[i])
    return float(lam), float(mu)


def log_intensities(ratings: RatingSet, home_ids, away_ids):
    loglam = ratings.gamma + ratings.alpha[home_ids] + ratings.beta[away_ids]
    logmu = ratings.alpha[away_ids] + ratings.beta[home_ids]
    return loglam, logmu


def rho_bounds(lam, mu):
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    lower = np.maximum(-1.0 / lam, -1.0 / mu)
    upper = np.minimum(1.0 / (lam * mu), 1.0)
    if lower.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


def window_rho_bounds(lam, mu) -> tuple[float, float]:
    """Intersection of the per-match feasible intervals."""
    lower, upper = rho_bounds(np.atleast_1d(lam), np.atleast_1d(mu))
    return float(lower.max()), float(upper.min())


def _check_rho(lam, mu, rho):
    lower, upper = rho_bounds(lam, mu)
    if np.any(rho < np.asarray(lower)) or np.any(rho > np.asarray(upper)):
        raise InfeasibleRho(f"rho={rho} outside feasible range [{np.max(lower)}, {np.min(upper)}]")


def tau(lam, mu, h, a, rho):
    _check_rho(lam, mu, rho)
    lam, mu, h, a = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (lam, mu, h, a)))
    out = np.ones(lam.shape)
    out = np.where((h == 0) & (a == 0), 1.0 - lam * mu * rho, out)
    out = np.where((h == 0) & (a == 1), 1.0 + lam * rho, out)
    out = np.where((h == 1) & (a == 0), 1.0 + mu * rho, out)
    out = np.where((h == 1) & (a == 1), 1.0 - rho, out)
    return out[()] if out.ndim == 0 else out


def poisson_logpmf(k, rate):
    k = np.asarray(k, dtype=float)
    return k * np.log(rate) - rate - gammaln(k + 1.0)


def joint_pmf_dc(lam, mu, rho, h, a):
    base = np.exp(poisson_logpmf(h, lam) + poisson_logpmf(a, mu))
    return tau(lam, mu, h, a, rho) * base


def dc_grid(lam: float, mu: float, rho: float, G: int) -> np.ndarray:
    g = np.arange(G + 1)
    px = np.exp(poisson_logpmf(g, lam))
    py = np.exp(poisson_logpmf(g, mu))
    _check_rho(lam, mu, rho)
    grid = np.outer(px, py)
    grid[0, 0] *= 1.0 - lam * mu * rho
    grid[0, 1] *= 1.0 + lam * rho
    grid[1, 0] *= 1.0 + mu * rho
    grid[1, 1] *= 1.0 - rho
    return grid


def match_weights(t_k, t: float, xi: float) -> np.ndarray:
    """exp(-xi (t - t_k)); weights below the cutoff are set to zero."""
    w = np.exp(-xi * (t - np.asarray(t_k, dtype=float)))
    w[w < WEIGHT_CUTOFF] = 0.0
    return w


def match_arrays(ratings: RatingSet, matches: LeagueDataset):
    df = matches.matches
    home = ratings.team_ids(df["home_team"])
    away = ratings.team_ids(df["away_team"])
    x = df["home_goals"].to_numpy(dtype=float)
    y = df["away_goals"].to_numpy(dtype=float)
    tk = df["t"].to_numpy(dtype=float)
    return home, away, x, y, tk


def log_weighted_likelihood_dc(params: DcParams, matches: LeagueDataset, t: float) -> float:
    """Time-weighted Dixon-Coles log-likelihood over ``matches``.

    Returns ``-inf`` when ``rho`` is infeasible for any weighted match.
    """
    if len(matches) == 0:
        return 0.0
    home, away, x, y, tk = match_arrays(params.ratings, matches)
    w = match_weights(tk, t, params.xi)
    keep = w > 0
    loglam, logmu = log_intensities(params.ratings, home[keep], away[keep])
    ll, *_ = kernels.dc_loglik_grad(x[keep], y[keep], loglam, logmu, w[keep], params.rho)
    return float(ll)
