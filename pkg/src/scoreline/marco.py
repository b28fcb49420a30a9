"""Mar-Co score model.

The joint pmf is an equal mixture of two marginal-times-conditional
factorisations.  In branch A the home score is Poisson(lam) and, given the
home score h, the away score is Poisson(psi(mu, h)); branch B swaps roles.
The conditional mean is

    psi(rate, h) = exp(theta1 + theta2 * log(rate) + theta3 * logit F_rate(h))

with F_rate the Poisson CDF, clamped to [1e-10, 1 - 1e-10] before the logit.
theta = (0, 1, 0) gives independent Poisson scores.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import pdtr

from . import kernels
from .dixon_coles import (DcParams, RatingSet, dc_grid, log_intensities, match_arrays,
                          match_weights, poisson_logpmf)
from .league_data import LeagueDataset

INDEPENDENCE = (0.0, 1.0, 0.0)
DEFAULT_G = 15
DEFAULT_TAIL_TOL = 1e-8
MAX_G = 64


@dataclass
class MarcoParams:
    ratings: RatingSet
    theta: tuple[float, float, float] = INDEPENDENCE
    xi: float = 0.0

    model = "marco"

    def __post_init__(self):
        self.theta = tuple(float(v) for v in self.theta)
        if len(self.theta) != 3 or not all(np.isfinite(self.theta)):
            raise ValueError(f"theta must be three finite numbers, got {self.theta}")


@dataclass
class ScoreGrid:
    probs: np.ndarray
    tail_mass: float

    @property
    def G(self) -> int:
        return self.probs.shape[0] - 1


class TailToleranceError(ValueError):
    pass


def poisson_cdf(rate, h):
    return pdtr(np.asarray(h, dtype=float), rate)


def psi(theta, opponent_rate, opp_goals):
    """Conditional Poisson mean given the opponent's rate and goals."""
    t1, t2, t3 = theta
    h, rate = np.broadcast_arrays(np.asarray(opp_goals, dtype=float),
                                  np.asarray(opponent_rate, dtype=float))
    L, _ = kernels.logit_cdf(h, rate)
    out = np.exp(t1 + t2 * np.log(rate) + t3 * L)
    return out[()] if np.ndim(out) == 0 else out


def _branches(lam, mu, theta, h, a):
    h = np.asarray(h, dtype=float)
    a = np.asarray(a, dtype=float)
    h, a = np.broadcast_arrays(h, a)
    psi_y = psi(theta, mu, h)
    psi_x = psi(theta, lam, a)
    log_a = poisson_logpmf(a, psi_y) + poisson_logpmf(h, lam)
    log_b = poisson_logpmf(h, psi_x) + poisson_logpmf(a, mu)
    return log_a, log_b


def joint_pmf_marco(lam, mu, theta, h, a):
    log_a, log_b = _branches(lam, mu, theta, h, a)
    out = 0.5 * np.exp(log_a) + 0.5 * np.exp(log_b)
    return out[()] if np.ndim(out) == 0 else out


def marco_grid(lam: float, mu: float, theta, G: int) -> np.ndarray:
    g = np.arange(G + 1, dtype=float)
    psi_y = psi(theta, mu, g)  # indexed by home goals
    psi_x = psi(theta, lam, g)  # indexed by away goals
    px = np.exp(poisson_logpmf(g, lam))
    py = np.exp(poisson_logpmf(g, mu))
    pr_a = px[:, None] * np.exp(poisson_logpmf(g[None, :], psi_y[:, None]))
    pr_b = py[None, :] * np.exp(poisson_logpmf(g[:, None], psi_x[None, :]))
    return 0.5 * pr_a + 0.5 * pr_b


def _grid(lam, mu, params, G):
    if isinstance(params, DcParams):
        return dc_grid(lam, mu, params.rho, G)
    if isinstance(params, MarcoParams):
        return marco_grid(lam, mu, params.theta, G)
    raise TypeError(f"unsupported parameter type {type(params).__name__}")


def build_score_grid(lam: float, mu: float, params, G: int = DEFAULT_G,
                     tail_tolerance: float = DEFAULT_TAIL_TOL, max_G: int = MAX_G) -> ScoreGrid:
    """Truncated joint pmf on {0..G}^2, widening G until the tail is small."""
    if G < 1:
        raise ValueError("G must be >= 1")
    while True:
        probs = _grid(lam, mu, params, G)
        tail = max(0.0, 1.0 - probs.sum())
        if tail <= tail_tolerance:
            return ScoreGrid(probs, tail)
        if G >= max_G:
            raise TailToleranceError(
                f"tail mass {tail:.3g} exceeds tolerance {tail_tolerance:.3g} at G={G}")
        G = min(2 * G, max_G)


def log_weighted_likelihood_marco(params: MarcoParams, matches: LeagueDataset, t: float) -> float:
    if len(matches) == 0:
        return 0.0
    home, away, x, y, tk = match_arrays(params.ratings, matches)
    w = match_weights(tk, t, params.xi)
    keep = w > 0
    loglam, logmu = log_intensities(params.ratings, home[keep], away[keep])
    ll, *_ = kernels.marco_loglik_grad(x[keep], y[keep], loglam, logmu, w[keep], *params.theta)
    return float(ll)


def sample_matches(lam, mu, theta, rng: np.random.Generator, size=None):
    """Exact draws from the Mar-Co joint pmf.

    ``lam`` and ``mu`` broadcast against each other (and ``size``); returns
    integer arrays ``(h, a)``.
    """
    lam, mu = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(mu, dtype=float))
    if size is not None:
        lam = np.broadcast_to(lam, size)
        mu = np.broadcast_to(mu, size)
    shape = lam.shape
    branch_a = rng.random(shape) < 0.5
    first = rng.poisson(np.where(branch_a, lam, mu))
    cond = np.where(branch_a, psi(theta, mu, first), psi(theta, lam, first))
    second = rng.poisson(cond)
    h = np.where(branch_a, first, second)
    a = np.where(branch_a, second, first)
    return h, a


def sample_match(lam: float, mu: float, theta, rng: np.random.Generator) -> tuple[int, int]:
    h, a = sample_matches(lam, mu, theta, rng, size=())
    return int(h), int(a)
