"""Weighted likelihood fitting, rolling refits and decay-rate tuning.

Fits run in two stages.  Stage 1 estimates the ratings with the dependence
fixed at independence, where both models share the same likelihood.
Stage 2 first fits the dependence parameters with the ratings held fixed,
then refines everything jointly.  For Mar-Co the refine stays within a
box of half-width ``refine_radius`` around that point (``None`` lifts the
box).  The box keeps the team effects near their independence values: the
offset theta1 and slope theta2 trade off against the rating levels along a
nearly flat ridge.  Stage 2 is kept only if it improves the weighted log-likelihood.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from . import kernels
from ._util import pmap
from .dixon_coles import DcParams, RatingSet, match_weights, window_rho_bounds
from .league_data import LeagueDataset, prediction_calendar
from .marco import INDEPENDENCE, MarcoParams

log = logging.getLogger(__name__)

MODELS = ("dc", "marco")
DEFAULT_XI_GRID = tuple(np.round(np.arange(0, 0.02 + 1e-12, 0.0005), 4))
_PENALTY = 1e10


class TeamCoverageError(ValueError):
    """Teams in the window have too few matches to be rated."""

    def __init__(self, teams):
        self.teams = list(teams)
        super().__init__("teams below the match threshold: " + ", ".join(self.teams))


@dataclass(frozen=True)
class FitConfig:
    model: str = "dc"
    xi: float = 0.0
    optimizer_tolerance: float = 1e-9
    max_iterations: int = 5000
    min_matches_per_team: int = 4
    freeze_dependence: bool = False
    refine_radius: float | None = 0.05

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.xi < 0:
            raise ValueError("xi must be >= 0")
        if self.optimizer_tolerance <= 0:
            raise ValueError("optimizer_tolerance must be > 0")
        if self.min_matches_per_team < 1:
            raise ValueError("min_matches_per_team must be >= 1")
        if self.refine_radius is not None and self.refine_radius <= 0:
            raise ValueError("refine_radius must be > 0 or None")


@dataclass
class FitResult:
    params: DcParams | MarcoParams
    log_likelihood: float
    converged: bool
    n_effective: float
    iterations: int = 0
    stage1_log_likelihood: float = float("nan")
    t: float = float("nan")
    n_matches: int = 0
    message: str = ""

    @property
    def ratings(self) -> RatingSet:
        return self.params.ratings

    def log_record(self) -> dict:
        return {"t": self.t, "log_likelihood": self.log_likelihood, "converged": self.converged,
                "iterations": self.iterations, "n_effective": self.n_effective,
                "n_matches": self.n_matches}


@dataclass
class _Problem:
    """Arrays of one fitting window; weights already exclude cut-off matches."""

    teams: list[str]
    home: np.ndarray
    away: np.ndarray
    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    model: str
    scale: float = field(init=False)

    def __post_init__(self):
        self.scale = float(self.w.sum()) or 1.0

    @property
    def m(self) -> int:
        return len(self.teams)

    def unpack(self, z):
        m = self.m
        alpha = np.empty(m)
        alpha[:-1] = z[:m - 1]
        alpha[-1] = m - z[:m - 1].sum()
        beta = z[m - 1:2 * m - 1]
        gamma = z[2 * m - 1]
        return alpha, beta, gamma, z[2 * m:]

    def pack(self, alpha, beta, gamma, dep) -> np.ndarray:
        return np.concatenate([alpha[:-1], beta, [gamma], np.atleast_1d(dep)]).astype(float)

    def rates(self, alpha, beta, gamma):
        loglam = gamma + alpha[self.home] + beta[self.away]
        logmu = alpha[self.away] + beta[self.home]
        return loglam, logmu

    def loglik(self, alpha, beta, gamma, dep):
        """Weighted log-likelihood and gradients w.r.t. (alpha, beta, gamma, dep)."""
        loglam, logmu = self.rates(alpha, beta, gamma)
        if self.model == "dc":
            ll, gl, gm, gdep = kernels.dc_loglik_grad(self.x, self.y, loglam, logmu, self.w,
                                                      float(dep[0]))
            gdep = np.atleast_1d(gdep)
        else:
            ll, gl, gm, gdep = kernels.marco_loglik_grad(self.x, self.y, loglam, logmu, self.w,
                                                         *map(float, dep))
        m = self.m
        ga = np.bincount(self.home, gl, m) + np.bincount(self.away, gm, m)
        gb = np.bincount(self.away, gl, m) + np.bincount(self.home, gm, m)
        return ll, ga, gb, float(gl.sum()), np.asarray(gdep, dtype=float)

    def independence(self):
        return np.array([0.0]) if self.model == "dc" else np.array(INDEPENDENCE)

    # objectives are negative mean log-likelihoods so that tolerances are scale-free
    def joint_objective(self, z):
        alpha, beta, gamma, dep = self.unpack(z)
        ll, ga, gb, gg, gd = self.loglik(alpha, beta, gamma, dep)
        if not np.isfinite(ll):
            return _PENALTY, np.zeros_like(z)
        grad = np.concatenate([ga[:-1] - ga[-1], gb, [gg], gd])
        return -ll / self.scale, -grad / self.scale

    def ratings_objective(self, zr, dep):
        f, g = self.joint_objective(np.concatenate([zr, dep]))
        return f, g[:len(zr)]

    def dependence_objective(self, d, zr):
        f, g = self.joint_objective(np.concatenate([zr, d]))
        return f, g[len(zr):]


def _team_counts(df: pd.DataFrame) -> pd.Series:
    return pd.concat([df["home_team"], df["away_team"]]).value_counts()


def _initial_ratings(problem: _Problem, warm: FitResult | None):
    m = problem.m
    x, y, w = problem.x, problem.y, problem.w
    mean_home = max(np.average(x, weights=w), 0.05)
    mean_away = max(np.average(y, weights=w), 0.05)
    if warm is None:
        alpha = np.ones(m)
        beta = np.full(m, np.log(mean_away) - 1.0)
        gamma = np.log(mean_home / mean_away)
        return alpha, beta, gamma
    prev = warm.params.ratings
    alpha = np.ones(m)
    beta = np.full(m, np.mean(prev.beta))
    for i, name in enumerate(problem.teams):
        j = prev.index.get(name)
        if j is not None:
            alpha[i] = prev.alpha[j]
            beta[i] = prev.beta[j]
    # recentring alpha and shifting beta the other way leaves all rates unchanged
    shift = alpha.mean() - 1.0
    return alpha - shift, beta + shift, prev.gamma


def _make_params(problem, alpha, beta, gamma, dep, xi):
    ratings = RatingSet(list(problem.teams), alpha, beta, gamma)
    if problem.model == "dc":
        return DcParams(ratings, float(dep[0]), xi)
    return MarcoParams(ratings, tuple(float(v) for v in dep), xi)


def _lbfgs(fun, z0, config: FitConfig, bounds=None, args=()):
    return minimize(fun, z0, args=args, jac=True, method="L-BFGS-B", bounds=bounds,
                    options={"maxiter": config.max_iterations, "ftol": config.optimizer_tolerance,
                             "gtol": 1e-7, "maxcor": 20})


def fit(matches: LeagueDataset, config: FitConfig, warm_start: FitResult | None = None,
        t: float | None = None, teams: Sequence[str] | None = None) -> FitResult:
    """Maximise the time-weighted likelihood of ``matches`` at day ``t``.

    ``t`` defaults to the day after the last match.  ``teams`` defaults to the
    teams present in ``matches``; listing a team that has too few matches
    raises :class:`TeamCoverageError`.
    """
    df = matches.matches
    if len(df) == 0:
        raise ValueError("cannot fit an empty window")
    if t is None:
        t = float(df["t"].max()) + 1.0
    teams = sorted(matches.teams if teams is None else teams)
    counts = _team_counts(df)
    short = [n for n in teams if counts.get(n, 0) < config.min_matches_per_team]
    if short:
        raise TeamCoverageError(short)

    index = {n: i for i, n in enumerate(teams)}
    home = df["home_team"].map(index).to_numpy()
    away = df["away_team"].map(index).to_numpy()
    w = match_weights(df["t"].to_numpy(dtype=float), t, config.xi)
    keep = w > 0
    if not keep.any():
        raise ValueError("all matches in the window have negligible weight")
    problem = _Problem(teams, home[keep].astype(np.int64), away[keep].astype(np.int64),
                       df["home_goals"].to_numpy(float)[keep],
                       df["away_goals"].to_numpy(float)[keep], w[keep], config.model)

    alpha0, beta0, gamma0 = _initial_ratings(problem, warm_start)
    indep = problem.independence()
    zr0 = problem.pack(alpha0, beta0, gamma0, [])
    res1 = _lbfgs(problem.ratings_objective, zr0, config, args=(indep,))
    zr1 = res1.x
    ll1 = -res1.fun * problem.scale
    best_z, best_ll = np.concatenate([zr1, indep]), ll1
    converged, iterations, message = bool(res1.success), int(res1.nit), str(res1.message)

    if not config.freeze_dependence:
        z2, ll2, ok2, it2, msg2 = _stage_two(problem, zr1, indep, config, warm_start)
        iterations += it2
        if ll2 >= ll1:
            best_z, best_ll = z2, ll2
            converged, message = ok2, msg2

    alpha, beta, gamma, dep = problem.unpack(best_z)
    params = _make_params(problem, alpha, beta, gamma, dep, config.xi)
    return FitResult(params, float(best_ll), converged, problem.scale, iterations, float(ll1),
                     float(t), int(keep.sum()), message)


def _stage_two(problem: _Problem, zr1, indep, config, warm_start):
    nr = len(zr1)
    d0 = indep.copy()
    if warm_start is not None and warm_start.params.model == problem.model:
        prev = warm_start.params
        d0 = np.atleast_1d(np.array(prev.rho if problem.model == "dc" else prev.theta, dtype=float))

    dep_bounds = None
    if problem.model == "dc":
        alpha, beta, gamma, _ = problem.unpack(np.concatenate([zr1, indep]))
        loglam, logmu = problem.rates(alpha, beta, gamma)
        lo, hi = window_rho_bounds(np.exp(loglam), np.exp(logmu))
        dep_bounds = [(lo, hi)]
        d0 = np.clip(d0, lo, hi)

    res_d = _lbfgs(problem.dependence_objective, d0, config, bounds=dep_bounds, args=(zr1,))
    z_start = np.concatenate([zr1, res_d.x])
    radius = config.refine_radius if problem.model == "marco" else None
    bounds = _refine_box(z_start, radius, nr, dep_bounds)
    res = _lbfgs(problem.joint_objective, z_start, config, bounds=bounds)
    iterations = int(res_d.nit) + int(res.nit)

    if problem.model == "dc":
        rho = res.x[-1]
        lo, hi = dep_bounds[0]
        if min(rho - lo, hi - rho) < 1e-6 * max(1.0, hi - lo):
            # ended on the feasibility boundary: restart from the interior
            z_alt = np.concatenate([zr1, [0.5 * rho]])
            alt = _lbfgs(problem.joint_objective, z_alt, config, bounds=bounds)
            iterations += int(alt.nit)
            if alt.fun < res.fun:
                res = alt
    return res.x, -res.fun * problem.scale, bool(res.success), iterations, str(res.message)


def _refine_box(z_start, radius, nr, dep_bounds):
    if radius is None:
        box = [(None, None)] * len(z_start)
    else:
        box = [(v - radius, v + radius) for v in z_start]
    if dep_bounds is not None:
        for j, (lo, hi) in enumerate(dep_bounds):
            a, b = box[nr + j]
            box[nr + j] = (lo if a is None else max(a, lo), hi if b is None else min(b, hi))
    if radius is None and dep_bounds is None:
        return None
    return box


def _window_key(window: LeagueDataset, t: float, xi: float):
    tk = window.matches["t"].to_numpy(dtype=float)
    return len(tk), int(np.count_nonzero(match_weights(tk, t, xi)))


def rolling_refit(dataset: LeagueDataset, config: FitConfig, calendar: Sequence[int],
                  skip_unfittable: bool = False) -> list[tuple[int, FitResult | None]]:
    """One fit per calendar day on the matches strictly before that day.

    Each fit is warm-started from the previous one.  When no match entered or
    left the weighted window since the previous day the previous estimates
    are reused (all weights scale by the same factor, so the maximiser is
    unchanged).
    """
    out = []
    prev, prev_key = None, None
    for day in calendar:
        win = dataset.window(day)
        key = _window_key(win, day, config.xi)
        if prev is not None and key == prev_key:
            out.append((day, replace(prev, t=float(day))))
            continue
        try:
            res = fit(win, config, warm_start=prev, t=day)
        except (TeamCoverageError, ValueError) as exc:
            if not skip_unfittable:
                raise
            log.debug("day %s skipped: %s", day, exc)
            out.append((day, None))
            continue
        out.append((day, res))
        prev, prev_key = res, key
    return out


@dataclass
class SCurvePoint:
    xi: float
    s: float
    n_matches: int
    skipped_days: tuple[int, ...]
    match_ids: tuple[str, ...]


def s_of_xi(dataset: LeagueDataset, model: str, xi: float, tuning_calendar: Sequence[int],
            base_config: FitConfig | None = None) -> SCurvePoint:
    """Sum over calendar days of the log probability given to each realised 1-X-2 result."""
    from .prediction import ONE_X_TWO, predict_day

    config = replace(base_config or FitConfig(model=model), model=model, xi=float(xi))
    total, ids, skipped = 0.0, [], []
    for day, res in rolling_refit(dataset, config, tuning_calendar, skip_unfittable=True):
        if res is None:
            skipped.append(day)
            continue
        fixtures = dataset.on_day(day)
        forecasts, _ = predict_day(res, fixtures, [ONE_X_TWO], model_tag=model)
        realized = {r.match_id: _result_class(r.home_goals, r.away_goals) for r in fixtures}
        for fc in forecasts:
            total += float(np.log(fc.probs[realized[fc.match_id]]))
            ids.append(fc.match_id)
    return SCurvePoint(float(xi), total, len(ids), tuple(skipped), tuple(ids))


def _result_class(h: int, a: int) -> int:
    return 0 if h > a else (1 if h == a else 2)


def _s_task(args):
    dataset, model, xi, calendar, base = args
    return s_of_xi(dataset, model, xi, calendar, base)


def tune_xi(dataset: LeagueDataset, model: str, grid: Sequence[float] = DEFAULT_XI_GRID,
            tuning_calendar: Sequence[int] | None = None, burn_in_seasons: int = 1,
            base_config: FitConfig | None = None, jobs: int | None = 1):
    """Grid search for the decay rate maximising the 1-X-2 log score.

    Returns ``(xi_star, curve)`` where ``curve`` is a DataFrame with one row
    per grid point.  Ties resolve to the smallest decay rate.
    """
    grid = sorted(set(float(g) for g in grid))
    if not grid or any(g < 0 for g in grid):
        raise ValueError("xi grid must be non-empty and non-negative")
    if tuning_calendar is None:
        tuning_calendar = prediction_calendar(dataset, burn_in_seasons)
    points = pmap(_s_task, [(dataset, model, xi, list(tuning_calendar), base_config) for xi in grid],
                  jobs)
    reference = points[0]
    for p in points[1:]:
        if p.skipped_days != reference.skipped_days or p.match_ids != reference.match_ids:
            raise RuntimeError(f"prediction set differs between xi={reference.xi} and xi={p.xi}; "
                               "S values are not comparable")
    curve = pd.DataFrame({"xi": [p.xi for p in points], "S": [p.s for p in points],
                          "n_matches": [p.n_matches for p in points],
                          "skipped_days": [len(p.skipped_days) for p in points]})
    best = int(np.argmax(curve["S"].to_numpy()))
    return float(curve["xi"].iloc[best]), curve
