"""Resampling tests for dependence and Poissonity of aggregated scores.

All tests work on the aggregated home/away goal counts of a dataset (not
team-pair specific variables).  Monte Carlo p-values use
(1 + #{replicates at least as extreme}) / (1 + n_rep).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy import stats
from scipy.special import gammaln

from ._util import stream
from .marco import sample_matches

AGGREGATE_NOTE = ("computed on home/away goals pooled over all matches; it says little directly "
                  "about the scores of any specific pair of teams, so read it with care")


@dataclass
class TestReport:
    test: str
    statistic: float
    p_value: float | None
    n_replicates: int
    seed: int
    n: int
    alternative: str
    notes: list[str] = field(default_factory=lambda: [AGGREGATE_NOTE])
    extra: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _mc_pvalue(null: np.ndarray, observed: float, alternative: str) -> float:
    null = np.asarray(null, dtype=float)
    tol = 1e-12 * max(1.0, abs(observed))
    if alternative == "greater":
        hits = np.count_nonzero(null >= observed - tol)
    elif alternative == "less":
        hits = np.count_nonzero(null <= observed + tol)
    elif alternative == "two-sided":
        hits = np.count_nonzero(np.abs(null) >= abs(observed) - tol)
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return (1 + hits) / (1 + null.size)


def _xy(data):
    if hasattr(data, "matches"):
        df = data.matches
        return df["home_goals"].to_numpy(float), df["away_goals"].to_numpy(float)
    x, y = data
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def _permutation_correlations(x, y, n_rep, rng, chunk=500):
    """Pearson correlations of x with n_rep random permutations of y."""
    xc = (x - x.mean()) / np.sqrt(np.sum((x - x.mean()) ** 2))
    yc = (y - y.mean()) / np.sqrt(np.sum((y - y.mean()) ** 2))
    out = np.empty(n_rep)
    for s in range(0, n_rep, chunk):
        k = min(chunk, n_rep - s)
        perms = rng.permuted(np.broadcast_to(yc, (k, yc.size)), axis=1)
        out[s:s + k] = perms @ xc
    return out


def _corr(x, y):
    if x.size < 2:
        raise ValueError("need at least 2 matches")
    if np.var(x) == 0 or np.var(y) == 0:
        raise ValueError("zero variance in a margin; correlation undefined")
    return float(np.corrcoef(x, y)[0, 1])


def pearson_independence_test(data, n_rep: int = 1000, seed: int = 0,
                              alternative: str = "two-sided") -> TestReport:
    """Correlation of home and away goals against re-paired (permuted) data."""
    x, y = _xy(data)
    r = _corr(x, y)
    null = _permutation_correlations(x, y, n_rep, stream(seed, "pearson"))
    return TestReport("pearson_independence", r, _mc_pvalue(null, r, alternative), n_rep, seed,
                      x.size, alternative)


def collapsed_independence_test(data, n_rep: int = 1000, seed: int = 0,
                                alternative: str = "less") -> TestReport:
    """Independence of max(1, x) and max(1, y).

    Under Dixon-Coles dependence the collapsed scores are independent.  The
    default alternative is negative association (the left tail).
    """
    x, y = _xy(data)
    xt, yt = np.maximum(1.0, x), np.maximum(1.0, y)
    r = _corr(xt, yt)
    null = _permutation_correlations(xt, yt, n_rep, stream(seed, "collapsed"))
    return TestReport("collapsed_independence", r, _mc_pvalue(null, r, alternative), n_rep, seed,
                      x.size, alternative)


@dataclass
class RatioTable:
    """Observed joint frequency over the product of observed marginals, x100."""

    ratio: np.ndarray
    se: np.ndarray
    flags: np.ndarray
    counts: np.ndarray
    n: int
    n_rep: int
    seed: int
    level: float = 0.05

    @property
    def flagged_fraction(self) -> float:
        valid = np.isfinite(self.ratio) & np.isfinite(self.se)
        return float(self.flags[valid].mean()) if valid.any() else float("nan")

    def to_frame(self) -> pd.DataFrame:
        """Table in the usual layout: one row per home score, 'ratio (se)' cells."""
        G = self.ratio.shape[0]
        cells = [[("" if not np.isfinite(self.ratio[h, a]) else
                   f"{self.ratio[h, a]:.2f} ({self.se[h, a]:.2f})" + ("*" if self.flags[h, a] else ""))
                  for a in range(G)] for h in range(G)]
        df = pd.DataFrame(cells, columns=[str(a) for a in range(G)])
        df.insert(0, "home_goals", range(G))
        return df

    def report(self) -> TestReport:
        return TestReport("ratio_table", self.flagged_fraction, None, self.n_rep, self.seed,
                          self.n, "two-sided",
                          extra={"ratio": _nan_list(self.ratio), "se": _nan_list(self.se),
                                 "flags": self.flags.tolist(), "level": self.level})


def _nan_list(a):
    return [[None if not np.isfinite(v) else float(v) for v in row] for row in a]


def _ratios(x, y, K, n):
    """Ratio x100 on the (K x K) cells; x, y integer arrays (clipped codes >= K ignored)."""
    joint = np.zeros((K, K))
    inx = (x < K) & (y < K)
    np.add.at(joint, (x[inx], y[inx]), 1.0)
    fx = np.bincount(x[x < K], minlength=K)[:K] / n
    fy = np.bincount(y[y < K], minlength=K)[:K] / n
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 100.0 * (joint / n) / np.outer(fx, fy)
    r[joint == 0] = np.nan
    return r, joint


def ratio_table(data, n_rep: int = 1000, max_goals: int = 4, seed: int = 0,
                level: float = 0.05) -> RatioTable:
    """Ratio table with case-resampling bootstrap standard errors.

    Cells never observed are reported as NaN (absent), not zero.  A cell is
    flagged when its ratio differs from 100 by more than z * SE.
    """
    x, y = _xy(data)
    x, y = x.astype(np.int64), y.astype(np.int64)
    n = x.size
    if n < 1:
        raise ValueError("need at least 1 match")
    K = max_goals + 1
    ratio, counts = _ratios(x, y, K, n)
    rng = stream(seed, "ratio-table")
    boot = np.empty((n_rep, K, K))
    for b in range(n_rep):
        idx = rng.integers(0, n, n)
        boot[b], _ = _ratios(x[idx], y[idx], K, n)
    with np.errstate(invalid="ignore"):
        valid = np.sum(np.isfinite(boot), axis=0) >= 2
        se = np.full((K, K), np.nan)
        se[valid] = np.nanstd(boot[:, valid], axis=0, ddof=1)
    z = stats.norm.ppf(1 - level / 2)
    flags = np.isfinite(ratio) & np.isfinite(se) & (np.abs(ratio - 100.0) > z * se)
    return RatioTable(ratio, se, flags, counts, n, n_rep, seed, level)


def _counts(counts):
    c = np.asarray(counts, dtype=float)
    if c.size < 2:
        raise ValueError("need at least 2 observations")
    if np.any(c < 0) or np.any(c != np.round(c)):
        raise ValueError("counts must be non-negative integers")
    if c.mean() <= 0:
        raise ValueError("sample mean is 0; Poisson reference undefined")
    return c


def _dispersion(samples: np.ndarray) -> np.ndarray:
    m = samples.mean(axis=-1)
    v = samples.var(axis=-1, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(m > 0, v / np.where(m > 0, m, 1.0), 0.0)


def dispersion_test(counts, n_rep: int = 1000, seed: int = 0,
                    label: str = "dispersion") -> TestReport:
    """Variance-to-mean ratio against Poisson samples with the observed mean."""
    c = _counts(counts)
    stat = float(_dispersion(c))
    rng = stream(seed, label)
    null = _dispersion(rng.poisson(c.mean(), size=(n_rep, c.size)).astype(float))
    return TestReport("dispersion", stat, _mc_pvalue(null, stat, "greater"), n_rep, seed, c.size,
                      "greater")


def _kl_rows(samples: np.ndarray) -> np.ndarray:
    """KL(empirical || Poisson(sample mean)) for each row, over the observed support."""
    samples = np.atleast_2d(samples).astype(np.int64)
    n_rows, n = samples.shape
    top = int(samples.max()) + 1
    offsets = (np.arange(n_rows) * top)[:, None]
    freq = np.bincount((samples + offsets).ravel(), minlength=n_rows * top).reshape(n_rows, top) / n
    mean = samples.mean(axis=1)
    h = np.arange(top)
    with np.errstate(divide="ignore", invalid="ignore"):
        logpois = h[None, :] * np.log(mean[:, None]) - mean[:, None] - gammaln(h + 1.0)[None, :]
        terms = np.where(freq > 0, freq * (np.log(freq) - logpois), 0.0)
    return terms.sum(axis=1)


def kl_poisson_test(counts, n_rep: int = 1000, seed: int = 0,
                    label: str = "kl-poisson") -> TestReport:
    """Kullback-Leibler divergence from Poisson(mean), parametric bootstrap.

    Each replicate is compared with the Poisson fitted to that replicate, so
    the observed and null statistics are computed the same way.
    """
    c = _counts(counts)
    stat = float(_kl_rows(c)[0])
    rng = stream(seed, label)
    null = _kl_rows(rng.poisson(c.mean(), size=(n_rep, c.size)))
    return TestReport("kl_poisson", stat, _mc_pvalue(null, stat, "greater"), n_rep, seed, c.size,
                      "greater")


def spearman_curve(theta3_grid, theta1: float = 0.0, theta2: float = 1.0, lam: float = 1.25,
                   mu: float = 1.75, n_rep: int = 250, sample_size: int = 1000,
                   seed: int = 0) -> pd.DataFrame:
    """Monte Carlo Spearman correlation of Mar-Co scores over a theta3 grid.

    Returns mean, standard error and the 2.5/97.5 percentile band per grid
    point.  Ties use average ranks.
    """
    rows = []
    for t3 in theta3_grid:
        rng = stream(seed, f"spearman:{float(t3)!r}")
        h, a = sample_matches(lam, mu, (theta1, theta2, float(t3)), rng, size=(n_rep, sample_size))
        rhos = np.array([_spearman(h[i], a[i]) for i in range(n_rep)])
        lo, hi = np.nanpercentile(rhos, [2.5, 97.5])
        rows.append({"theta3": float(t3), "mean": float(np.nanmean(rhos)),
                     "se": float(np.nanstd(rhos, ddof=1) / np.sqrt(np.isfinite(rhos).sum())),
                     "lower": float(lo), "upper": float(hi)})
    return pd.DataFrame(rows)


def _spearman(x, y) -> float:
    rx = stats.rankdata(x)
    ry = stats.rankdata(y)
    if rx.std() == 0 or ry.std() == 0:
        return float("nan")
    return float(np.corrcoef(rx, ry)[0, 1])


def run_all(data, n_rep: int = 1000, seed: int = 0) -> dict:
    """The five diagnostics on one dataset, as plain dicts."""
    x, y = _xy(data)
    table = ratio_table((x, y), n_rep=n_rep, seed=seed)
    return {
        "pearson_independence": pearson_independence_test((x, y), n_rep, seed).to_dict(),
        "collapsed_independence": collapsed_independence_test((x, y), n_rep, seed).to_dict(),
        "ratio_table": table.report().to_dict(),
        "dispersion_home": dispersion_test(x, n_rep, seed, "dispersion:home").to_dict(),
        "dispersion_away": dispersion_test(y, n_rep, seed, "dispersion:away").to_dict(),
        "kl_poisson_home": kl_poisson_test(x, n_rep, seed, "kl-poisson:home").to_dict(),
        "kl_poisson_away": kl_poisson_test(y, n_rep, seed, "kl-poisson:away").to_dict(),
    }
