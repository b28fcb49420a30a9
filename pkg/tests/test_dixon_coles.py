import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import poisson

from scoreline.dixon_coles import (DcParams, InfeasibleRho, RatingSet, dc_grid, intensities,
                                   joint_pmf_dc, log_weighted_likelihood_dc, rho_bounds, tau)

from conftest import toy_dataset


def ratings2(gamma=0.0, ai=0.0, bi=0.0, aj=0.0, bj=0.0):
    return RatingSet(["I", "J"], [ai, aj], [bi, bj], gamma)


def test_intensities_zero_effects():
    assert intensities(ratings2(), "I", "J") == (1.0, 1.0)


def test_intensities_hand_values():
    lam, mu = intensities(ratings2(0.405, 0.3, -0.4, 0.2, -0.1), "I", "J")
    assert lam == pytest.approx(math.exp(0.605), abs=1e-12)
    assert lam == pytest.approx(1.8313, abs=1e-4)
    assert mu == pytest.approx(0.8187, abs=1e-4)


def test_intensities_beta_shift():
    lam0, mu0 = intensities(ratings2(0.1, 0.2, 0.3, 0.4, 0.5), "I", "J")
    lam1, mu1 = intensities(ratings2(0.1, 0.2, 0.3, 0.4, 0.5 + 0.25), "I", "J")
    assert lam1 / lam0 == pytest.approx(math.exp(0.25))
    assert mu1 == mu0


def test_unknown_team_named():
    with pytest.raises(KeyError, match="Nowhere"):
        intensities(ratings2(), "I", "Nowhere")


def test_tau_hand_values():
    vals = [tau(1, 1.5, h, a, 0.1) for h, a in [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0)]]
    assert vals == pytest.approx([0.85, 1.1, 1.15, 0.9, 1.0], abs=1e-15)


def test_tau_rho_zero_is_one():
    h, a = np.meshgrid(np.arange(5), np.arange(5))
    assert np.all(tau(1.3, 0.7, h, a, 0.0) == 1.0)


def test_tau_at_upper_bound():
    assert tau(1, 1.5, 0, 0, 2 / 3) == pytest.approx(0.0, abs=1e-15)


def test_tau_infeasible():
    with pytest.raises(InfeasibleRho):
        tau(1, 1.5, 0, 0, 0.7)


@pytest.mark.parametrize("lam,mu,expected", [(1, 1.5, (-2 / 3, 2 / 3)), (1, 1, (-1, 1)),
                                              (2, 2, (-0.5, 0.25))])
def test_rho_bounds(lam, mu, expected):
    assert rho_bounds(lam, mu) == pytest.approx(expected, abs=1e-15)


def test_joint_pmf_examples():
    assert joint_pmf_dc(1, 1.5, 0.0, 0, 0) == pytest.approx(math.exp(-2.5), rel=1e-14)
    assert joint_pmf_dc(1, 1.5, 0.1, 0, 0) == pytest.approx(0.85 * math.exp(-2.5), rel=1e-14)
    assert joint_pmf_dc(1, 1.5, 0.3, 3, 2) == pytest.approx(joint_pmf_dc(1, 1.5, 0.0, 3, 2),
                                                             rel=1e-15)


feasible = st.tuples(st.floats(0.2, 4.0), st.floats(0.2, 4.0), st.floats(0.001, 0.999)).map(
    lambda v: (v[0], v[1], rho_bounds(v[0], v[1])[0] + v[2] * (rho_bounds(v[0], v[1])[1]
                                                               - rho_bounds(v[0], v[1])[0])))


@given(feasible)
@settings(max_examples=60, deadline=None)
def test_marginals_and_block_identity(p):
    lam, mu, rho = p
    grid = dc_grid(lam, mu, rho, 60)
    g = np.arange(61)
    assert np.allclose(grid.sum(axis=1), poisson.pmf(g, lam), atol=1e-10, rtol=0)
    assert np.allclose(grid.sum(axis=0), poisson.pmf(g, mu), atol=1e-10, rtol=0)
    block = grid[:2, :2].sum()
    prod = np.outer(poisson.pmf([0, 1], lam), poisson.pmf([0, 1], mu)).sum()
    assert block == pytest.approx(prod, abs=1e-12)
    assert grid.sum() == pytest.approx(1.0, abs=1e-10)


def test_log_likelihood_weights_and_oracle():
    ds = toy_dataset([("2014-08-01", "I", "J", 2, 1), ("2014-11-09", "J", "I", 0, 0)])
    params = DcParams(ratings2(0.2, 1.1, -0.9, 0.9, -1.1), rho=-0.05, xi=0.0)
    t = ds.matches["t"].max() + 1
    # oracle: direct summation of log joint pmfs
    direct = 0.0
    for r in ds:
        lam, mu = intensities(params.ratings, r.home_team, r.away_team)
        direct += math.log(joint_pmf_dc(lam, mu, params.rho, r.home_goals, r.away_goals))
    assert log_weighted_likelihood_dc(params, ds, t) == pytest.approx(direct, rel=1e-12)


def test_single_match_weight():
    ds = toy_dataset([("2014-08-01", "I", "J", 2, 1)])
    params = DcParams(ratings2(0.2, 1.1, -0.9, 0.9, -1.1), rho=0.0, xi=0.01)
    lam, mu = intensities(params.ratings, "I", "J")
    logpmf = math.log(joint_pmf_dc(lam, mu, 0.0, 2, 1))
    got = log_weighted_likelihood_dc(params, ds, 100)
    assert got == pytest.approx(math.exp(-1) * logpmf, rel=1e-12)
    assert math.exp(-1) == pytest.approx(0.367879, abs=1e-6)


def test_weight_cutoff_and_empty_window():
    ds = toy_dataset([("2014-08-01", "I", "J", 2, 1)])
    params = DcParams(ratings2(), rho=0.0, xi=1.0)
    assert log_weighted_likelihood_dc(params, ds, 50) == 0.0  # weight e^-50 < 1e-6
    assert log_weighted_likelihood_dc(params, ds.window(0), 0) == 0.0


def test_infeasible_rho_sentinel():
    ds = toy_dataset([("2014-08-01", "I", "J", 0, 0)])
    params = DcParams(ratings2(1.0, 1.0, 0.0, 1.0, 0.0), rho=0.9)
    assert log_weighted_likelihood_dc(params, ds, 1) == -math.inf
