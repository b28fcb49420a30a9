import json

import numpy as np
import pytest
from scipy import stats

from scoreline.diagnostics import (AGGREGATE_NOTE, collapsed_independence_test, dispersion_test,
                                   kl_poisson_test, pearson_independence_test, ratio_table,
                                   run_all, spearman_curve)


def test_comonotone_pearson():
    x = np.array([0, 1, 2, 3, 1, 0, 2, 4] * 10)
    rep = pearson_independence_test((x, x), n_rep=199, seed=1)
    assert rep.statistic == pytest.approx(1.0)
    assert rep.p_value == pytest.approx(1 / 200)
    assert rep.notes == [AGGREGATE_NOTE]


def test_zero_variance_rejected():
    with pytest.raises(ValueError):
        pearson_independence_test((np.ones(10), np.arange(10)), 10)
    with pytest.raises(ValueError):
        pearson_independence_test((np.ones(1), np.ones(1)), 10)


def test_pearson_matches_scipy(rng):
    x, y = rng.poisson(1.5, 300), rng.poisson(1.1, 300)
    rep = pearson_independence_test((x, y), 99, seed=0)
    assert rep.statistic == pytest.approx(stats.pearsonr(x, y)[0], abs=1e-12)
    assert 0 < rep.p_value <= 1


def test_collapse_identity_when_all_scores_at_least_two(rng):
    x, y = rng.integers(2, 6, 200), rng.integers(2, 6, 200)
    a = collapsed_independence_test((x, y), 99, seed=2)
    b = pearson_independence_test((x, y), 99, seed=2)
    assert a.statistic == pytest.approx(b.statistic, abs=1e-14)
    assert a.alternative == "less"


def test_ratio_table_marginal_constraint(rng):
    x, y = rng.poisson(1.4, 2000), rng.poisson(1.0, 2000)
    K = int(max(x.max(), y.max()))
    table = ratio_table((x, y), n_rep=50, max_goals=K, seed=0)
    fy = np.bincount(y, minlength=K + 1) / len(y)
    for h in range(K + 1):
        row = table.ratio[h]
        ok = np.isfinite(row)
        if ok.any():
            # observed cells carry the row's weight; unobserved cells contribute zero
            assert np.sum(row[ok] * fy[ok]) == pytest.approx(100.0, rel=1e-9)
    assert np.all(table.ratio[table.counts > 0] > 0)


def test_ratio_table_absent_cells_and_layout():
    x = np.array([0, 0, 1, 1, 2, 0, 1, 2])
    y = np.array([0, 1, 0, 1, 0, 2, 2, 1])
    table = ratio_table((x, y), n_rep=30, seed=1)
    assert np.isnan(table.ratio[3, 3]) and table.counts[3, 3] == 0
    assert table.ratio[2, 2] != 0 and np.isnan(table.ratio[2, 2])  # unobserved, not zero
    frame = table.to_frame()
    assert list(frame.columns) == ["home_goals", "0", "1", "2", "3", "4"]
    assert "(" in frame.loc[0, "0"]
    rep = table.report()
    assert rep.p_value is None and 0 <= rep.statistic <= 1


def test_dispersion_constant_and_zero_mean():
    rep = dispersion_test(np.full(50, 2), n_rep=99, seed=0)
    assert rep.statistic == 0.0 and rep.p_value == pytest.approx(1.0)
    with pytest.raises(ValueError):
        dispersion_test(np.zeros(10), 10)
    with pytest.raises(ValueError):
        dispersion_test([1.5, 2], 10)


def test_dispersion_detects_overdispersion(rng):
    counts = rng.negative_binomial(2, 0.5, 2000)
    assert dispersion_test(counts, 199, seed=0).p_value < 0.01


def test_kl_mixture_rejected(rng):
    n = 5000
    comp = rng.random(n) < 0.5
    counts = np.where(comp, rng.poisson(0.5, n), rng.poisson(3.0, n))
    rep = kl_poisson_test(counts, 999, seed=0)
    assert rep.p_value < 0.01


def test_kl_near_poisson_is_small(rng):
    counts = rng.poisson(1.3, 200_000)
    rep = kl_poisson_test(counts, 99, seed=0)
    assert rep.statistic < 1e-4 and rep.p_value > 0.01


def test_spearman_signs():
    curve = spearman_curve([-0.2, 0.0, 0.2], n_rep=60, seed=3)
    assert curve["mean"].iloc[0] < 0 < curve["mean"].iloc[2]
    assert abs(curve["mean"].iloc[1]) < 2 * curve["se"].iloc[1] + 1e-12 or \
        curve["lower"].iloc[1] <= 0 <= curve["upper"].iloc[1]
    assert list(curve.columns) == ["theta3", "mean", "se", "lower", "upper"]


def test_run_all_deterministic(rng):
    x, y = rng.poisson(1.4, 400), rng.poisson(1.1, 400)
    a = run_all((x, y), n_rep=99, seed=5)
    b = run_all((x, y), n_rep=99, seed=5)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert len(a) == 7
    for rep in a.values():
        assert rep["p_value"] is None or 0 <= rep["p_value"] <= 1
        assert rep["n_replicates"] >= 1
