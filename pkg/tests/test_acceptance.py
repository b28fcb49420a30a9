"""Acceptance criteria 1-10, one PASS/FAIL line each (see the summary section)."""
import numpy as np
import pandas as pd
import pytest
from scipy import stats

from scoreline import diagnostics as diag
from scoreline.dixon_coles import dc_grid, joint_pmf_dc, rho_bounds
from scoreline.estimation import DEFAULT_XI_GRID, FitConfig, fit, tune_xi
from scoreline.evaluation import BacktestLedger, reshuffle_test, rps, rps_many
from scoreline.marco import joint_pmf_marco, marco_grid
from scoreline.simulate import SimScenario, generate

RATES = (0.5, 1.0, 1.5, 2.5)


def test_c1_independence_reduction(criterion):
    h, a = np.meshgrid(np.arange(11), np.arange(11), indexing="ij")
    worst = 0.0
    for lam in RATES:
        for mu in RATES:
            ref = stats.poisson.pmf(h, lam) * stats.poisson.pmf(a, mu)
            worst = max(worst,
                        np.abs(joint_pmf_marco(lam, mu, (0.0, 1.0, 0.0), h, a) - ref).max(),
                        np.abs(joint_pmf_dc(lam, mu, 0.0, h, a) - ref).max())
    assert criterion(1, worst <= 1e-12, f"max |pmf - Poisson product| = {worst:.2e} (tol 1e-12)")


def test_c2_dc_marginals_and_block(criterion):
    rng = np.random.default_rng(20240602)
    G = 60
    worst_marg = worst_block = 0.0
    for _ in range(50):
        lam, mu = rng.uniform(0.2, 3.5, 2)
        lo, hi = rho_bounds(lam, mu)
        rho = lo + rng.uniform(0, 1) * (hi - lo)
        grid = dc_grid(lam, mu, rho, G)
        g = np.arange(G + 1)
        worst_marg = max(worst_marg,
                         np.abs(grid.sum(axis=1) - stats.poisson.pmf(g, lam)).max(),
                         np.abs(grid.sum(axis=0) - stats.poisson.pmf(g, mu)).max())
        indep = np.outer(stats.poisson.pmf(g[:2], lam), stats.poisson.pmf(g[:2], mu))
        worst_block = max(worst_block, abs(grid[:2, :2].sum() - indep.sum()))
    ok = max(worst_marg, worst_block) <= 1e-10
    assert criterion(2, ok, f"50 triples: marginal err {worst_marg:.2e}, block err "
                            f"{worst_block:.2e} (tol 1e-10)")


def _under25(grid):
    h, a = np.indices(grid.shape)
    return grid[h + a <= 2].sum()


def test_c3_under_two_and_half(criterion):
    worst = 0.0
    for lam in RATES:
        for mu in RATES:
            lo, hi = rho_bounds(lam, mu)
            vals = [_under25(dc_grid(lam, mu, r, 20)) for r in (lo, 0.0, hi)]
            worst = max(worst, max(vals) - min(vals))
    gap = abs(_under25(marco_grid(1.0, 1.5, (0, 1, 0.05), 40))
              - _under25(marco_grid(1.0, 1.5, (0, 1, 0.0), 40)))
    ok = worst <= 1e-10 and gap > 1e-6
    assert criterion(3, ok, f"DC spread over rho {worst:.2e} (tol 1e-10); Mar-Co shift at "
                            f"theta3=0.05 {gap:.2e} (> 1e-6)")


def _rps_brute(p, k):
    total, cp, co = 0.0, 0.0, 0.0
    for i in range(len(p) - 1):
        cp += p[i]
        co += 1.0 if i == k else 0.0
        total += (cp - co) ** 2
    return total / (len(p) - 1)


def test_c4_rps_oracle(criterion):
    rng = np.random.default_rng(4)
    P = rng.dirichlet(np.ones(3), 10_000)
    r = rng.integers(0, 3, 10_000)
    brute = np.array([_rps_brute(p, k) for p, k in zip(P, r)])
    err_many = np.abs(rps_many(P, r) - brute).max()
    err_single = max(abs(rps(P[i], r[i]) - brute[i]) for i in range(0, 10_000, 37))
    uniform = rps([1 / 3, 1 / 3, 1 / 3], 0)
    ok = max(err_many, err_single) <= 1e-12 and abs(uniform - 5 / 18) <= 1e-12
    assert criterion(4, ok, f"max err {max(err_many, err_single):.2e} on 10^4 forecasts; "
                            f"uniform/home = {uniform:.15f} vs 5/18")


def _recovered(theta3, seed):
    ds, truth = generate(SimScenario(m=20, seasons=10, model="marco", theta=(0.0, 1.0, theta3),
                                     gamma=0.25, seed=seed))
    true = next(iter(truth.ratings.values()))  # static strengths
    res = fit(ds, FitConfig(model="marco"))
    r = res.params.ratings
    idx = [true.index[n] for n in r.teams]
    rmse_a = np.sqrt(np.mean((r.alpha - true.alpha[idx]) ** 2))
    rmse_b = np.sqrt(np.mean((r.beta - true.beta[idx]) ** 2))
    t3 = res.params.theta[2]
    sign_ok = theta3 == 0 or np.sign(t3) == np.sign(theta3)
    return rmse_a < 0.1 and rmse_b < 0.1 and abs(r.gamma - 0.25) <= 0.05 and sign_ok


def test_c5_parameter_recovery(criterion):
    counts = {t3: sum(_recovered(t3, seed) for seed in range(20)) for t3 in (-0.08, 0.0, 0.05)}
    ok = all(c >= 18 for c in counts.values())
    detail = ", ".join(f"theta3={t3:+.2f}: {c}/20" for t3, c in counts.items())
    assert criterion(5, ok, f"replicates recovering alpha, beta, gamma and sign ({detail}; "
                            f"need >= 18/20 each)")


def test_c6_xi_tuning(criterion):
    grid = np.round(np.arange(0, 0.01001, 0.001), 4)
    static, _ = generate(SimScenario(m=20, seasons=6, model="dc", step=0.0, seed=0))
    xi_static, _ = tune_xi(static, "dc", grid, burn_in_seasons=1)
    drift = []
    for seed in range(10):
        ds, _ = generate(SimScenario(m=20, seasons=6, model="dc", step=0.15, seed=seed))
        drift.append(tune_xi(ds, "dc", grid, burn_in_seasons=1)[0])
    n_pos = sum(x > 0 for x in drift)
    ok = xi_static == 0 and n_pos >= 8
    assert criterion(6, ok, f"static xi* = {xi_static:g}; random walk xi* > 0 in {n_pos}/10 "
                            f"(need >= 8)")


def test_c7_diagnostic_calibration(criterion):
    rng = np.random.default_rng(777)
    n_sets, n, n_rep = 500, 1000, 199
    # DC at rho = -0.1 shares the independence null of the collapsed table
    g = dc_grid(1.4, 1.1, -0.1, 20).ravel()
    g /= g.sum()
    rej = dict.fromkeys(["pearson", "collapsed", "ratio_table", "dispersion", "kl"], 0.0)
    for i in range(n_sets):
        x, y = rng.poisson(1.4, n), rng.poisson(1.1, n)
        rej["pearson"] += diag.pearson_independence_test((x, y), n_rep, seed=i).p_value <= 0.05
        xd, yd = divmod(rng.choice(g.size, n, p=g), 21)
        rej["collapsed"] += diag.collapsed_independence_test((xd, yd), n_rep,
                                                             seed=i).p_value <= 0.05
        rej["ratio_table"] += diag.ratio_table((x, y), n_rep, seed=i).flags.mean()
        rej["dispersion"] += diag.dispersion_test(x, n_rep, seed=i).p_value <= 0.05
        rej["kl"] += diag.kl_poisson_test(x, n_rep, seed=i).p_value <= 0.05
    rates = {k: v / n_sets for k, v in rej.items()}
    ok = all(0.02 <= r <= 0.08 for r in rates.values())
    detail = ", ".join(f"{k} {r:.3f}" for k, r in rates.items())
    assert criterion(7, ok, f"null rejection rates at 0.05 ({detail}; band [0.02, 0.08])")


def test_c8_spearman_curve(criterion):
    curve = diag.spearman_curve([-0.2, -0.1, 0.0, 0.1, 0.2], n_rep=250, sample_size=1000,
                                seed=8)
    means = curve["mean"].to_numpy()
    ok = abs(means[2]) <= 0.02 and bool(np.all(np.diff(means) > 0))
    assert criterion(8, ok, "means " + ", ".join(f"{m:+.4f}" for m in means)
                            + " (|mean at 0| <= 0.02, strictly increasing)")


def _ledger(rps_a, rps_b):
    rows = [{"order": k, "match_id": f"m{k}", "t": k, "league": "L", "market": "1x2",
             "model": model, "p1": np.nan, "p2": np.nan, "p3": np.nan, "realized": 0,
             "rps": vals[k]}
            for model, vals in (("A", rps_a), ("B", rps_b)) for k in range(len(rps_a))]
    return BacktestLedger(pd.DataFrame(rows))


def test_c9_reshuffle_sanity(criterion):
    rng = np.random.default_rng(9)
    a = rng.uniform(0.1, 0.4, 200)
    dominant = reshuffle_test(_ledger(a, a - 0.05), "A", "B", "1x2", n_b=10_000, seed=9)
    same = reshuffle_test(_ledger(a, a), "A", "B", "1x2", n_b=10_000, seed=9)
    ok = dominant.exceedance < 0.001 and same.observed_diff == 0
    assert criterion(9, ok, f"exceedance {dominant.exceedance:.4f} (< 0.001) favouring "
                            f"{dominant.favoured}; identical ledgers diff {same.observed_diff}")


def test_c10_real_data(criterion):
    from conftest import ACCEPTANCE_LINES
    ACCEPTANCE_LINES.append("SKIP criterion 10: real-data reproduction needs a download; "
                            "no network (soft)")
    pytest.skip("no network: the public results files cannot be downloaded (soft criterion)")
