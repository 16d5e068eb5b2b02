import math

import numpy as np
import pytest
from scipy import stats

from mtmm_audit.nullsim import (
    SimConfig, _sample_subsets, draw_study_data, empirical_expected_max, fit_tests, run,
    simulate_study, westfall_young_level,
)
from mtmm_audit.stattools import expected_max_exact


def test_config_validation():
    with pytest.raises(ValueError, match="identify"):
        SimConfig(n_subjects=12, n_covariates=10)
    with pytest.raises(ValueError):
        SimConfig(n_subjects=5)
    with pytest.raises(ValueError):
        SimConfig(model_cap=0)
    with pytest.raises(ValueError):
        SimConfig(alpha=1.0)
    with pytest.raises(ValueError):
        SimConfig(seed=-1)


def test_n_tests():
    assert SimConfig(n_outcomes=2, n_predictors=3, n_covariates=4, model_cap=5).n_tests == 30
    assert SimConfig(n_outcomes=2, n_predictors=3, n_covariates=2, model_cap=100).n_tests == 24


def test_fits_match_brute_force_ols():
    cfg = SimConfig(n_subjects=40, n_outcomes=2, n_predictors=3, n_covariates=3, model_cap=8, seed=9)
    y, x, cov, subsets = draw_study_data(cfg, 4)
    assert subsets == list(range(8))
    for cols, beta, t, df in fit_tests(y, x, cov, subsets):
        for j in range(y.shape[1]):
            for k in range(x.shape[1]):
                design = np.column_stack([np.ones(40), x[:, k], cov[:, cols]])
                coef, rss, *_ = np.linalg.lstsq(design, y[:, j], rcond=None)
                cov_coef = rss[0] / (40 - design.shape[1]) * np.linalg.inv(design.T @ design)
                assert beta[k, j] == pytest.approx(coef[1], rel=1e-9)
                assert t[k, j] == pytest.approx(coef[1] / math.sqrt(cov_coef[1, 1]), rel=1e-8)
                assert df == 40 - design.shape[1]


def test_draw_normal_scores_consistent():
    cfg = SimConfig(n_subjects=30, n_predictors=5, seed=1)
    d = simulate_study(cfg, 0)
    assert d.min_p == pytest.approx(2 * stats.norm.sf(d.max_abs_z), rel=1e-9)
    assert d.max_z <= d.max_abs_z


def test_subset_sampling():
    rng = np.random.default_rng(0)
    assert _sample_subsets(3, 8, rng) == list(range(8))
    s = _sample_subsets(20, 50, np.random.default_rng(1))
    assert s[0] == 0 and len(set(s)) == 50
    assert all(0 <= m < 2**20 for m in s)
    assert _sample_subsets(20, 80, np.random.default_rng(1))[:50] == s
    assert _sample_subsets(20, 1, rng) == [0]


def test_single_test_min_p_uniform():
    res = run(SimConfig(n_subjects=1000, replications=3000, seed=3))
    assert stats.kstest(res.min_p, "uniform").pvalue > 0.01


def test_single_test_level():
    r = 20_000
    res = run(SimConfig(n_subjects=100, replications=r, seed=17))
    assert abs(res.fwer_hat - 0.05) <= 3 * math.sqrt(0.05 * 0.95 / r)


@pytest.mark.slow
def test_signed_max_of_30_matches_expected_max():
    res = run(SimConfig(n_subjects=500, n_predictors=30, replications=200_000, seed=30))
    se = res.max_z.std(ddof=1) / math.sqrt(len(res.max_z))
    assert abs(res.max_z.mean() - 2.04276) <= 3 * se


def test_selected_beta_is_biased_upward():
    res = run(SimConfig(n_subjects=500, n_predictors=30, replications=5000, seed=2))
    assert res.selected_beta_mean > 5 * res.selected_beta_se
    # winner's z is about E[max of 30]; its coefficient has standard error close to 1/sqrt(n - 2)
    assert res.selected_beta_mean == pytest.approx(expected_max_exact(30) / math.sqrt(498), rel=0.05)


def test_duplicated_predictors_give_larger_min_p():
    base = dict(n_subjects=60, n_predictors=10, replications=2000, seed=5)
    indep = run(SimConfig(**base))
    dup = run(SimConfig(**base, duplicate_predictors=True))
    # paired seeds: the duplicated design only ever sees the first predictor
    assert np.all(dup.min_p >= indep.min_p * (1 - 1e-9))
    assert stats.mannwhitneyu(dup.min_p, indep.min_p, alternative="greater").pvalue < 1e-6
    assert dup.fwer_hat == pytest.approx(0.05, abs=0.015)


@pytest.mark.parametrize("field, values", [
    ("n_outcomes", [1, 2, 4]),
    ("n_predictors", [1, 3, 9]),
    ("model_cap", [1, 4, 16]),
])
def test_fwer_monotone_in_search(field, values):
    results = [run(SimConfig(n_subjects=50, n_covariates=6, replications=600, seed=8, **{field: v}))
               for v in values]
    for a, b in zip(results, results[1:]):
        # shared tests are recomputed in wider matrix products; allow last-bit rounding
        assert np.all(b.min_p <= a.min_p * (1 + 1e-9))
        assert b.fwer_hat >= a.fwer_hat


def test_run_is_deterministic_across_workers():
    cfg = SimConfig(n_subjects=50, n_outcomes=2, n_predictors=3, n_covariates=4, model_cap=6,
                    replications=40, seed=123)
    a = run(cfg)
    b = run(cfg)
    c = run(cfg, workers=3)
    assert a.to_json(full=True) == b.to_json(full=True) == c.to_json(full=True)


def test_fwer_estimate_definition():
    res = run(SimConfig(n_subjects=40, n_predictors=4, replications=300, seed=1))
    assert res.fwer_hat == np.mean(res.min_p < 0.05)
    assert len(res.min_p) == len(res.max_abs_z) == 300
    lines = res.min_p_csv().splitlines()
    assert lines[0] == "p" and len(lines) == 301


def test_empirical_expected_max():
    mean, se = empirical_expected_max(1, 20_000, seed=0)
    assert abs(mean) <= 3 * se
    for k, printed in [(10, 1.53875), (100, 2.50759)]:
        mean, se = empirical_expected_max(k, 200_000, seed=k)
        assert abs(mean - printed) <= 3 * se
    with pytest.raises(ValueError):
        empirical_expected_max(5, 999)


def test_empirical_expected_max_deterministic():
    assert empirical_expected_max(7, 25_000, seed=4) == empirical_expected_max(7, 25_000, seed=4)


def test_westfall_young_restores_level():
    rate, se = westfall_young_level(n_subjects=60, n_hypotheses=10, b=200, replications=600, seed=5)
    assert rate <= 0.05 + 3 * se
