"""Seeded Monte Carlo of null FFQ-style studies searched over many models.

Every replication draws outcomes, predictors and covariates as independent
standard normals, then fits ``outcome ~ 1 + predictor + covariate subset`` by
least squares for each outcome x predictor x examined subset. The predictor's
t statistic is mapped to a standard-normal score through its exact t
distribution, so under the null every test's z is exactly N(0, 1).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from .stattools import adjust_sidak, substream, westfall_young_minp


@dataclass(frozen=True)
class SimConfig:
    n_subjects: int = 100
    n_outcomes: int = 1
    n_predictors: int = 1
    n_covariates: int = 0
    model_cap: int = 1
    replications: int = 1000
    alpha: float = 0.05
    seed: int = 0
    # Every predictor a copy of the first (maximal dependence between tests).
    duplicate_predictors: bool = False

    def __post_init__(self):
        if self.n_subjects < 10:
            raise ValueError("n_subjects must be >= 10")
        if self.n_outcomes < 1 or self.n_predictors < 1:
            raise ValueError("need at least one outcome and one predictor")
        if self.n_covariates < 0:
            raise ValueError("n_covariates must be >= 0")
        if self.model_cap < 1:
            raise ValueError("model_cap must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.n_subjects <= self.n_covariates + 2:
            raise ValueError(
                f"{self.n_subjects} subjects cannot identify a model with "
                f"{self.n_covariates} covariates, a predictor and an intercept"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def n_tests(self) -> int:
        """Tests per replication."""
        return self.n_outcomes * self.n_predictors * min(self.model_cap, 2**self.n_covariates)

    @property
    def exhaustive(self) -> bool:
        return 2**self.n_covariates <= self.model_cap


class StudyDraw(NamedTuple):
    min_p: float
    max_abs_z: float
    max_z: float
    # coefficient of the test with the largest signed z
    selected_beta: float


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    min_p: np.ndarray
    max_abs_z: np.ndarray
    max_z: np.ndarray
    selected_beta: np.ndarray

    @property
    def fwer_hat(self) -> float:
        return float(np.mean(self.min_p < self.config.alpha))

    @property
    def fwer_se(self) -> float:
        f = self.fwer_hat
        return math.sqrt(f * (1 - f) / len(self.min_p))

    @property
    def selected_beta_mean(self) -> float:
        return float(np.mean(self.selected_beta))

    @property
    def selected_beta_se(self) -> float:
        if len(self.selected_beta) < 2:
            return float("nan")
        return float(np.std(self.selected_beta, ddof=1) / math.sqrt(len(self.selected_beta)))

    @property
    def expected_fwer_independent(self) -> float:
        """FWER if all tests of a replication were independent."""
        return adjust_sidak(self.config.alpha, self.config.n_tests)

    def to_dict(self, full: bool = False) -> dict:
        d = {
            "config": asdict(self.config),
            "n_tests": self.config.n_tests,
            "fwer_hat": self.fwer_hat,
            "fwer_se": self.fwer_se,
            "expected_fwer_independent": self.expected_fwer_independent,
            "mean_max_z": float(np.mean(self.max_z)),
            "selected_beta_mean": self.selected_beta_mean,
            "selected_beta_se": self.selected_beta_se,
        }
        if full:
            d["min_p"] = self.min_p.tolist()
            d["max_abs_z"] = self.max_abs_z.tolist()
            d["max_z"] = self.max_z.tolist()
            d["selected_beta"] = self.selected_beta.tolist()
        return d

    def to_json(self, full: bool = False) -> str:
        return json.dumps(self.to_dict(full), indent=2, sort_keys=True) + "\n"

    def min_p_csv(self) -> str:
        return "p\n" + "".join(f"{p:.10g}\n" for p in self.min_p)


def _sample_subsets(n_cov: int, cap: int, rng: np.random.Generator) -> list[int]:
    """Covariate subsets as bitmasks: all of them, or ``cap`` distinct ones including the empty set.

    Draws are sequential, so a larger cap extends the subsets of a smaller one.
    """
    total = 1 << n_cov
    if total <= cap:
        return list(range(total))
    chosen = [0]
    seen = {0}
    while len(chosen) < cap:
        s = int(rng.integers(1, total))
        if s not in seen:
            seen.add(s)
            chosen.append(s)
    return chosen


def _normal_scores(t: np.ndarray, df: int) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided p and standard-normal score of t statistics with ``df`` degrees of freedom."""
    lower = special.stdtr(df, -np.abs(t))
    z = np.sign(t) * -special.ndtri(lower)
    return 2.0 * lower, z


def draw_study_data(config: SimConfig, replication_index: int):
    """Null data for one replication: outcomes (n, O), predictors (n, P), covariates (n, c), subsets."""
    ss = np.random.SeedSequence(config.seed, spawn_key=(replication_index,))
    g_out, g_pred, g_cov, g_sub = (np.random.default_rng(s) for s in ss.spawn(4))
    n = config.n_subjects
    # drawn as (variables, n) so adding variables leaves earlier columns unchanged
    y = g_out.standard_normal((config.n_outcomes, n)).T
    n_pred_drawn = 1 if config.duplicate_predictors else config.n_predictors
    x = g_pred.standard_normal((n_pred_drawn, n)).T
    if config.duplicate_predictors:
        x = np.repeat(x, config.n_predictors, axis=1)
    cov = g_cov.standard_normal((config.n_covariates, n)).T
    subsets = _sample_subsets(config.n_covariates, config.model_cap, g_sub)
    return y, x, cov, subsets


def fit_tests(y, x, cov, subsets):
    """Yield (subset columns, beta, t, df) for every outcome x predictor pair under each subset.

    ``beta`` and ``t`` have shape (predictors, outcomes).
    """
    n = y.shape[0]
    yc = y - y.mean(axis=0)
    xc = x - x.mean(axis=0)
    covc = cov - cov.mean(axis=0)
    for mask in subsets:
        cols = [j for j in range(cov.shape[1]) if mask >> j & 1]
        if cols:
            # centering already removed the intercept
            q, _ = np.linalg.qr(covc[:, cols])
            yr = yc - q @ (q.T @ yc)
            xr = xc - q @ (q.T @ xc)
        else:
            yr, xr = yc, xc
        df = n - 2 - len(cols)
        xx = (xr * xr).sum(axis=0)[:, None]
        yy = (yr * yr).sum(axis=0)[None, :]
        xy = xr.T @ yr
        beta = xy / xx
        rss = np.maximum(yy - beta * xy, 0.0)
        yield cols, beta, beta / np.sqrt(rss / df / xx), df


def simulate_study(config: SimConfig, replication_index: int) -> StudyDraw:
    y, x, cov, subsets = draw_study_data(config, replication_index)
    min_p, max_abs_z, max_z, sel_beta = 1.0, 0.0, -np.inf, 0.0
    for _, beta, t, df in fit_tests(y, x, cov, subsets):
        p, z = _normal_scores(t, df)
        min_p = min(min_p, float(p.min()))
        max_abs_z = max(max_abs_z, float(np.abs(z).max()))
        k = int(np.argmax(z))
        if z.flat[k] > max_z:
            max_z = float(z.flat[k])
            sel_beta = float(beta.flat[k])
    return StudyDraw(min_p, max_abs_z, max_z, sel_beta)


def _run_range(config: SimConfig, start: int, stop: int) -> np.ndarray:
    return np.array([simulate_study(config, i) for i in range(start, stop)], dtype=float).reshape(-1, 4)


def run(config: SimConfig, workers: int = 1) -> SimResult:
    """Run all replications; replication ``i`` always uses substream ``i`` of the seed."""
    r = config.replications
    if workers <= 1 or r < 2 * workers:
        draws = _run_range(config, 0, r)
    else:
        bounds = np.linspace(0, r, workers + 1).astype(int)
        with ProcessPoolExecutor(workers) as pool:
            parts = pool.map(_run_range, [config] * workers, bounds[:-1], bounds[1:])
            draws = np.concatenate(list(parts))
    return SimResult(config, draws[:, 0], draws[:, 1], draws[:, 2], draws[:, 3])


_MAX_CHUNK = 10_000


def empirical_expected_max(k: int, replications: int = 200_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo mean of the max of ``k`` iid standard normals, with its standard error."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if replications < 1000:
        raise ValueError("replications must be >= 1000")
    maxima = []
    for j, start in enumerate(range(0, replications, _MAX_CHUNK)):
        size = min(_MAX_CHUNK, replications - start)
        maxima.append(substream(seed, j).standard_normal((size, k)).max(axis=1))
    m = np.concatenate(maxima)
    return float(m.mean()), float(m.std(ddof=1) / math.sqrt(replications))


def westfall_young_level(n_subjects: int = 100, n_hypotheses: int = 20, b: int = 500,
                         replications: int = 2000, alpha: float = 0.05, seed: int = 0
                         ) -> tuple[float, float]:
    """Share of global-null datasets in which any minP-adjusted p is <= ``alpha``.

    Returns (rejection rate, Monte Carlo standard error).
    """
    rejected = 0
    for i in range(replications):
        g = substream(seed, i)
        x = g.standard_normal((n_subjects, n_hypotheses))
        y = g.standard_normal(n_subjects)
        adj = westfall_young_minp(x, y, b=b, seed=int(g.integers(2**63)))
        rejected += bool(adj.min() <= alpha)
    rate = rejected / replications
    return rate, math.sqrt(max(rate * (1 - rate), alpha * (1 - alpha)) / replications)
