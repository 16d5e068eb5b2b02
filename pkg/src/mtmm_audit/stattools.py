"""Normal-distribution primitives, expected sample maxima and multiplicity adjustments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from scipy import integrate, special

from .defs import EffectEstimate

_STD = NormalDist()

# Default n-list of the expected-maximum table.
DEFAULT_NS = (10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 125, 150, 175, 200, 225, 250,
             300, 350, 400, 1000, 5000)


def std_normal_cdf(z: float) -> float:
    if not math.isfinite(z):
        raise ValueError(f"z must be finite, got {z!r}")
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def std_normal_sf(z: float) -> float:
    """Upper tail 1 - Phi(z), without cancellation for large z."""
    if not math.isfinite(z):
        raise ValueError(f"z must be finite, got {z!r}")
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def std_normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly between 0 and 1, got {p!r}")
    return _STD.inv_cdf(p)


# --- expected maximum of n standard normals ----------------------------------

_LOG_TINY = math.log(1e-18)
_GRID = np.linspace(-40.0, 40.0, 16001)


def _log_integrand(x, n):
    # log of n * |x| * phi(x) * Phi(x)**(n-1)
    with np.errstate(divide="ignore"):
        return (math.log(n) + np.log(np.abs(x)) - 0.5 * x * x - 0.5 * math.log(2 * math.pi)
                + (n - 1) * special.log_ndtr(x))


def _support(n: int) -> tuple[float, float]:
    lf = _log_integrand(_GRID, n)
    keep = np.nonzero(lf > _LOG_TINY)[0]
    step = _GRID[1] - _GRID[0]
    return float(_GRID[keep[0]] - step), float(_GRID[keep[-1]] + step)


def expected_max_exact(n: int) -> float:
    """E[max of n iid N(0, 1)] by adaptive quadrature of n*x*phi(x)*Phi(x)**(n-1).

    The domain is cut where the integrand drops below 1e-18; Phi**(n-1) is
    evaluated in log space so large n does not underflow.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if n == 1:
        return 0.0
    lo, hi = _support(n)

    def f(x):
        return math.copysign(math.exp(_log_integrand(x, n)), x) if x != 0 else 0.0

    # Split at zero (sign change) and near the mode of the maximum.
    mode = std_normal_quantile(1.0 - 1.0 / (n + 1))
    cuts = sorted({lo, min(max(0.0, lo), hi), min(max(mode, lo), hi), hi})
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        if b > a:
            val, _ = integrate.quad(f, a, b, epsabs=1e-11, epsrel=1e-11, limit=200)
            total += val
    return total


def expected_max_blom(n: int, alpha: float = 0.375) -> float:
    """Blom's approximation Phi^-1((n - alpha) / (n - 2 alpha + 1))."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha!r}")
    return std_normal_quantile((n - alpha) / (n - 2 * alpha + 1))


@dataclass(frozen=True)
class OrderStatRow:
    n: int
    expected_max: float
    p_two_sided: float


def order_stat_table(ns=DEFAULT_NS) -> list[OrderStatRow]:
    ns = list(ns)
    if not ns:
        raise ValueError("need at least one n")
    rows = []
    for n in ns:
        e = expected_max_exact(n)
        rows.append(OrderStatRow(int(n), e, 2.0 * std_normal_sf(e)))
    return rows


def order_stat_csv(rows: list[OrderStatRow]) -> str:
    lines = ["n,expected_max,p_two_sided"]
    lines += [f"{r.n},{r.expected_max:.6f},{r.p_two_sided:.5f}" for r in rows]
    return "\n".join(lines) + "\n"


# --- effect sizes and z-tests ------------------------------------------------

def rr_to_log_scale(e: EffectEstimate) -> tuple[float, float]:
    """Log ratio and its standard error recovered from the confidence limits."""
    if e.rr <= 0 or e.cl_low <= 0 or e.cl_high <= 0:
        raise ValueError("ratio and limits must be positive")
    q = std_normal_quantile((1.0 + e.level) / 2.0)
    beta = math.log(e.rr)
    se = (math.log(e.cl_high) - math.log(e.cl_low)) / (2.0 * q)
    return beta, se


@dataclass(frozen=True)
class ZTestResult:
    beta: float
    beta_se: float
    z: float
    p_one_sided: float
    adj_factor: int
    adj_p: float


def bonferroni_factor(ffq_items: int, covariates: int) -> int:
    """Number of food x covariate-subset analyses: ffq_items * 2**covariates."""
    if ffq_items < 1:
        raise ValueError("ffq_items must be >= 1")
    if covariates < 0:
        raise ValueError("covariates must be >= 0")
    factor = ffq_items << covariates
    if factor > 2**128 - 1:
        raise OverflowError(f"adjustment factor {ffq_items}*2^{covariates} exceeds 128 bits")
    return factor


def adjust_bonferroni(p: float, m: int) -> float:
    if m < 1:
        raise ValueError("m must be >= 1")
    return min(1.0, p * m)


def adjust_sidak(p: float, m: int) -> float:
    if m < 1:
        raise ValueError("m must be >= 1")
    if p >= 1.0:
        return 1.0
    return -math.expm1(m * math.log1p(-p))


def z_test(e: EffectEstimate, adj_factor: int = 1) -> ZTestResult:
    """Upper-tail z-test of log(rr) = 0 with a Bonferroni factor applied."""
    if adj_factor < 1:
        raise ValueError("adj_factor must be >= 1")
    beta, se = rr_to_log_scale(e)
    z = beta / se
    p = std_normal_sf(z)
    return ZTestResult(beta, se, z, p, int(adj_factor), adjust_bonferroni(p, adj_factor))


# --- Westfall-Young single-step minP -----------------------------------------

def _standardize_columns(x: np.ndarray) -> np.ndarray:
    xc = x - x.mean(axis=0)
    norms = np.sqrt((xc * xc).sum(axis=0))
    if np.any(norms == 0):
        bad = np.nonzero(norms == 0)[0].tolist()
        raise ValueError(f"constant column(s) {bad}: correlation undefined")
    return xc / norms


def correlation_pvalues(r: np.ndarray, n: int) -> np.ndarray:
    """Two-sided p for zero correlation, Fisher z with the normal approximation."""
    r = np.clip(r, -1.0, 1.0)
    with np.errstate(divide="ignore"):
        z = np.arctanh(r) * math.sqrt(n - 3)
    return 2.0 * special.ndtr(-np.abs(z))


PERM_BLOCK = 256


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for counter ``key`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def seeded_permutations(n: int, b: int, seed: int) -> np.ndarray:
    """``b`` permutations of range(n); block ``j`` of PERM_BLOCK rows uses substream j."""
    blocks = []
    for j, start in enumerate(range(0, b, PERM_BLOCK)):
        size = min(PERM_BLOCK, b - start)
        base = np.tile(np.arange(n), (PERM_BLOCK, 1))
        blocks.append(substream(seed, j).permuted(base, axis=1)[:size])
    return np.concatenate(blocks)


def minp_null_distribution(raw, outcome, b: int, seed: int) -> np.ndarray:
    """Minimum p over hypotheses for each of ``b`` seeded permutations of ``outcome``.

    Permutations come in fixed blocks, each from its own substream of ``seed``,
    so any evaluation order gives bit-identical output.
    """
    x = np.asarray(raw, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(outcome, dtype=float)
    n = x.shape[0]
    if y.shape != (n,):
        raise ValueError(f"outcome must have length {n}")
    if n < 3:
        raise ValueError("need at least 3 subjects")
    if int(b) != b or b < 100:
        raise ValueError(f"b must be an integer >= 100, got {b!r}")
    xs = _standardize_columns(x)
    ys = _standardize_columns(y[:, None])[:, 0]

    perms = seeded_permutations(n, int(b), seed)
    r = ys[perms] @ xs
    max_abs_r = np.abs(r).max(axis=1)
    return correlation_pvalues(max_abs_r, n)


def westfall_young_minp(raw, outcome, b: int = 1000, seed: int = 0) -> np.ndarray:
    """Single-step minP adjusted p-values (add-one estimator) for each column of ``raw``.

    Each column is tested for zero correlation with ``outcome``; the adjusted
    p of a column is the share of permutations whose smallest p is at most the
    column's raw p, counted as (1 + hits) / (b + 1).
    """
    x = np.asarray(raw, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    minp = np.sort(minp_null_distribution(x, outcome, b, seed))
    raw_p = raw_correlation_pvalues(x, outcome)
    hits = np.searchsorted(minp, raw_p, side="right")
    adjusted = (1.0 + hits) / (b + 1.0)
    order = np.argsort(raw_p, kind="stable")
    adjusted[order] = np.maximum.accumulate(adjusted[order])
    return np.minimum(adjusted, 1.0)


def raw_correlation_pvalues(raw, outcome) -> np.ndarray:
    x = np.asarray(raw, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    xs = _standardize_columns(x)
    ys = _standardize_columns(np.asarray(outcome, dtype=float)[:, None])[:, 0]
    return correlation_pvalues(ys @ xs, x.shape[0])
