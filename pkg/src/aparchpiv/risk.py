"""
Value-at-Risk series and backtests.

Long positions use a lower-tail level a (e.g. 0.05) and break when
r_t < VaR_t; short positions use an upper-tail level c (e.g. 0.95) and break
when r_t > VaR_t. In both cases the nominal break probability is
``tail_probability(level, side)``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import stats

from ._errors import DomainError
from .spiv import SpivParams, spiv_quantile

logger = logging.getLogger(__name__)

LONG = "long"
SHORT = "short"

SHORT_LEVELS = (0.95, 0.975, 0.99, 0.995, 0.9975, 0.999)
LONG_LEVELS = (0.05, 0.025, 0.01, 0.005, 0.0025, 0.001)
DEFAULT_LEVELS = SHORT_LEVELS + LONG_LEVELS


class TestResult(NamedTuple):
    stat: float
    p_value: float
    flag: str | None = None


@dataclass
class VarSeries:
    level: float
    side: str
    values: np.ndarray
    quantile: float = math.nan


@dataclass
class HitSequence:
    hits: np.ndarray
    n: int
    x: int


@dataclass
class BacktestRow:
    level: float
    side: str
    ratio: float
    violations: int
    n: int
    kupiec_stat: float
    kupiec_p: float
    independence_stat: float
    independence_p: float
    conditional_stat: float
    conditional_p: float
    dq_stat: float
    dq_p: float
    lopez: float
    sarma_regulatory: float
    sarma_firm: float
    flags: list = field(default_factory=list)


@dataclass
class TailRow:
    level: float
    side: str
    var: float
    tce1: float
    tce2: float
    es: float
    lam: float
    var_ref: float
    var_mean: float
    var_empirical: float
    defined: bool = True


def side_for(level: float) -> str:
    return LONG if level < 0.5 else SHORT


def tail_probability(level: float, side: str) -> float:
    return level if side == LONG else 1.0 - level


def _check_side(side: str) -> None:
    if side not in (LONG, SHORT):
        raise DomainError(f"side must be 'long' or 'short', got {side!r}")


def var_series(mu: float, sigma, p: SpivParams, a: float, side: str | None = None) -> VarSeries:
    """VaR_t = μ + P⁻¹(a) σ_t."""
    a = float(a)
    if not 0.0 < a < 1.0:
        raise DomainError(f"VaR level must lie in (0, 1), got {a}")
    side = side or side_for(a)
    _check_side(side)
    sigma = np.asarray(sigma, dtype=float)
    if not np.all(sigma > 0):
        raise DomainError("sigma must be positive")
    q = spiv_quantile(p, a)
    return VarSeries(level=a, side=side, values=mu + q * sigma, quantile=q)


def hit_sequence(returns, var: VarSeries) -> HitSequence:
    r = np.asarray(returns, dtype=float)
    if r.shape != var.values.shape:
        raise DomainError("returns and VaR series differ in length")
    hits = (r < var.values) if var.side == LONG else (r > var.values)
    hits = hits.astype(np.int64)
    return HitSequence(hits=hits, n=int(hits.size), x=int(hits.sum()))


def _bernoulli_kl(k: int, n: int, num: int, den: int) -> float:
    """n·KL(k/n ‖ num/den) for integer counts, with 0·log 0 = 0."""
    out = 0.0
    if k > 0:
        out += k * math.log((k * den) / (n * num))
    if n - k > 0:
        out += (n - k) * math.log(((n - k) * den) / (n * (den - num)))
    return out


def kupiec_pof(h: HitSequence, a: float) -> TestResult:
    """Kupiec proportion-of-failures LR test against break probability ``a``."""
    n, x = h.n, h.x
    if n <= 0:
        raise DomainError("empty hit sequence")
    # 2n·KL(x/n ‖ a), written as log-ratios to avoid cancellation near x/n = a.
    lr = 0.0
    if x > 0:
        lr += x * math.log(x / (n * a))
    if n - x > 0:
        lr += (n - x) * math.log((n - x) / (n * (1.0 - a)))
    lr = max(2.0 * lr, 0.0)
    return TestResult(lr, float(stats.chi2.sf(lr, 1)))


def transition_counts(hits) -> tuple[int, int, int, int]:
    hits = np.asarray(hits)
    prev, cur = hits[:-1], hits[1:]
    n00 = int(np.sum((prev == 0) & (cur == 0)))
    n01 = int(np.sum((prev == 0) & (cur == 1)))
    n10 = int(np.sum((prev == 1) & (cur == 0)))
    n11 = int(np.sum((prev == 1) & (cur == 1)))
    return n00, n01, n10, n11


def christoffersen_independence(h: HitSequence) -> TestResult:
    """First-order Markov independence LR test (χ²(1))."""
    if h.n < 2:
        raise DomainError("need at least two observations")
    if h.x == 0:
        return TestResult(0.0, 1.0, "no violations: independence statistic undefined")
    n00, n01, n10, n11 = transition_counts(h.hits)
    # LR = 2 Σ_rows n_i·KL(π_i1 ‖ π); each row compares k/n with the pooled
    # rate through integer cross-products, so equal rates give exactly zero.
    m, t = n01 + n11, n00 + n01 + n10 + n11
    lr = 2.0 * (_bernoulli_kl(n01, n00 + n01, m, t) + _bernoulli_kl(n11, n10 + n11, m, t))
    lr = max(lr, 0.0)
    flag = "no consecutive violations (n11 = 0)" if n11 == 0 else None
    return TestResult(lr, float(stats.chi2.sf(lr, 1)), flag)


def conditional_coverage(h: HitSequence, a: float) -> TestResult:
    """Christoffersen conditional coverage: Kupiec LR + independence LR (χ²(2))."""
    uc = kupiec_pof(h, a)
    ind = christoffersen_independence(h)
    lr = uc.stat + ind.stat
    return TestResult(lr, float(stats.chi2.sf(lr, 2)), ind.flag)


def dq_design(hits, var_values, a: float, lags: int):
    """Response and regressors of the dynamic quantile regression.

    Response Hit_t - a; regressors: constant, Hit_{t-1..t-K} - a and
    VaR_{t-1..t-K}.
    """
    hits = np.asarray(hits, dtype=float)
    v = np.asarray(var_values, dtype=float)
    n = hits.size
    dm = hits - a
    y = dm[lags:]
    cols = [np.ones(n - lags)]
    cols += [dm[lags - k:n - k] for k in range(1, lags + 1)]
    cols += [v[lags - k:n - k] for k in range(1, lags + 1)]
    return y, np.column_stack(cols)


def dq_test(h: HitSequence, var: VarSeries, a: float, lags: int = 5) -> TestResult:
    """Engle-Manganelli dynamic quantile Wald test.

    DQ = Hit' X (X'X)⁻¹ X' Hit / (a(1-a)) ~ χ²(2K+1) under correct
    conditional coverage. If the regressors are collinear (e.g. a constant
    VaR) the statistic uses the column space of X and the degrees of freedom
    drop to its rank.
    """
    if lags < 1:
        raise DomainError("DQ test needs at least one lag")
    if h.n <= 2 * lags + 1 + 10:
        raise DomainError(f"DQ test with K={lags} needs more than {2 * lags + 11} observations")
    if h.x == 0:
        warnings.warn("DQ test: no violations, statistic not informative", RuntimeWarning,
                      stacklevel=2)
        return TestResult(math.nan, 1.0, "no violations: DQ statistic undefined")
    y, design = dq_design(h.hits, var.values, a, lags)
    # Rescale columns so that rank detection does not depend on VaR units.
    scale = np.sqrt(np.mean(design ** 2, axis=0))
    scale[scale == 0] = 1.0
    coef, _, rank, _ = np.linalg.lstsq(design / scale, y, rcond=1e-10)
    fitted = (design / scale) @ coef
    stat = float(np.dot(fitted, fitted) / (a * (1.0 - a)))
    df = int(rank)
    flag = None
    if df < design.shape[1]:
        flag = f"collinear DQ regressors: rank {df} of {design.shape[1]}"
    return TestResult(stat, float(stats.chi2.sf(stat, df)), flag)


def _break_losses(returns, var: VarSeries):
    """Lopez total and the regulatory total derived from it.

    The regulatory loss is taken as Lopez minus the (integer) break count.
    Below 2⁵³ that subtraction is exact, so Lopez minus regulatory recovers
    the count exactly in floating point.
    """
    r = np.asarray(returns, dtype=float)
    hits = hit_sequence(r, var).hits.astype(bool)
    gap = r[hits] - var.values[hits]
    count = float(np.count_nonzero(hits))
    lopez = count + math.fsum(gap ** 2)
    return hits, lopez, lopez - count


def lopez_loss(returns, var: VarSeries) -> float:
    """Σ over breaks of 1 + (r_t - VaR_t)²."""
    return _break_losses(returns, var)[1]


def sarma_losses(returns, var: VarSeries, opportunity_cost: float = 0.0):
    """Sarma regulatory and firm loss totals.

    Regulatory: Σ (r_t - VaR_t)² over breaks. Firm: the same on break days
    plus the capital cost opportunity_cost·|VaR_t| on the other days
    (−a·VaR_t for long positions, whose VaR is negative).
    """
    if opportunity_cost < 0:
        raise DomainError("opportunity cost must be nonnegative")
    hits, _, regulatory = _break_losses(returns, var)
    sign = -1.0 if var.side == LONG else 1.0
    firm = regulatory + float(np.sum(sign * opportunity_cost * var.values[~hits]))
    return regulatory, firm


def tail_measures(returns, var: VarSeries, a: float | None = None,
                  var_ref: str = "mean", tce2: str = "ratio") -> TailRow:
    """Tail conditional expectations and expected shortfall.

    TCE1 is the mean return over breaks and TCE2 the mean of r_t / VaR_t over
    breaks. λ is the observed break frequency divided by the nominal
    probability; the expected-shortfall correction
    ES = TCE1 + (λ - 1)(TCE1 - VaR_ref) is applied when λ > 1, otherwise
    ES = TCE1. VaR_ref is the mean VaR over breaks (``var_ref="mean"``) or the
    standardized quantile P⁻¹(level) (``var_ref="quantile"``).
    ``tce2="ratio"`` averages r_t / VaR_t over breaks; ``tce2="scaled"``
    divides TCE1 by the mean VaR over breaks instead.
    """
    r = np.asarray(returns, dtype=float)
    if a is None:
        a = var.level
    prob = tail_probability(a, var.side)
    h = hit_sequence(r, var)
    hits = h.hits.astype(bool)
    var_mean = float(np.mean(var.values))
    var_emp = float(np.quantile(r, a))
    if h.x == 0:
        nan = math.nan
        return TailRow(level=a, side=var.side, var=var.quantile, tce1=nan, tce2=nan, es=nan,
                       lam=0.0, var_ref=nan, var_mean=var_mean, var_empirical=var_emp,
                       defined=False)
    tce1 = float(np.mean(r[hits]))
    if tce2 == "ratio":
        tce2_value = float(np.mean(r[hits] / var.values[hits]))
    elif tce2 == "scaled":
        tce2_value = tce1 / float(np.mean(var.values[hits]))
    else:
        raise DomainError(f"tce2 must be 'ratio' or 'scaled', got {tce2!r}")
    lam = (h.x / h.n) / prob
    if var_ref == "mean":
        ref = float(np.mean(var.values[hits]))
    elif var_ref == "quantile":
        ref = var.quantile
    else:
        raise DomainError(f"var_ref must be 'mean' or 'quantile', got {var_ref!r}")
    es = tce1 + (lam - 1.0) * (tce1 - ref) if lam > 1.0 else tce1
    return TailRow(level=a, side=var.side, var=var.quantile, tce1=tce1, tce2=tce2_value, es=es,
                   lam=lam, var_ref=ref, var_mean=var_mean, var_empirical=var_emp)


def backtest_level(returns, mu: float, sigma, p: SpivParams, level: float, *,
                   dq_lags: int = 5, opportunity_cost: float = 0.0, var_ref: str = "mean",
                   tce2: str = "ratio"):
    """Backtest statistics and tail measures for one level; returns (BacktestRow, TailRow)."""
    side = side_for(level)
    var = var_series(mu, sigma, p, level, side)
    h = hit_sequence(returns, var)
    prob = tail_probability(level, side)
    uc = kupiec_pof(h, prob)
    ind = christoffersen_independence(h)
    cc = conditional_coverage(h, prob)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        dq = dq_test(h, var, prob, dq_lags)
    lopez = lopez_loss(returns, var)
    regulatory, firm = sarma_losses(returns, var, opportunity_cost)
    flags = [f for f in (uc.flag, ind.flag, dq.flag) if f]
    if h.x <= 1:
        flags.append(f"deep-tail degeneracy: {h.x} violation(s)")
    ratio = h.x / h.n if side == LONG else 1.0 - h.x / h.n
    row = BacktestRow(level=level, side=side, ratio=ratio, violations=h.x, n=h.n,
                      kupiec_stat=uc.stat, kupiec_p=uc.p_value,
                      independence_stat=ind.stat, independence_p=ind.p_value,
                      conditional_stat=cc.stat, conditional_p=cc.p_value,
                      dq_stat=dq.stat, dq_p=dq.p_value, lopez=lopez,
                      sarma_regulatory=regulatory, sarma_firm=firm, flags=flags)
    tail = tail_measures(returns, var, level, var_ref=var_ref, tce2=tce2)
    return row, tail


def backtest(returns, mu: float, sigma, p: SpivParams, levels=DEFAULT_LEVELS, **kwargs):
    """Backtest every level; rows come back in the order of ``levels``."""
    rows, tails = [], []
    for level in levels:
        row, tail = backtest_level(returns, mu, sigma, p, level, **kwargs)
        rows.append(row)
        tails.append(tail)
    return rows, tails
