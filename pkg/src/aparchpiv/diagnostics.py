"""Stylized facts, autocorrelations and volatility loss functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._errors import DomainError


@dataclass
class SummaryStats:
    n: int
    min: float
    max: float
    range: float
    mean: float
    std_dev: float
    skewness: float
    kurtosis: float
    jarque_bera: float
    jarque_bera_p: float
    ljung_box_returns: float
    ljung_box_returns_p: float
    ljung_box_squared: float
    ljung_box_squared_p: float
    arch_lm: float
    arch_lm_p: float
    lags: int


@dataclass
class LossReport:
    mse: float
    mad: float
    medae: float
    medape: float
    hmse: float
    hmae: float
    ll: float
    gmle: float
    excluded: int = 0


def _check_variance(x: np.ndarray) -> None:
    if x.size < 2 or float(np.var(x)) == 0.0:
        raise DomainError("series has zero variance")


def autocorrelation(x, lags: int) -> np.ndarray:
    """Sample autocorrelations ρ_1..ρ_lags (denominator n, mean removed)."""
    x = np.asarray(x, dtype=float)
    _check_variance(x)
    d = x - x.mean()
    denom = np.dot(d, d)
    return np.array([np.dot(d[k:], d[:-k]) / denom for k in range(1, lags + 1)])


def acf_pacf(x, lags: int):
    """Sample ACF and PACF for lags 1..``lags``; PACF by Durbin-Levinson."""
    x = np.asarray(x, dtype=float)
    if x.size <= lags:
        raise DomainError(f"need more than {lags} observations, got {x.size}")
    rho = autocorrelation(x, lags)
    pacf = np.empty(lags)
    phi = np.zeros(0)
    for k in range(1, lags + 1):
        if k == 1:
            phi_kk = rho[0]
            phi = np.array([phi_kk])
        else:
            num = rho[k - 1] - np.dot(phi, rho[k - 2::-1])
            den = 1.0 - np.dot(phi, rho[:k - 1])
            phi_kk = num / den
            phi = np.concatenate([phi - phi_kk * phi[::-1], [phi_kk]])
        pacf[k - 1] = phi_kk
    return rho, pacf


def ljung_box(x, lags: int):
    """Ljung-Box Q(lags) and its χ²(lags) p-value."""
    x = np.asarray(x, dtype=float)
    n = x.size
    rho = autocorrelation(x, lags)
    q = n * (n + 2) * np.sum(rho ** 2 / (n - np.arange(1, lags + 1)))
    return float(q), float(stats.chi2.sf(q, lags))


def arch_lm(x, lags: int):
    """Engle's LM test: n·R² from regressing e_t² on a constant and ``lags`` own lags."""
    x = np.asarray(x, dtype=float)
    e2 = (x - x.mean()) ** 2
    y = e2[lags:]
    cols = [np.ones_like(y)] + [e2[lags - k:-k] for k in range(1, lags + 1)]
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    tss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / tss
    stat = y.size * r2
    return float(stat), float(stats.chi2.sf(stat, lags))


def summary_stats(returns, lags: int = 12) -> SummaryStats:
    r = np.asarray(returns, dtype=float)
    n = r.size
    if n <= lags + 1:
        raise DomainError(f"need more than {lags + 1} observations, got {n}")
    _check_variance(r)
    d = r - r.mean()
    m2 = np.mean(d ** 2)
    skew = float(np.mean(d ** 3) / m2 ** 1.5)
    kurt = float(np.mean(d ** 4) / m2 ** 2)
    jb = n / 6.0 * (skew ** 2 + (kurt - 3.0) ** 2 / 4.0)
    lb, lb_p = ljung_box(r, lags)
    lb2, lb2_p = ljung_box(r ** 2, lags)
    lm, lm_p = arch_lm(r, lags)
    return SummaryStats(
        n=n, min=float(r.min()), max=float(r.max()), range=float(r.max() - r.min()),
        mean=float(r.mean()), std_dev=float(r.std(ddof=1)), skewness=skew, kurtosis=kurt,
        jarque_bera=float(jb), jarque_bera_p=float(stats.chi2.sf(jb, 2)),
        ljung_box_returns=lb, ljung_box_returns_p=lb_p,
        ljung_box_squared=lb2, ljung_box_squared_p=lb2_p,
        arch_lm=lm, arch_lm_p=lm_p, lags=lags,
    )


def loss_functions(eps_sq, h) -> LossReport:
    """Eight volatility loss functions with ε_t² as the variance proxy.

    MAD uses |ε_t| = sqrt(ε_t²). MedAPE and LL skip observations with
    ε_t² = 0; the number skipped is reported in ``excluded``. LL is the mean
    squared log ratio.
    """
    e2 = np.asarray(eps_sq, dtype=float)
    h = np.asarray(h, dtype=float)
    if e2.shape != h.shape or e2.ndim != 1:
        raise DomainError("eps_sq and h must be 1-d sequences of equal length")
    if not np.all(h > 0):
        raise DomainError("all h_t must be positive")
    if np.any(e2 < 0):
        raise DomainError("eps_sq must be nonnegative")
    keep = e2 > 0
    if not keep.any():
        raise DomainError("all squared residuals are zero")
    ratio = e2 / h
    gap = np.abs(h - e2)
    return LossReport(
        mse=float(np.mean((e2 - h) ** 2)),
        mad=float(np.mean(np.abs(np.sqrt(e2) - np.sqrt(h)))),
        medae=float(np.median(gap)),
        medape=float(np.median(gap[keep] / e2[keep])),
        hmse=float(np.mean((ratio - 1.0) ** 2)),
        hmae=float(np.mean(np.abs(ratio - 1.0))),
        ll=float(np.mean(np.log(ratio[keep]) ** 2)),
        gmle=float(np.mean(np.log(h) + ratio)),
        excluded=int(np.count_nonzero(~keep)),
    )
