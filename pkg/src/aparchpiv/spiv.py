"""
Standardized Pearson type IV (SPIV) distribution.

With x = σ̂ z + μ̂ the density is

    p(z) = C exp(-ν atan x) / (1 + x²)^((m+1)/2),
    μ̂ = -ν / (m - 1),   σ̂ = sqrt((1 + ν²/(m-1)²) / (m - 2)),

which has zero mean and unit variance for every m > 2. The log of the
normalising constant is

    ln C = ln σ̂ + lnΓ((m+1)/2) - lnΓ(m/2) - ½ ln π + ln|Γ((m+1)/2 + iν/2) / Γ((m+1)/2)|².

The distribution function is evaluated from closed forms in ₂F₁ over three
regions of X = σ̂ z + μ̂ (left tail, centre, right tail), see ``spiv_cdf``.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln

from ._errors import DomainError, MomentDivergenceError
from .special import adaptive_quad, hyp2f1, hyp2f1_series, log_gamma_ratio_sq

logger = logging.getLogger(__name__)

_SQRT3 = math.sqrt(3.0)
_LOG_PI = math.log(math.pi)
# Past |X| = sqrt(0.9⁻²·4 - 1) the central-region series argument exceeds 0.9.
_CENTRAL_SERIES_LIMIT = math.sqrt(4.0 / 0.81 - 1.0)
# Largest tolerated error of the central-region closed form, estimated from
# the cancellation inside it; beyond this the Euler-integral route is used.
_CENTRAL_ERROR_BUDGET = 1e-12


@dataclass(frozen=True)
class SpivParams:
    """Shape parameters (m, ν) of the SPIV distribution and derived constants.

    Parameters
    ----------
    m : float
        Tail parameter, m > 2.
    nu : float
        Skewness parameter.
    """

    m: float
    nu: float
    mu_hat: float = field(init=False)
    sigma_hat: float = field(init=False)
    log_norm: float = field(init=False, repr=False)

    def __post_init__(self):
        m = float(self.m)
        nu = float(self.nu)
        if not (math.isfinite(m) and math.isfinite(nu)):
            raise DomainError(f"SPIV parameters must be finite, got m={m!r}, nu={nu!r}")
        if m <= 0.5:
            raise DomainError(
                f"m={m} <= 1/2: the Pearson IV density is not normalizable"
            )
        if m <= 2.0:
            raise DomainError(
                f"m={m} <= 2: the variance is infinite so the distribution cannot be "
                "standardized (need m > 2)"
            )
        mu_hat = -nu / (m - 1.0)
        sigma_hat = math.sqrt((1.0 + nu * nu / (m - 1.0) ** 2) / (m - 2.0))
        half = 0.5 * (m + 1.0)
        log_norm = (math.log(sigma_hat) + gammaln(half) - gammaln(0.5 * m)
                    - 0.5 * _LOG_PI + log_gamma_ratio_sq(half, 0.5 * nu))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "mu_hat", mu_hat)
        object.__setattr__(self, "sigma_hat", sigma_hat)
        object.__setattr__(self, "log_norm", float(log_norm))

    def mirrored(self) -> "SpivParams":
        """Parameters of -Z, i.e. (m, -ν)."""
        return SpivParams(self.m, -self.nu)


def spiv_new(m: float, nu: float) -> SpivParams:
    return SpivParams(m, nu)


def _log1p_sq(x):
    ax = np.abs(x)
    with np.errstate(divide="ignore"):
        big = 2.0 * np.log(np.where(ax > 1e100, ax, 1.0)) + np.log1p(
            (1.0 / np.where(ax > 1e100, ax, 1.0)) ** 2)
    return np.where(ax > 1e100, big, np.log1p(np.where(ax > 1e100, 0.0, x) ** 2))


def spiv_logpdf(p: SpivParams, z):
    """Log density; accepts scalars or arrays."""
    x = p.sigma_hat * np.asarray(z, dtype=float) + p.mu_hat
    out = p.log_norm - p.nu * np.arctan(x) - 0.5 * (p.m + 1.0) * _log1p_sq(x)
    return float(out) if np.ndim(out) == 0 else out


def spiv_pdf(p: SpivParams, z):
    """Density; accepts scalars or arrays."""
    out = np.exp(spiv_logpdf(p, z))
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------------------
# Distribution function
# ----------------------------------------------------------------------
def _cdf_tail_formula(p: SpivParams, x: float, cut_side=None) -> float:
    # P = p(z) (i - X) / (σ̂ m) · ₂F₁(1, (m+1)/2 + iν/2; m+1; 2/(1 - iX)), X ≤ 0.
    m, nu = p.m, p.nu
    w = 2.0 / complex(1.0, -x)
    b = complex(0.5 * (m + 1.0), 0.5 * nu)
    if cut_side is not None:
        w = complex(2.0, 0.0)
    f = hyp2f1(1.0, b, m + 1.0, w, cut_side=cut_side)
    z = (x - p.mu_hat) / p.sigma_hat
    value = spiv_pdf(p, z) * complex(-x, 1.0) / (p.sigma_hat * m) * f
    return value.real


def _cdf_central_formula(p: SpivParams, x: float):
    """Central-region closed form; returns (value, error estimate) or None.

    P = p(z) i (1 + X²) / (σ̂ (m - iν - 1)) · ₂F₁(1, 1-m; (3-m)/2 + iν/2; (1+iX)/2)
        + 1 / (1 - exp(-π(ν + i(m+1))))

    The two terms blow up together when ν → 0 and m approaches an odd
    integer; None is returned when the cancellation is too severe.
    """
    m, nu = p.m, p.nu
    w = complex(1.0, x) / 2.0
    if abs(w) > 0.9:
        return None
    c = complex(0.5 * (3.0 - m), 0.5 * nu)
    if c.imag == 0.0 and c.real <= 0.0 and c.real == math.floor(c.real):
        return None
    denom = 1.0 - np.exp(-math.pi * complex(nu, m + 1.0))
    if abs(denom) < 1e-300:
        return None
    f, biggest = hyp2f1_series(1.0, 1.0 - m, c, w)
    z = (x - p.mu_hat) / p.sigma_hat
    pref = spiv_pdf(p, z) * 1j * (1.0 + x * x) / (p.sigma_hat * complex(m - 1.0, -nu))
    first = pref * f
    const = 1.0 / denom
    err = 8.0 * np.finfo(float).eps * (abs(pref) * biggest + abs(const))
    return (first + const).real, err


def _cdf_left(p: SpivParams, x: float) -> float:
    """P(X' ≤ x) for x ≤ 0 without reflection."""
    if x < -_SQRT3:
        return _cdf_tail_formula(p, x)
    central = _cdf_central_formula(p, x) if x > -_CENTRAL_SERIES_LIMIT else None
    if central is not None and central[1] < _CENTRAL_ERROR_BUDGET:
        return central[0]
    if x == 0.0:
        # w = 2 sits on the branch cut; X → 0⁻ approaches it from below.
        return _cdf_tail_formula(p, 0.0, cut_side=-1)
    return _cdf_tail_formula(p, x)


def spiv_cdf(p: SpivParams, z: float) -> float:
    """Distribution function P(Z ≤ z).

    Region dispatch on X = σ̂ z + μ̂:

    - X < -√3: tail closed form in ₂F₁(1, (m+1)/2 + iν/2; m+1; 2/(1-iX)),
      whose argument lies inside the unit disk;
    - X > √3: reflection P(z | m, ν) = 1 - P(-z | m, -ν);
    - |X| ≤ √3: central closed form in ₂F₁(1, 1-m; (3-m)/2 + iν/2; (1+iX)/2).
      Where that form is ill-conditioned (|X| > 1.497, or ν ≈ 0 with m near an
      odd integer) the tail form is continued through the Euler integral for
      X ≤ 0 and reflected for X > 0.
    """
    z = float(z)
    if math.isnan(z):
        raise DomainError("spiv_cdf: z is NaN")
    if z == -math.inf:
        return 0.0
    if z == math.inf:
        return 1.0
    x = p.sigma_hat * z + p.mu_hat
    if x > _SQRT3:
        value = 1.0 - _cdf_left(p.mirrored(), -x)
    elif x <= -_SQRT3:
        value = _cdf_left(p, x)
    else:
        central = None
        if abs(x) <= _CENTRAL_SERIES_LIMIT:
            central = _cdf_central_formula(p, x)
        if central is not None and central[1] < _CENTRAL_ERROR_BUDGET:
            value = central[0]
        elif x <= 0.0:
            value = _cdf_left(p, x)
        else:
            value = 1.0 - _cdf_left(p.mirrored(), -x)
    return min(1.0, max(0.0, value))


def spiv_cdf_quadrature(p: SpivParams, z: float, tol: float = 1e-12) -> float:
    """P(Z ≤ z) by adaptive quadrature of the density (reference route)."""
    z = float(z)
    mode = (-p.nu / (p.m + 1.0) - p.mu_hat) / p.sigma_hat
    f = functools.partial(spiv_pdf, p)
    if z <= mode:
        return adaptive_quad(f, -math.inf, z, tol)
    return 1.0 - adaptive_quad(f, z, math.inf, tol)


# ----------------------------------------------------------------------
# Quantile and sampling
# ----------------------------------------------------------------------
def spiv_quantile(p: SpivParams, a: float, tol: float = 1e-13) -> float:
    """Inverse distribution function.

    Safeguarded Newton iteration (derivative = density) inside a bracket that
    starts at the unit-variance Student-t(m) quantile and is expanded
    geometrically until the distribution function straddles ``a``.
    """
    a = float(a)
    if not 0.0 < a < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {a!r}")
    guess = float(stats.t.ppf(a, p.m)) * math.sqrt((p.m - 2.0) / p.m)

    step = 0.5
    lo, hi = guess - step, guess + step
    f_lo = spiv_cdf(p, lo)
    while f_lo > a:
        hi = lo
        step *= 2.0
        lo -= step
        f_lo = spiv_cdf(p, lo)
    f_hi = spiv_cdf(p, hi)
    while f_hi < a:
        lo, f_lo = hi, f_hi
        step *= 2.0
        hi += step
        f_hi = spiv_cdf(p, hi)

    z = min(max(guess, lo), hi)
    for _ in range(200):
        fz = spiv_cdf(p, z) - a
        if abs(fz) <= tol * max(a, 1.0 - a) or hi - lo <= 4e-16 * max(1.0, abs(z)):
            return z
        if fz < 0.0:
            lo = z
        else:
            hi = z
        newton = z - fz / spiv_pdf(p, z)
        z = newton if lo < newton < hi else 0.5 * (lo + hi)
    return z


class _InverseTable:
    """Cubic-Hermite inverse of the distribution function on θ = atan(X).

    In θ the density is proportional to cos^(m-1)θ · exp(-νθ), which is smooth
    and bounded, so a uniform θ grid with exact CDF values and derivatives
    gives a high-order interpolant.
    """

    def __init__(self, p: SpivParams, nodes: int = 1025):
        half_pi = 0.5 * math.pi
        theta = np.linspace(-half_pi, half_pi, nodes)
        cdf = np.empty(nodes)
        dens = np.zeros(nodes)
        cdf[0], cdf[-1] = 0.0, 1.0
        for i in range(1, nodes - 1):
            z = (math.tan(theta[i]) - p.mu_hat) / p.sigma_hat
            cdf[i] = spiv_cdf(p, z)
            dens[i] = spiv_pdf(p, z) / (p.sigma_hat * math.cos(theta[i]) ** 2)
        self.p = p
        self.theta = theta
        self.cdf = np.maximum.accumulate(cdf)
        self.dens = dens
        self.h = theta[1] - theta[0]

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        i = np.clip(np.searchsorted(self.cdf, u, side="right") - 1, 0, len(self.cdf) - 2)
        h = self.h
        f0, f1 = self.cdf[i], self.cdf[i + 1]
        d0, d1 = self.dens[i] * h, self.dens[i + 1] * h

        def hermite(s):
            s2, s3 = s * s, s * s * s
            return ((2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * d0
                    + (-2 * s3 + 3 * s2) * f1 + (s3 - s2) * d1)

        def hermite_slope(s):
            s2 = s * s
            return ((6 * s2 - 6 * s) * f0 + (3 * s2 - 4 * s + 1) * d0
                    + (-6 * s2 + 6 * s) * f1 + (3 * s2 - 2 * s) * d1)

        width = f1 - f0
        s = np.where(width > 0, (u - f0) / np.where(width > 0, width, 1.0), 0.5)
        s = np.clip(s, 0.0, 1.0)
        lo = np.zeros_like(s)
        hi = np.ones_like(s)
        for _ in range(60):
            r = hermite(s) - u
            lo = np.where(r < 0, s, lo)
            hi = np.where(r < 0, hi, s)
            slope = hermite_slope(s)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(slope > 0, s - r / slope, -1.0)
            bad = ~((step > lo) & (step < hi))
            s_new = np.where(bad, 0.5 * (lo + hi), step)
            if np.all(np.abs(s_new - s) < 1e-15):
                s = s_new
                break
            s = s_new
        theta = self.theta[i] + s * h
        return (np.tan(theta) - self.p.mu_hat) / self.p.sigma_hat


@functools.lru_cache(maxsize=16)
def _inverse_table(p: SpivParams) -> _InverseTable:
    logger.debug("building SPIV inverse table for m=%g nu=%g", p.m, p.nu)
    return _InverseTable(p)


def spiv_sample(p: SpivParams, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws by inverse transform of seeded uniforms."""
    n = int(n)
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    # random() can return exactly 0; keep draws finite.
    u = np.clip(u, 1e-300, 1.0 - 1e-16)
    return _inverse_table(p)(u)


# ----------------------------------------------------------------------
# Moments
# ----------------------------------------------------------------------
@functools.lru_cache(maxsize=4096)
def _power_expectation(m: float, nu: float, gamma: float, delta: float) -> float:
    p = SpivParams(m, nu)

    def left(z):
        return (-z * (1.0 + gamma)) ** delta * spiv_pdf(p, z)

    def right(z):
        return (z * (1.0 - gamma)) ** delta * spiv_pdf(p, z)

    return (adaptive_quad(left, -math.inf, 0.0, 1e-11)
            + adaptive_quad(right, 0.0, math.inf, 1e-11))


def spiv_power_expectation(p: SpivParams, gamma: float, delta: float) -> float:
    """E[(|Z| - γZ)^δ] by quadrature on each side of zero.

    Raises
    ------
    MomentDivergenceError
        If δ ≥ m: the density tail decays like |z|^-(m+1), so only moments of
        order below m exist.
    """
    gamma = float(gamma)
    delta = float(delta)
    if not -1.0 < gamma < 1.0:
        raise DomainError(f"need |gamma| < 1, got {gamma}")
    if not delta > 0.0:
        raise DomainError(f"need delta > 0, got {delta}")
    if delta >= p.m:
        raise MomentDivergenceError(
            f"E(|z| - gamma z)^delta diverges: delta={delta} but moments exist only "
            f"for delta < m={p.m}"
        )
    return _power_expectation(p.m, p.nu, gamma, delta)
