"""
Special-function building blocks for the Pearson type IV distribution.

Contents
--------
- gamma_ratio_sq / log_gamma_ratio_sq: |Γ(x+iy)/Γ(x)|²
- hyp2f1: Gauss hypergeometric function with complex parameters
- adaptive_quad: globally adaptive Gauss-Kronrod (7/15) quadrature
"""

from __future__ import annotations

import cmath
import heapq
import math
from typing import Callable

import numpy as np
from scipy.special import loggamma

from ._errors import ConvergenceError, DomainError, QuadratureError

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny

# Gauss-Kronrod 7/15 nodes and weights (positive half, centre last).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes: ±x1, ±x3, ±x5 and 0.
_GAUSS_W[[1, 3, 5]] = _WG[:3]
_GAUSS_W[[13, 11, 9]] = _WG[:3]
_GAUSS_W[7] = _WG[3]


# ----------------------------------------------------------------------
# |Γ(x+iy)/Γ(x)|²
# ----------------------------------------------------------------------
def log_gamma_ratio_sq(x: float, y: float) -> float:
    """Natural log of |Γ(x+iy)/Γ(x)|² for x > 0.

    The argument is shifted upward with the recursion
    |Γ(x+iy)/Γ(x)|² = [1 + (y/x)²]⁻¹ |Γ(x+1+iy)/Γ(x+1)|²
    until x ≥ max(10, 2y²); at that point the remaining ratio equals
    1 / ₂F₁(−iy, iy; x; 1), whose series converges like f^-(x+1) and is
    summed to machine precision.
    """
    x = float(x)
    y = float(y)
    if not x > 0.0:
        raise DomainError(f"gamma_ratio_sq needs x > 0, got x={x!r}")
    if not math.isfinite(y):
        raise DomainError(f"gamma_ratio_sq needs finite y, got y={y!r}")
    y2 = y * y
    if y2 == 0.0:
        return 0.0
    x_min = max(10.0, 2.0 * y2)
    log_shift = 0.0
    while x < x_min:
        t = y / x
        log_shift += math.log1p(t * t)
        x += 1.0
    s = 1.0
    term = 1.0
    f = 0.0
    while term > s * _EPS:
        term *= (y2 + f * f) / ((x + f) * (f + 1.0))
        s += term
        f += 1.0
    return -log_shift - math.log(s)


def gamma_ratio_sq(x: float, y: float) -> float:
    """|Γ(x+iy)/Γ(x)|²; lies in (0, 1] and equals 1 only for y = 0."""
    return math.exp(log_gamma_ratio_sq(x, y))


# ----------------------------------------------------------------------
# Adaptive quadrature
# ----------------------------------------------------------------------
def _to_unit(x: float) -> float:
    if x == -math.inf:
        return -1.0
    if x == math.inf:
        return 1.0
    return x / (1.0 + abs(x))


def _from_unit(t: np.ndarray) -> np.ndarray:
    return t / (1.0 - np.abs(t))


def _gk15(g: Callable, a: float, b: float):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    fx = g(mid + half * _NODES)
    k = half * np.dot(_KRONROD_W, fx)
    gs = half * np.dot(_GAUSS_W, fx)
    err = abs(k - gs)
    # QUADPACK scaling of the Kronrod-Gauss difference.
    abs_half = abs(half)
    resabs = abs_half * np.dot(_KRONROD_W, np.abs(fx))
    resasc = abs_half * np.dot(_KRONROD_W, np.abs(fx - k / (2.0 * half)))
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > _TINY / (50.0 * _EPS):
        err = max(50.0 * _EPS * resabs, err)
    return k, err, resabs


def adaptive_quad(f: Callable, lo: float, hi: float, tol: float = 1e-10, *,
                  rtol: float = 0.0, limit: int = 2000, points=()) -> float:
    """Integrate ``f`` over ``[lo, hi]`` by globally adaptive Gauss-Kronrod.

    Parameters
    ----------
    f : callable
        Vectorised integrand; receives a 1-d numpy array of abscissae. May
        return real or complex values.
    lo, hi : float
        Limits. Either may be infinite; the range is then mapped to a finite
        one through t = x / (1 + |x|).
    tol : float
        Absolute error target.
    rtol : float, optional
        Relative error target; the run stops when the error estimate falls
        below ``max(tol, rtol * |I|)``.
    limit : int
        Maximum number of subintervals.
    points : sequence of float, optional
        Interior breakpoints (kinks, near-singularities) to split at.

    Returns
    -------
    float or complex

    Raises
    ------
    QuadratureError
        If ``limit`` subintervals are used before the tolerance is met.

    Notes
    -----
    Each panel's error estimate is floored at 50·eps times the integral of
    |f| over it. When the integrand cancels heavily that floor can exceed the
    requested tolerance; the run then stops once the estimate is within twice
    the floor, i.e. at the accuracy double precision allows.
    """
    lo = float(lo)
    hi = float(hi)
    if math.isnan(lo) or math.isnan(hi):
        raise DomainError("integration limits must not be NaN")
    if lo == hi:
        return 0.0
    if lo > hi:
        return -adaptive_quad(f, hi, lo, tol, rtol=rtol, limit=limit, points=points)

    infinite = math.isinf(lo) or math.isinf(hi)
    if infinite:
        a, b = _to_unit(lo), _to_unit(hi)

        def g(t):
            x = _from_unit(t)
            return f(x) / (1.0 - np.abs(t)) ** 2

        breaks = [_to_unit(p) for p in points]
        # The map has a second-derivative kink at the origin.
        breaks.append(0.0)
    else:
        a, b = lo, hi
        g = f
        breaks = list(points)
    edges = sorted({a, b, *(p for p in breaks if a < p < b)})

    heap = []
    total = 0.0
    total_err = 0.0
    total_abs = 0.0
    tiebreak = 0
    for left, right in zip(edges[:-1], edges[1:]):
        val, err, rabs = _gk15(g, left, right)
        total += val
        total_err += err
        total_abs += rabs
        heapq.heappush(heap, (-err, tiebreak, left, right, val, rabs))
        tiebreak += 1

    while total_err > max(tol, rtol * abs(total), 100.0 * _EPS * total_abs):
        if len(heap) >= limit:
            raise QuadratureError(
                f"adaptive_quad: {limit} subintervals used, error estimate "
                f"{total_err:.3e} above target {max(tol, rtol * abs(total)):.3e}"
            )
        neg_err, _, left, right, val, rabs = heapq.heappop(heap)
        mid = 0.5 * (left + right)
        if not left < mid < right:
            raise QuadratureError(
                f"adaptive_quad: interval [{left!r}, {right!r}] cannot be split further"
            )
        v1, e1, a1 = _gk15(g, left, mid)
        v2, e2, a2 = _gk15(g, mid, right)
        total += v1 + v2 - val
        total_err += e1 + e2 + neg_err
        total_abs += a1 + a2 - rabs
        heapq.heappush(heap, (-e1, tiebreak, left, mid, v1, a1))
        heapq.heappush(heap, (-e2, tiebreak + 1, mid, right, v2, a2))
        tiebreak += 2
        # Running sums drift; recompute from the panels once in a while.
        if tiebreak % 64 == 0:
            total = sum(p[4] for p in heap)
            total_err = sum(-p[0] for p in heap)
            total_abs = sum(p[5] for p in heap)

    total = sum(p[4] for p in heap)
    if isinstance(total, complex) or np.iscomplexobj(total):
        return complex(total)
    return float(total)


# ----------------------------------------------------------------------
# Gauss hypergeometric function
# ----------------------------------------------------------------------
_SERIES_RADIUS = 0.9
_MAX_SERIES_TERMS = 200_000
_TINY = np.finfo(float).tiny
_ONE_MINUS = np.nextafter(1.0, 0.0)


def _is_nonpositive_integer(c: complex) -> bool:
    return c.imag == 0.0 and c.real <= 0.0 and c.real == math.floor(c.real)


def hyp2f1_series(a: complex, b: complex, c: complex, w: complex):
    """Sum the ₂F₁ power series to machine precision.

    Returns ``(value, largest_term_modulus)``; the ratio of the two is a
    measure of cancellation in the sum.
    """
    total = 1.0 + 0.0j
    term = 1.0 + 0.0j
    biggest = 1.0
    quiet = 0
    n = 0
    while True:
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * w
        n += 1
        total += term
        mag = abs(term)
        if mag > biggest:
            biggest = mag
        if mag == 0.0:
            break
        if mag <= _EPS * 0.25 * abs(total):
            quiet += 1
            if quiet >= 3:
                break
        else:
            quiet = 0
        if n >= _MAX_SERIES_TERMS:
            raise ConvergenceError(
                f"hyp2f1 series did not converge in {n} terms at |w|={abs(w):.6f}"
            )
    return total, biggest


def _euler_integral(a: complex, b: complex, c: complex, w: complex, tol: float,
                    cut_side: int | None = None) -> complex:
    log_pref = loggamma(c) - loggamma(b) - loggamma(c - b)
    bm1 = b - 1.0
    cbm1 = c - b - 1.0

    def log_kernel(t):
        # Nodes of tiny end intervals can round onto 0 or 1.
        t = np.clip(t.real, _TINY, _ONE_MINUS) + 0j
        return bm1 * np.log(t) + cbm1 * np.log1p(-t)

    t0 = 1.0 / w
    near_pole = (a == 1.0 and 0.0 < t0.real < 1.0 and abs(t0.imag) < 0.25)
    if not near_pole:
        # Split at 1/2 and integrate each half in the distance s to its end
        # point, with s = u^(1/ρ) so that s^(β-1) ds stays bounded when
        # Re β < 1 (β = b on the left, c - b on the right).
        def half(exp_near, exp_far, sign):
            rho = min(1.0, exp_near.real)

            def integrand(u):
                log_u = np.log(u)
                s_ = np.exp(log_u / rho)
                log_s = log_u / rho
                log_far = np.log1p(-s_)
                t = s_ if sign > 0 else 1.0 - s_
                log_jac = -math.log(rho) + (1.0 / rho - 1.0) * log_u
                return np.exp((exp_near - 1.0) * log_s + (exp_far - 1.0) * log_far
                              + log_jac - a * np.log(1.0 - w * t.astype(complex)))

            return adaptive_quad(integrand, 0.0, 0.5 ** rho, 1e-300, rtol=tol, limit=4000)

        integral = half(b, c - b, 1) + half(c - b, b, -1)
        return cmath.exp(log_pref) * integral

    # a = 1 with the pole 1/w close to [0, 1]: integrate (g(t) - g(t0)) / (1 - w t)
    # and add g(t0) ∫ dt / (1 - w t) = -g(t0) log(1 - w) / w in closed form.
    g0 = cmath.exp(bm1 * cmath.log(t0) + cbm1 * cmath.log(1.0 - t0))
    d1 = bm1 / t0 - cbm1 / (1.0 - t0)
    d2 = d1 * d1 - bm1 / t0 ** 2 - cbm1 / (1.0 - t0) ** 2
    g1 = g0 * d1
    g2 = g0 * d2

    def integrand(t):
        t = t.astype(complex)
        dt = t - t0
        g = np.exp(log_kernel(t))
        out = np.empty_like(g)
        close = np.abs(dt) < 1e-6
        far = ~close
        out[far] = (g[far] - g0) / (1.0 - w * t[far])
        # (g - g0) / (1 - w t) = -(g1 + g2 dt / 2) / w + O(dt²)
        out[close] = -(g1 + 0.5 * g2 * dt[close]) / w
        return out

    if cut_side is None:
        log_one_minus_w = cmath.log(1.0 - w)
    else:
        # w = x ± i0 with x > 1: 1 - w = (1 - x) ∓ i0.
        log_one_minus_w = complex(math.log(w.real - 1.0), -cut_side * math.pi)
    log_term = -log_one_minus_w / w
    scale = abs(g0 * log_term)
    integral = adaptive_quad(integrand, 0.0, 1.0, tol * scale, rtol=tol, limit=4000,
                             points=(t0.real,))
    return cmath.exp(log_pref) * (integral + g0 * log_term)


def hyp2f1(a, b, c, w, *, tol: float = 1e-10, cut_side: int | None = None) -> complex:
    """Gauss hypergeometric function ₂F₁(a, b; c; w) for complex arguments.

    The power series is used for |w| ≤ 0.9; beyond that the Euler integral
    representation is integrated numerically, which needs Re(c) > Re(b) > 0
    (or the same with a and b exchanged). On the unit circle the series is
    the fallback if the integral is not admissible.

    Parameters
    ----------
    a, b, c, w : complex
    tol : float
        Relative tolerance for the Euler integral. The series is always summed
        to machine precision.
    cut_side : {None, -1, +1}
        For real w > 1 (on the branch cut) return the limit from below (-1)
        or above (+1). Only supported for a = 1, where the integrand has a
        simple pole that is removed analytically.

    Raises
    ------
    DomainError
        c is a nonpositive integer, or w lies on the cut without ``cut_side``.
    ConvergenceError
        Neither the series nor the integral is admissible.
    """
    a, b, c, w = complex(a), complex(b), complex(c), complex(w)
    if _is_nonpositive_integer(c):
        raise DomainError(f"hyp2f1: c={c} is a nonpositive integer")
    if w == 0:
        return 1.0 + 0.0j

    if w.imag == 0.0 and w.real >= 1.0:
        if w.real == 1.0:
            excess = c - a - b
            if excess.real <= 0.0:
                raise ConvergenceError(
                    f"hyp2f1 diverges at w=1 unless Re(c-a-b) > 0; got {excess.real:.6g}"
                )
            # Gauss summation theorem.
            return complex(cmath.exp(loggamma(c) + loggamma(excess)
                                     - loggamma(c - a) - loggamma(c - b)))
        if cut_side is None:
            raise DomainError(f"hyp2f1: w={w} lies on the branch cut [1, inf)")
        if cut_side not in (-1, 1):
            raise DomainError(f"cut_side must be -1 or +1, got {cut_side!r}")
        if a != 1.0:
            raise DomainError("evaluation on the branch cut is only supported for a = 1")
        if not c.real > b.real > 0.0:
            raise ConvergenceError(
                "hyp2f1 on the cut needs Re(c) > Re(b) > 0 for the Euler integral"
            )
        return _euler_integral(a, b, c, complex(w.real, 0.0), tol, cut_side)

    if abs(w) <= _SERIES_RADIUS:
        return hyp2f1_series(a, b, c, w)[0]
    if c.real > b.real > 0.0:
        return _euler_integral(a, b, c, w, tol)
    if c.real > a.real > 0.0:
        return _euler_integral(b, a, c, w, tol)
    if abs(w) < 1.0:
        return hyp2f1_series(a, b, c, w)[0]
    raise ConvergenceError(
        f"hyp2f1: |w|={abs(w):.6g} >= 1 so the series diverges, and the Euler "
        f"integral needs Re(c) > Re(b) > 0 (Re c={c.real:.6g}, Re b={b.real:.6g}, "
        f"Re a={a.real:.6g})"
    )
