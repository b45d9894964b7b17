"""
APARCH(1,1) with standardized Pearson type IV innovations.

    r_t = μ + ε_t,   ε_t = σ_t z_t,   z_t ~ SPIV(m, ν)
    σ_t^δ = ω + α (|ε_{t-1}| - γ ε_{t-1})^δ + β σ_{t-1}^δ

Pre-sample values follow Laurent: the lagged k-term is the sample average of
(|ε_s| - γ ε_s)^δ and σ_0^δ = (mean ε_s²)^(δ/2), with ε_s = r_s - μ at the
current μ.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal, stats
from scipy.special import expit, logit

from ._errors import (ConvergenceError, DomainError, MomentDivergenceError,
                      SingularHessianError)
from .spiv import SpivParams, spiv_logpdf, spiv_power_expectation, spiv_sample

logger = logging.getLogger(__name__)

PARAM_NAMES = ("mu", "omega", "alpha", "beta", "gamma", "delta", "nu", "m")
PERSISTENCE_BARRIER = 1.0 - 1e-6


@dataclass(frozen=True)
class AparchParams:
    mu: float
    omega: float
    alpha: float
    beta: float
    gamma: float
    delta: float
    spiv: SpivParams

    def __post_init__(self):
        problems = []
        if not self.omega > 0:
            problems.append(f"omega={self.omega} must be > 0")
        if not self.alpha >= 0:
            problems.append(f"alpha={self.alpha} must be >= 0")
        if not self.beta >= 0:
            problems.append(f"beta={self.beta} must be >= 0")
        if not -1 < self.gamma < 1:
            problems.append(f"gamma={self.gamma} must lie in (-1, 1)")
        if not self.delta > 0:
            problems.append(f"delta={self.delta} must be > 0")
        if not math.isfinite(self.mu):
            problems.append(f"mu={self.mu} must be finite")
        if problems:
            raise DomainError("invalid APARCH parameters: " + "; ".join(problems))

    @property
    def m(self) -> float:
        return self.spiv.m

    @property
    def nu(self) -> float:
        return self.spiv.nu

    @classmethod
    def from_vector(cls, theta) -> "AparchParams":
        mu, omega, alpha, beta, gamma, delta, nu, m = (float(v) for v in theta)
        return cls(mu, omega, alpha, beta, gamma, delta, SpivParams(m, nu))

    @classmethod
    def from_mapping(cls, values) -> "AparchParams":
        missing = [k for k in PARAM_NAMES if k not in values]
        if missing:
            raise DomainError(f"missing parameters: {', '.join(missing)}")
        return cls.from_vector([values[k] for k in PARAM_NAMES])

    def to_vector(self) -> np.ndarray:
        return np.array([self.mu, self.omega, self.alpha, self.beta, self.gamma,
                         self.delta, self.nu, self.m])

    def as_dict(self) -> dict:
        return dict(zip(PARAM_NAMES, (float(v) for v in self.to_vector())))


# Reference estimates for the WTI series; handy for simulation and pinned checks.
WTI_PARAMS = AparchParams(mu=0.0058, omega=0.0166, alpha=0.0586, beta=0.9493,
                             gamma=0.2043, delta=1.1946,
                             spiv=SpivParams(5.6275, 0.4748))


@dataclass
class FilterState:
    sigma_delta: np.ndarray
    residuals: np.ndarray
    std_residuals: np.ndarray
    sigma: np.ndarray = field(repr=False, default=None)


@dataclass
class FitOptions:
    max_iter: int = 5000
    tol: float = 1e-8
    multi_start: int = 1
    seed: int = 0


@dataclass
class FitResult:
    params: AparchParams
    loglik: float
    robust_se: dict
    t_stats: dict
    p_values: dict
    persistence: float
    state: FilterState
    converged: bool
    iterations: int
    history: list = field(default_factory=list, repr=False)
    flags: list = field(default_factory=list)


# ----------------------------------------------------------------------
# Filter and likelihood
# ----------------------------------------------------------------------
def aparch_filter(params: AparchParams, returns) -> FilterState:
    """Run the σ^δ recursion over ``returns``."""
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise DomainError("returns must be a non-empty 1-d sequence")
    d = params.delta
    eps = r - params.mu
    k_pow = (np.abs(eps) - params.gamma * eps) ** d
    k_init = k_pow.mean()
    s_init = np.mean(eps * eps) ** (0.5 * d)
    drive = params.omega + params.alpha * np.concatenate(([k_init], k_pow[:-1]))
    sig_d, _ = signal.lfilter([1.0], [1.0, -params.beta], drive, zi=[params.beta * s_init])
    if not np.all(sig_d > 0):
        raise ArithmeticError("sigma^delta lost positivity; parameters violate invariants")
    sigma = sig_d ** (1.0 / d)
    return FilterState(sigma_delta=sig_d, residuals=eps, std_residuals=eps / sigma, sigma=sigma)


def _box_ok(params: AparchParams) -> bool:
    return (params.omega > 0 and params.alpha >= 0 and params.beta >= 0
            and -1 < params.gamma < 1 and params.delta > 0)


def aparch_persistence(params: AparchParams) -> float:
    """α E(|z| - γz)^δ + β."""
    if params.alpha == 0:
        return params.beta
    return params.alpha * spiv_power_expectation(params.spiv, params.gamma, params.delta) + params.beta


def aparch_loglik_terms(params: AparchParams, returns) -> np.ndarray:
    """Per-observation log-likelihood ln p(z_t) - ½ ln h_t (no constraint checks)."""
    state = aparch_filter(params, returns)
    return spiv_logpdf(params.spiv, state.std_residuals) - np.log(state.sigma_delta) / params.delta


def aparch_loglik(params: AparchParams, returns, *, check_stationarity: bool = True) -> float:
    """Total log-likelihood; -inf when the parameters violate the constraints."""
    if not _box_ok(params):
        return -math.inf
    if check_stationarity:
        try:
            if aparch_persistence(params) >= PERSISTENCE_BARRIER:
                return -math.inf
        except MomentDivergenceError:
            return -math.inf
    try:
        terms = aparch_loglik_terms(params, returns)
    except (ArithmeticError, FloatingPointError):
        return -math.inf
    total = float(np.sum(terms))
    return total if math.isfinite(total) else -math.inf


# ----------------------------------------------------------------------
# Estimation
# ----------------------------------------------------------------------
def _to_free(params: AparchParams) -> np.ndarray:
    return np.array([
        params.mu,
        math.log(params.omega),
        math.log(params.alpha),
        logit(params.beta),
        math.atanh(params.gamma),
        math.log(params.delta),
        params.nu,
        math.log(params.m - 2.0),
    ])


def _from_free(x) -> AparchParams:
    mu, lw, la, lb, g, ld, nu, lm = (float(v) for v in x)
    return AparchParams(mu=mu, omega=math.exp(lw), alpha=math.exp(la), beta=float(expit(lb)),
                        gamma=math.tanh(g), delta=math.exp(ld),
                        spiv=SpivParams(2.0 + math.exp(lm), nu))


def default_start(returns) -> AparchParams:
    r = np.asarray(returns, dtype=float)
    return AparchParams(mu=float(r.mean()), omega=0.05 * float(r.var()), alpha=0.05, beta=0.90,
                        gamma=0.0, delta=1.5, spiv=SpivParams(6.0, 0.0))


class _Objective:
    """Negative mean log-likelihood in the unconstrained coordinates."""

    def __init__(self, returns):
        self.returns = returns
        self.n = len(returns)
        self.evaluations = 0

    def __call__(self, x) -> float:
        self.evaluations += 1
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                params = _from_free(x)
            ll = aparch_loglik(params, self.returns)
        except (DomainError, OverflowError, FloatingPointError, ValueError):
            return math.inf
        return -ll / self.n if math.isfinite(ll) else math.inf

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.empty_like(x)
        for i in range(x.size):
            h = 1e-5 * max(1.0, abs(x[i]))
            up, dn = x.copy(), x.copy()
            up[i] += h
            dn[i] -= h
            fu, fd = self(up), self(dn)
            if not (math.isfinite(fu) and math.isfinite(fd)):
                f0 = self(x)
                if math.isfinite(fu):
                    g[i] = (fu - f0) / h
                elif math.isfinite(fd):
                    g[i] = (f0 - fd) / h
                else:
                    g[i] = 0.0
            else:
                g[i] = (fu - fd) / (2.0 * h)
        return g


def _run_stages(objective: _Objective, x0: np.ndarray, options: FitOptions):
    """Alternate Nelder-Mead and BFGS stages until two in a row stop improving."""
    x = np.asarray(x0, dtype=float)
    f = objective(x)
    if not math.isfinite(f):
        raise DomainError("starting point has zero likelihood")
    history = [-f * objective.n]
    iterations = 0
    quiet = 0
    converged = False
    stage = 0
    while iterations < options.max_iter:
        budget = options.max_iter - iterations
        record = []

        def callback(xk, *args):
            record.append(xk.copy())

        if stage % 2 == 0:
            res = optimize.minimize(objective, x, method="Nelder-Mead", callback=callback,
                                    options={"maxiter": min(budget, 4000), "xatol": 1e-7,
                                             "fatol": 1e-11, "adaptive": True})
        else:
            res = optimize.minimize(objective, x, method="BFGS", jac=objective.gradient,
                                    callback=callback,
                                    options={"maxiter": min(budget, 500), "gtol": 1e-7})
        iterations += max(int(res.nit), 1)
        for xk in record:
            val = objective(xk)
            if math.isfinite(val):
                history.append(max(history[-1], -val * objective.n))
        candidate = np.asarray(res.x, dtype=float)
        f_new = objective(candidate)
        if f_new <= f:
            improvement = (f - f_new) * objective.n
            x, f = candidate, f_new
        else:
            improvement = 0.0
        history.append(max(history[-1], -f * objective.n))
        logger.debug("stage %d (%s): loglik %.8f, improvement %.3e", stage,
                     "simplex" if stage % 2 == 0 else "quasi-Newton", -f * objective.n, improvement)
        if improvement <= options.tol * (1.0 + abs(f * objective.n)):
            quiet += 1
            if quiet >= 2:
                converged = True
                break
        else:
            quiet = 0
        stage += 1
    return x, f, converged, iterations, history


def aparch_fit(returns, options: FitOptions | None = None,
               start: AparchParams | None = None) -> FitResult:
    """Maximum-likelihood fit of the APARCH(1,1)-SPIV model.

    A Nelder-Mead simplex and a BFGS stage with central finite-difference
    gradients alternate on a smooth reparameterisation of the parameter box;
    non-stationary points get zero likelihood. With ``multi_start > 1`` extra
    starts are drawn around the default start and the best run wins (ties
    broken by the lexicographic order of the parameter vector).
    """
    options = options or FitOptions()
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1 or r.size < 100:
        raise DomainError(f"need at least 100 observations to fit, got {r.size}")
    if not np.all(np.isfinite(r)):
        raise DomainError("returns contain non-finite values")
    if float(np.var(r)) == 0.0:
        raise DomainError("returns have zero variance")

    start = start or default_start(r)
    starts = [_to_free(start)]
    rng = np.random.default_rng(options.seed)
    for _ in range(max(0, options.multi_start - 1)):
        starts.append(starts[0] + rng.normal(scale=[0.02, 0.5, 0.3, 0.3, 0.2, 0.2, 0.3, 0.3]))

    runs = []
    for x0 in starts:
        objective = _Objective(r)
        try:
            runs.append(_run_stages(objective, x0, options))
        except DomainError as exc:
            logger.warning("start discarded: %s", exc)
    if not runs:
        raise ConvergenceError("no starting point produced a finite likelihood")
    runs.sort(key=lambda run: (run[1], tuple(_from_free(run[0]).to_vector())))
    x, f, converged, iterations, history = runs[0]

    params = _from_free(x)
    loglik = aparch_loglik(params, r)
    state = aparch_filter(params, r)
    result = FitResult(params=params, loglik=loglik, robust_se={}, t_stats={}, p_values={},
                       persistence=aparch_persistence(params), state=state,
                       converged=converged, iterations=iterations, history=history)
    if not converged:
        result.flags.append("iteration cap reached before convergence")
    try:
        se = aparch_robust_se(result, r)
    except SingularHessianError as exc:
        logger.warning("robust standard errors unavailable: %s", exc)
        result.flags.append(f"singular Hessian (condition number {exc.condition_number:.3e})")
        se = {k: math.nan for k in PARAM_NAMES}
    _attach_inference(result, se)
    return result


def _attach_inference(result: FitResult, se: dict) -> None:
    est = result.params.as_dict()
    result.robust_se = dict(se)
    result.t_stats = {k: est[k] / se[k] if se[k] > 0 else math.nan for k in PARAM_NAMES}
    # Two-sided normal p-values.
    result.p_values = {k: float(2.0 * stats.norm.sf(abs(t))) if math.isfinite(t) else math.nan
                       for k, t in result.t_stats.items()}


# ----------------------------------------------------------------------
# Robust standard errors
# ----------------------------------------------------------------------
def sandwich_se(terms, theta) -> np.ndarray:
    """QML sandwich standard errors for a per-observation log-likelihood.

    Parameters
    ----------
    terms : callable
        ``terms(theta) -> ndarray`` of per-observation log-likelihood values.
    theta : array_like
        Point estimate.

    Returns
    -------
    ndarray
        sqrt(diag(H⁻¹ OPG H⁻¹) / n), with H the central-difference Hessian of
        the mean log-likelihood and OPG the mean outer product of
        per-observation central-difference scores.
    """
    theta = np.asarray(theta, dtype=float)
    k = theta.size
    h = 1e-5 * np.maximum(1.0, np.abs(theta))
    base = np.asarray(terms(theta), dtype=float)
    n = base.size

    def shifted(*moves):
        x = theta.copy()
        for i, s in moves:
            x[i] += s * h[i]
        return np.asarray(terms(x), dtype=float)

    plus = [shifted((i, 1)) for i in range(k)]
    minus = [shifted((i, -1)) for i in range(k)]
    scores = np.column_stack([(plus[i] - minus[i]) / (2.0 * h[i]) for i in range(k)])
    opg = scores.T @ scores / n

    f0 = base.mean()
    hess = np.empty((k, k))
    for i in range(k):
        hess[i, i] = (plus[i].mean() - 2.0 * f0 + minus[i].mean()) / h[i] ** 2
        for j in range(i):
            fpp = shifted((i, 1), (j, 1)).mean()
            fpm = shifted((i, 1), (j, -1)).mean()
            fmp = shifted((i, -1), (j, 1)).mean()
            fmm = shifted((i, -1), (j, -1)).mean()
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])

    cond = np.linalg.cond(hess)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularHessianError(f"Hessian is singular (condition number {cond:.3e})", cond)
    h_inv = np.linalg.inv(hess)
    cov = h_inv @ opg @ h_inv / n
    return np.sqrt(np.abs(np.diag(cov)))


def aparch_robust_se(result: FitResult, returns) -> dict:
    """Robust (sandwich) standard errors of the fitted parameters, by name."""
    r = np.asarray(returns, dtype=float)

    def terms(theta):
        try:
            return aparch_loglik_terms(AparchParams.from_vector(theta), r)
        except DomainError:
            return np.full(r.size, np.nan)

    se = sandwich_se(terms, result.params.to_vector())
    return dict(zip(PARAM_NAMES, (float(v) for v in se)))


# ----------------------------------------------------------------------
# Simulation
# ----------------------------------------------------------------------
def aparch_simulate(params: AparchParams, n: int, burn_in: int = 1000, seed: int = 0) -> np.ndarray:
    """Simulate ``n`` returns after discarding ``burn_in`` points.

    The recursion starts from the stationary mean of σ^δ, ω / (1 - persistence).
    """
    n = int(n)
    burn_in = int(burn_in)
    if n < 1 or burn_in < 0:
        raise DomainError("need n >= 1 and burn_in >= 0")
    persistence = aparch_persistence(params)
    if persistence >= 1.0:
        raise DomainError(f"parameters are not stationary (persistence {persistence:.6f} >= 1)")
    z = spiv_sample(params.spiv, n + burn_in, seed)
    d = params.delta
    inv_d = 1.0 / d
    omega, alpha, beta, gamma, mu = params.omega, params.alpha, params.beta, params.gamma, params.mu
    s = omega / (1.0 - persistence)
    out = np.empty(n + burn_in)
    for t in range(n + burn_in):
        e = s ** inv_d * z[t]
        out[t] = mu + e
        s = omega + alpha * (abs(e) - gamma * e) ** d + beta * s
    return out[burn_in:]
