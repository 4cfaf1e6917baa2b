#!/usr/bin/env python3
"""
Closed-form performance of the GLRGDD and AMGDD
Conditional complex-F CDF, Beta mixing densities, PD/PFA integrals over
Gauss-Legendre rules and threshold inversion
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Tuple, Union

import numpy as np
from scipy import optimize, special

from .detectors import Detector
from .exceptions import ConvergenceError, DomainError, NumericalError, ScenarioError
from .model import Scenario, dimension_errors

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_QUADRATURE_ORDER = 96
MAX_QUADRATURE_ORDER = 1536
CONVERGENCE_TOL = 1e-9
PROBABILITY_SLACK = 1e-12
MAX_BRACKET_EXPANSIONS = 1100
ROOT_RTOL = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class DistParams:
    """Dimensions and linear SNR that fix every distribution below"""

    n_channels: int
    n_columns: int
    subspace_dim: int
    n_training: int
    rho: float = 0.0

    def __post_init__(self):
        errors = dimension_errors(self.n_channels, self.n_columns, self.subspace_dim, self.n_training)
        if errors:
            raise ScenarioError(errors, context="analytic")
        if not (math.isfinite(self.rho) and self.rho >= 0.0):
            raise DomainError(f"rho must be finite and nonnegative, got {self.rho}", context="analytic")
        object.__setattr__(self, 'rho', float(self.rho))

    @classmethod
    def from_scenario(cls, s: Scenario, rho: float = 0.0) -> 'DistParams':
        return cls(s.n_channels, s.n_columns, s.subspace_dim, s.n_training, rho)

    def with_rho(self, rho: float) -> 'DistParams':
        return replace(self, rho=float(rho))

    @property
    def n1(self) -> int:
        """L+P−O, exponent of (1+η) in the CDF"""
        return self.n_training + self.n_columns - self.n_channels

    @property
    def k_max(self) -> int:
        return self.n1 - self.subspace_dim

    @property
    def f_dofs(self) -> Tuple[int, int]:
        return self.subspace_dim, self.k_max + 1

    @property
    def beta_g_dofs(self) -> Tuple[int, int]:
        return self.n1 + 1, self.n_channels - 1

    @property
    def beta_a_dofs(self) -> Tuple[int, int]:
        return self.k_max + 2, self.n_channels - 1


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Legendre nodes and weights mapped to [0, 1]"""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    @classmethod
    def gauss_legendre(cls, order: int = DEFAULT_QUADRATURE_ORDER) -> 'QuadratureRule':
        if order < 1:
            raise DomainError(f"quadrature order must be positive, got {order}", context="analytic")
        return _gauss_legendre(int(order))

    def integrate(self, integrand: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Σ w_i·f(x_i); the integrand maps the node vector onto the last axis"""
        return integrand(self.nodes) @ self.weights


@lru_cache(maxsize=16)
def _gauss_legendre(order: int) -> QuadratureRule:
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(nodes=nodes, weights=weights, order=order)


def _real_array(value, name: str) -> np.ndarray:
    array = np.asarray(value, dtype=float)
    if np.any(~np.isfinite(array)):
        raise DomainError(f"{name} must be finite", context="analytic")
    return array


def _nonnegative(value, name: str) -> np.ndarray:
    array = _real_array(value, name)
    if np.any(array < 0.0):
        raise DomainError(f"{name} must be nonnegative", context="analytic")
    return array


def _unit_interval(value, name: str = "beta") -> np.ndarray:
    array = _real_array(value, name)
    if np.any((array < 0.0) | (array > 1.0)):
        raise DomainError(f"{name} must lie in [0, 1]", context="analytic")
    return array


def _output(values: np.ndarray) -> ArrayLike:
    values = np.asarray(values)
    return float(values) if values.ndim == 0 else values


def _clamp_probability(values: np.ndarray, what: str) -> np.ndarray:
    if np.any(values > 1.0 + PROBABILITY_SLACK) or np.any(values < -PROBABILITY_SLACK):
        worst = float(np.max(np.abs(values - np.clip(values, 0.0, 1.0))))
        raise NumericalError(f"{what} left [0, 1] by {worst:.3e}", context="analytic")
    return np.clip(values, 0.0, 1.0)


def _log_inc_gamma_table(k_max: int, a: np.ndarray) -> np.ndarray:
    """log IG_{k+1}(a) for k = 0..k_max along a new last axis.

    Series terms a^m/m! come from the running sum of log a − log m and are
    accumulated with logaddexp, so nothing overflows.
    """
    with np.errstate(divide='ignore'):
        log_a = np.log(a)
    # a = 0 gives log_a = -inf, which only removes the m >= 1 terms
    steps = log_a[..., None] - np.log(np.arange(1, k_max + 1, dtype=float))
    log_terms = np.concatenate([np.zeros(a.shape + (1,)), np.cumsum(steps, axis=-1)], axis=-1)
    return np.logaddexp.accumulate(log_terms, axis=-1) - a[..., None]


def inc_gamma(k: int, a: ArrayLike) -> ArrayLike:
    """IG_{k+1}(a) = e^(−a)·Σ_{m=0..k} a^m/m!"""
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 0:
        raise DomainError(f"k must be a nonnegative integer, got {k!r}", context="analytic")
    a = _nonnegative(a, "a")
    return _output(np.exp(_log_inc_gamma_table(int(k), a)[..., int(k)]))


def log_binom(n: int, m: ArrayLike) -> ArrayLike:
    """log C(n, m) through log-gamma"""
    m_arr = np.asarray(m, dtype=float)
    if n < 0 or np.any(m_arr < 0) or np.any(m_arr > n):
        raise DomainError(f"binomial C({n}, {m}) needs 0 <= m <= n", context="analytic")
    return _output(special.gammaln(n + 1) - special.gammaln(m_arr + 1) - special.gammaln(n - m_arr + 1))


def cdf_p1(eta: ArrayLike, noncentrality: ArrayLike, p: DistParams) -> ArrayLike:
    """P(t′ <= η | β) for the conditional complex F with noncentrality ρ·β.

    Σ_{k=0..Kmax} C(N1, k+Q)·η^(k+Q)·IG_{k+1}(nc/(1+η)) / (1+η)^N1, summed in
    the log domain.
    """
    eta = _nonnegative(eta, "eta")
    nc = _nonnegative(noncentrality, "noncentrality")
    eta, nc = np.broadcast_arrays(eta, nc)

    powers = np.arange(p.k_max + 1) + p.subspace_dim
    log_terms = (log_binom(p.n1, powers)
                 + special.xlogy(powers, eta[..., None])
                 - p.n1 * np.log1p(eta)[..., None]
                 + _log_inc_gamma_table(p.k_max, nc / (1.0 + eta)))
    cdf = np.exp(special.logsumexp(log_terms, axis=-1))
    return _output(_clamp_probability(cdf, "complex F CDF"))


def _null_sf(eta: np.ndarray, p: DistParams) -> np.ndarray:
    """1 − CDF at zero noncentrality as the complementary binomial sum over j < Q"""
    powers = np.arange(p.subspace_dim)
    log_terms = (log_binom(p.n1, powers)
                 + special.xlogy(powers, eta[..., None])
                 - p.n1 * np.log1p(eta)[..., None])
    return np.exp(special.logsumexp(log_terms, axis=-1))


def _beta_density(beta: np.ndarray, a: int, b: int) -> np.ndarray:
    log_pdf = special.xlogy(a - 1, beta) + special.xlog1py(b - 1, -beta) - special.betaln(a, b)
    return np.exp(log_pdf)


def pdf_beta_g(beta: ArrayLike, p: DistParams) -> ArrayLike:
    """β^(L+P−O)·(1−β)^(O−2) / B(L+P−O+1, O−1)"""
    return _output(_beta_density(_unit_interval(beta), *p.beta_g_dofs))


def pdf_beta_a(beta: ArrayLike, p: DistParams) -> ArrayLike:
    """β^(L+P−Q−O+1)·(1−β)^(O−2) / B(L+P−Q−O+2, O−1)"""
    return _output(_beta_density(_unit_interval(beta), *p.beta_a_dofs))


def integrate(integrand: Callable[[np.ndarray], np.ndarray],
              order: int = DEFAULT_QUADRATURE_ORDER,
              check_convergence: bool = True) -> np.ndarray:
    """Integrate over [0, 1], doubling the order until successive results agree"""
    rule = QuadratureRule.gauss_legendre(order)
    value = rule.integrate(integrand)
    if not check_convergence:
        return value

    while True:
        finer = QuadratureRule.gauss_legendre(2 * rule.order)
        refined = finer.integrate(integrand)
        change = float(np.max(np.abs(refined - value))) if np.size(value) else 0.0
        if change < CONVERGENCE_TOL:
            return value
        if finer.order >= MAX_QUADRATURE_ORDER:
            raise ConvergenceError(
                f"quadrature did not converge by order {finer.order} (last change {change:.3e})",
                context="analytic")
        logger.debug(f"Quadrature order {rule.order} -> {finer.order}, change {change:.3e}")
        rule, value = finer, refined


def pfa_glrgdd(eta: ArrayLike, p: DistParams) -> ArrayLike:
    """Closed form; the Beta mixing integrates out at zero noncentrality"""
    eta = _nonnegative(eta, "eta")
    return _output(_clamp_probability(_null_sf(eta, p), "GLRGDD PFA"))


def pd_glrgdd(eta: ArrayLike, p: DistParams, *, order: int = DEFAULT_QUADRATURE_ORDER,
              check_convergence: bool = True) -> ArrayLike:
    eta = _nonnegative(eta, "eta")
    a, b = p.beta_g_dofs

    def integrand(beta):
        miss = cdf_p1(eta[..., None], p.rho * beta, p)
        return (1.0 - miss) * _beta_density(beta, a, b)

    return _output(_clamp_probability(integrate(integrand, order, check_convergence), "GLRGDD PD"))


def pd_amgdd(eta: ArrayLike, p: DistParams, *, order: int = DEFAULT_QUADRATURE_ORDER,
             check_convergence: bool = True) -> ArrayLike:
    """Same integral with η → η·β and the AMGDD Beta density"""
    eta = _nonnegative(eta, "eta")
    a, b = p.beta_a_dofs

    def integrand(beta):
        miss = cdf_p1(eta[..., None] * beta, p.rho * beta, p)
        return (1.0 - miss) * _beta_density(beta, a, b)

    return _output(_clamp_probability(integrate(integrand, order, check_convergence), "AMGDD PD"))


def pfa_amgdd(eta: ArrayLike, p: DistParams, *, order: int = DEFAULT_QUADRATURE_ORDER,
              check_convergence: bool = True) -> ArrayLike:
    eta = _nonnegative(eta, "eta")
    a, b = p.beta_a_dofs

    def integrand(beta):
        return _null_sf(eta[..., None] * beta, p) * _beta_density(beta, a, b)

    return _output(_clamp_probability(integrate(integrand, order, check_convergence), "AMGDD PFA"))


def invert_threshold(pfa_fn: Callable[[float], float], target: float) -> float:
    """Threshold η with pfa_fn(η) = target for a strictly decreasing pfa_fn.

    The bracket [0, 1] is doubled until it contains the target, then refined
    with Brent's method to machine relative precision.
    """
    target = float(target)
    if not 0.0 < target < 1.0:
        raise DomainError(f"PFA target {target} is not in (0, 1)", context="analytic")

    def excess(eta: float) -> float:
        return float(pfa_fn(eta)) - target

    lo, hi = 0.0, 1.0
    if excess(lo) <= 0.0:
        raise ConvergenceError(f"pfa(0) does not exceed the target {target}", context="analytic")
    for _ in range(MAX_BRACKET_EXPANSIONS):
        if excess(hi) <= 0.0:
            break
        lo, hi = hi, 2.0 * hi
        logger.debug(f"Threshold bracket expanded to [{lo:g}, {hi:g}]")
    else:
        raise ConvergenceError(f"could not bracket PFA target {target}", context="analytic")

    if excess(hi) == 0.0:
        return hi
    eta = optimize.brentq(excess, lo, hi, xtol=1e-300, rtol=ROOT_RTOL, maxiter=500)
    return float(eta)


def pfa(detector: Detector, eta: ArrayLike, p: DistParams, **quadrature) -> ArrayLike:
    if Detector(detector) is Detector.GLRGDD:
        return pfa_glrgdd(eta, p)
    return pfa_amgdd(eta, p, **quadrature)


def pd(detector: Detector, eta: ArrayLike, p: DistParams, **quadrature) -> ArrayLike:
    if Detector(detector) is Detector.GLRGDD:
        return pd_glrgdd(eta, p, **quadrature)
    return pd_amgdd(eta, p, **quadrature)


def null_cdf(detector: Detector, eta: ArrayLike, p: DistParams, **quadrature) -> ArrayLike:
    """1 − PFA, the H0 distribution of the thresholded statistic"""
    return _output(1.0 - np.asarray(pfa(detector, eta, p, **quadrature)))


def threshold(detector: Detector, pfa_target: float, p: DistParams, **quadrature) -> float:
    """Analytic threshold on t′ (GLRGDD) or t (AMGDD) for the requested PFA"""
    eta = invert_threshold(lambda e: pfa(detector, e, p, **quadrature), pfa_target)
    logger.debug(f"{Detector(detector).value} threshold for PFA {pfa_target:g}: {eta:.10g}")
    return eta
