"""Scalar special functions accurate over extreme argument ranges.

Provides the upper incomplete gamma function of order zero Gamma(0, x)
(equal to the exponential integral E1), its exponentially scaled variant
e^x * Gamma(0, x) which stays representable for x up to 1e4, and the
modified Bessel functions K0 and K1.  Everything is pure and thread safe.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

EULER_GAMMA = 0.5772156649015329

# e^{-x} is subnormal-free below this; beyond it the unscaled value is not
# representable and callers must switch to the scaled variant.
_UNDERFLOW_X = 700.0


@dataclass(frozen=True)
class AccuracyPolicy:
    """Evaluation policy for Gamma(0, x).

    rel_tol is the relative tolerance of either branch;
    series_asymptotic_crossover is the argument where evaluation switches
    from the series/continued-fraction branch to the optimally truncated
    asymptotic series.
    """

    rel_tol: float = 1e-12
    series_asymptotic_crossover: float = 35.0

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-6):
            raise DomainError(f"rel_tol must be in (0, 1e-6], got {self.rel_tol}")
        if self.series_asymptotic_crossover <= 0.0:
            raise DomainError("crossover must be positive")


DEFAULT_POLICY = AccuracyPolicy()


def _gamma0_series(x, rel_tol=1e-15):
    # -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k k!), convergent but
    # cancellation-limited; used only for x < 1.
    total = 0.0
    term = 1.0
    for k in range(1, 100):
        term *= -x / k
        total -= term / k
        if abs(term / k) < rel_tol * max(abs(total), 1e-30):
            break
    return -EULER_GAMMA - math.log(x) + total


def _gamma0_cf_scaled(x, rel_tol=1e-15, maxit=400):
    # Modified Lentz continued fraction for e^x E1(x); solid for x >= 1.
    b = x + 1.0
    tiny = 1e-300
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, maxit):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < rel_tol:
            return h
    raise DomainError(f"continued fraction for Gamma(0, {x}) did not converge")


def _gamma0_asymptotic_scaled(x):
    # (1/x) sum_k (-1)^k k!/x^k, truncated at the smallest term.  Growing
    # terms are never added.
    s = 1.0
    term = 1.0
    k = 1
    while True:
        nxt = term * (-k / x)
        if abs(nxt) >= abs(term):
            break
        s += nxt
        term = nxt
        k += 1
        if abs(nxt) < 1e-18 * abs(s):
            break
    return s / x


def gamma_upper_zero_scaled(x, policy=DEFAULT_POLICY):
    """e^x * Gamma(0, x), finite and accurate for all x in (0, 1e4]."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"gamma_upper_zero_scaled requires x > 0, got {x}")
    if x < 1.0:
        return math.exp(x) * _gamma0_series(x, policy.rel_tol * 1e-3)
    if x < policy.series_asymptotic_crossover:
        return _gamma0_cf_scaled(x, policy.rel_tol * 1e-3)
    return _gamma0_asymptotic_scaled(x)


def gamma_upper_zero(x, policy=DEFAULT_POLICY):
    """Gamma(0, x) = integral_x^inf e^{-t}/t dt for x > 0."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"gamma_upper_zero requires x > 0, got {x}")
    if x > _UNDERFLOW_X:
        raise DomainError(
            f"e^-x underflows for x = {x:g}; use gamma_upper_zero_scaled instead"
        )
    if x < 1.0:
        return _gamma0_series(x, policy.rel_tol * 1e-3)
    return math.exp(-x) * gamma_upper_zero_scaled(x, policy)


# ---------------------------------------------------------------------------
# Modified Bessel functions K0 and K1.
#
# Series below x = 2; above that a Gauss-Hermite quadrature of
#   K_nu(x) = sqrt(pi/2x) e^-x / Gamma(nu + 1/2)
#             * int_0^inf e^-u u^{nu - 1/2} (1 + u/2x)^{nu - 1/2} du
# with u = v^2, which is machine accurate for x >= 2 with 160 nodes.
# ---------------------------------------------------------------------------

_HG_NODES, _HG_WEIGHTS = np.polynomial.hermite.hermgauss(160)
_HG_NODES_SQ = _HG_NODES * _HG_NODES
_SERIES_TERMS = 22


def _k0_k1_series(x):
    q = 0.25 * x * x
    i0 = np.ones_like(x)
    t0 = np.ones_like(x)
    s0 = np.zeros_like(x)
    i1 = np.ones_like(x)
    t1 = np.ones_like(x)
    ps = np.zeros_like(x)
    tp = np.ones_like(x)
    hk = 0.0
    pk = -EULER_GAMMA          # psi(k+1) at k = 0
    pk1 = 1.0 - EULER_GAMMA    # psi(k+2) at k = 0
    for k in range(1, _SERIES_TERMS + 1):
        ps += (pk + pk1) * tp
        tp = tp * q / (k * (k + 1))
        t1 = t1 * q / (k * (k + 1))
        i1 += t1
        t0 = t0 * q / (k * k)
        i0 += t0
        hk += 1.0 / k
        s0 += t0 * hk
        pk = pk1
        pk1 = pk1 + 1.0 / (k + 1)
    ps += (pk + pk1) * tp
    lg = np.log(0.5 * x)
    i1 = 0.5 * x * i1
    k0 = -(lg + EULER_GAMMA) * i0 + s0
    k1 = lg * i1 + 1.0 / x - 0.25 * x * ps
    return k0, k1


def _k0_k1_quadrature(x):
    arg = 1.0 + _HG_NODES_SQ[None, :] / (2.0 * x[:, None])
    i0 = np.power(arg, -0.5) @ _HG_WEIGHTS
    i1 = (_HG_NODES_SQ[None, :] * np.sqrt(arg)) @ _HG_WEIGHTS
    pref = np.sqrt(np.pi / (2.0 * x)) * np.exp(-x)
    rpi = 1.0 / math.sqrt(math.pi)
    return pref * i0 * rpi, pref * i1 * 2.0 * rpi


def _k0_k1_arrays(x):
    """Vectorized (K0, K1) on a positive float array; no domain checks."""
    x = np.asarray(x, dtype=float)
    k0 = np.empty_like(x)
    k1 = np.empty_like(x)
    small = x <= 2.0
    if small.any():
        a, b = _k0_k1_series(x[small])
        k0[small] = a
        k1[small] = b
    big = ~small
    if big.any():
        a, b = _k0_k1_quadrature(x[big])
        k0[big] = a
        k1[big] = b
    return k0, k1


def bessel_k0(x):
    """Modified Bessel function of the second kind, order zero."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"bessel_k0 requires x > 0, got {x}")
    return float(_k0_k1_arrays(np.array([x]))[0][0])


def bessel_k1(x):
    """Modified Bessel function of the second kind, order one."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"bessel_k1 requires x > 0, got {x}")
    return float(_k0_k1_arrays(np.array([x]))[1][0])
