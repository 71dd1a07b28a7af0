"""Local density approximation for a harmonically trapped 2D gas.

Units hbar = m = 1, so the oscillator length is a_ho = omega^(-1/2).
The density profile solves mu_local(n(r)) = mu0 - omega^2 r^2 / 2 with the
central chemical potential fixed by particle-number normalization, and the
lowest breathing-mode frequency comes from the compressional sum rule

    Omega^2 = -2 <r^2> / (d<r^2> / d(omega^2))   at fixed N,

which is exact (Omega = 2 omega) for any scale-invariant equation of
state; that limit anchors the implementation.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import eos
from .errors import DomainError, NumericError, OutOfRegimeError

EOS_CHOICES = ("mf_linear", "mf_schick", "universal", "ideal")

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_EDGE_PANELS = 22


@dataclass(frozen=True)
class TrapConfig:
    """Trapped-gas inputs; linear_coupling is only used by mf_linear."""

    n_particles: float
    omega: float
    eos_choice: str
    scattering_length: float = 1e-3
    linear_coupling: float = 0.1

    def __post_init__(self):
        if self.eos_choice not in EOS_CHOICES:
            raise DomainError(
                f"unknown eos_choice {self.eos_choice!r}; pick from {EOS_CHOICES}"
            )
        if self.n_particles <= 0 or self.omega <= 0:
            raise DomainError("n_particles and omega must be positive")
        if self.scattering_length <= 0:
            raise DomainError("scattering_length must be positive")
        if self.eos_choice == "mf_linear" and not self.linear_coupling > 0:
            raise DomainError("mf_linear needs a positive linear_coupling")


@dataclass
class LdaProfile:
    """Radial density profile with its quadrature nodes.

    grid/density include the cloud edge as the final point (density zero
    there); _v_nodes/_v_weights are the interior quadrature rule in v = r^2
    used for all moments.
    """

    mu0: float
    grid: np.ndarray
    density: np.ndarray
    edge_radius: float
    _v_nodes: np.ndarray = None
    _v_weights: np.ndarray = None
    _n_at_nodes: np.ndarray = None


def _v_quadrature(v_edge):
    """Composite Gauss-Legendre nodes in v = r^2, refined toward the edge."""
    bounds = v_edge * (1.0 - np.geomspace(1.0, 1e-7, _EDGE_PANELS))
    bounds = np.concatenate([bounds, [v_edge]])
    nodes = []
    weights = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        nodes.append(0.5 * (a + b) + 0.5 * (b - a) * _GL_NODES)
        weights.append(0.5 * (b - a) * _GL_WEIGHTS)
    return np.concatenate(nodes), np.concatenate(weights)


def _mu_model(t):
    """(vectorized mu(n), density cap) for the configured equation of state."""
    a2 = t.scattering_length**2
    if t.eos_choice == "mf_linear":
        g = t.linear_coupling
        return (lambda n: g * n), None
    if t.eos_choice == "mf_schick":
        n_cap = math.exp(-1.02) / a2

        def mu(n):
            return 4.0 * math.pi * n / (-np.log(n * a2))

        return mu, n_cap
    if t.eos_choice == "universal":
        k = eos.UNIVERSAL
        n_cap = math.exp(-(math.e + 0.02)) / a2

        def mu(n):
            big_l = -np.log(n * a2)
            ln_l = np.log(big_l)
            denom = big_l + ln_l + k.c1_mu + (ln_l + k.c2_mu) / big_l
            return 4.0 * math.pi * n / denom

        return mu, n_cap
    raise DomainError(f"no bulk EOS for {t.eos_choice!r}")


def _invert_mu(mu_fn, targets, n_cap, iters=80):
    """Solve mu(n) = target for monotone mu on (0, n_cap], vectorized."""
    lo = np.zeros_like(targets)
    hi = np.full_like(targets, n_cap)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = mu_fn(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _ideal_profile(t):
    """Ground-state cloud n(r) = (N omega / pi) exp(-omega r^2)."""
    v_edge = 74.0 / t.omega
    v, w = _v_quadrature(v_edge)
    n_at = (t.n_particles * t.omega / math.pi) * np.exp(-t.omega * v)
    grid = np.sqrt(np.concatenate([v, [v_edge]]))
    dens = np.concatenate([n_at, [0.0]])
    return LdaProfile(
        mu0=t.omega, grid=grid, density=dens,
        edge_radius=math.sqrt(v_edge),
        _v_nodes=v, _v_weights=w, _n_at_nodes=n_at,
    )


def _profile_at_mu0(t, mu_fn, n_cap, mu0):
    v_edge = 2.0 * mu0 / t.omega**2
    v, w = _v_quadrature(v_edge)
    targets = mu0 - 0.5 * t.omega**2 * v
    if n_cap is None:
        n_at = targets / t.linear_coupling
    else:
        n_at = _invert_mu(mu_fn, targets, n_cap)
    return v, w, n_at


def _norm(w, n_at):
    # 2 pi int n r dr = pi int n dv
    return math.pi * float(np.dot(w, n_at))


def lda_profile(t):
    """Density profile normalized to N within 1e-8 relative.

    The central chemical potential is the root of the monotone map
    mu0 -> integrated particle number minus N; a capped EOS that cannot
    hold N particles raises OutOfRegimeError.
    """
    if t.eos_choice == "ideal":
        return _ideal_profile(t)
    mu_fn, n_cap = _mu_model(t)
    if n_cap is None:
        mu_hi = 2.0 * t.omega * math.sqrt(t.n_particles * t.linear_coupling / math.pi)
    else:
        mu_hi = float(mu_fn(np.array([n_cap * (1.0 - 1e-12)]))[0])
        v, w, n_at = _profile_at_mu0(t, mu_fn, n_cap, mu_hi)
        if _norm(w, n_at) < t.n_particles:
            raise OutOfRegimeError(
                "normalization needs central densities beyond the EOS "
                "validity domain; reduce N or the interaction"
            )

    def norm_residual(mu0):
        _, w, n_at = _profile_at_mu0(t, mu_fn, n_cap, mu0)
        return _norm(w, n_at) - t.n_particles

    mu0 = brentq(norm_residual, mu_hi * 1e-14, mu_hi, rtol=8.9e-16, maxiter=300)
    v, w, n_at = _profile_at_mu0(t, mu_fn, n_cap, mu0)
    norm = _norm(w, n_at)
    if abs(norm - t.n_particles) > 1e-8 * t.n_particles:
        raise NumericError("normalization solve failed")
    v_edge = 2.0 * mu0 / t.omega**2
    grid = np.sqrt(np.concatenate([v, [v_edge]]))
    dens = np.concatenate([n_at, [0.0]])
    return LdaProfile(
        mu0=mu0, grid=grid, density=dens,
        edge_radius=math.sqrt(v_edge),
        _v_nodes=v, _v_weights=w, _n_at_nodes=n_at,
    )


def profile_norm(p):
    """Integrated particle number 2 pi int n(r) r dr."""
    return _norm(p._v_weights, p._n_at_nodes)


def mean_square_radius(p):
    """<r^2> = 2 pi int n(r) r^3 dr / N on the profile's quadrature rule."""
    num = math.pi * float(np.dot(p._v_weights, p._n_at_nodes * p._v_nodes))
    return num / profile_norm(p)


def _msr_at_omega(t, omega):
    cfg = TrapConfig(
        n_particles=t.n_particles,
        omega=omega,
        eos_choice=t.eos_choice,
        scattering_length=t.scattering_length,
        linear_coupling=t.linear_coupling,
    )
    return mean_square_radius(lda_profile(cfg))


def breathing_frequency(t, rel_step=1e-4):
    """Squared breathing frequency over omega^2 from the sum rule.

    The d<r^2>/d(omega^2) derivative is a central difference with relative
    step rel_step; a second evaluation at twice the step must agree within
    1e-3 relative or NumericError is raised.
    """
    w2 = t.omega**2
    r2_0 = _msr_at_omega(t, t.omega)
    results = []
    for h in (rel_step, 2.0 * rel_step):
        r2_p = _msr_at_omega(t, math.sqrt(w2 * (1.0 + h)))
        r2_m = _msr_at_omega(t, math.sqrt(w2 * (1.0 - h)))
        deriv = (r2_p - r2_m) / (2.0 * h * w2)
        if deriv >= 0.0:
            raise NumericError("d<r^2>/d(omega^2) must be negative")
        results.append(-2.0 * r2_0 / deriv / w2)
    if abs(results[0] / results[1] - 1.0) > 1e-3:
        raise NumericError(
            f"derivative steps disagree: {results[0]:.6g} vs {results[1]:.6g}"
        )
    return results[0]


def effective_scattering_length(a_3d, a_ho_z, prefactor=1.0):
    """Quasi-2D scattering length from tight transverse confinement.

    a_2d = prefactor * a_ho_z * exp(-sqrt(pi/2) a_ho_z / a_3d); the
    prefactor is an explicit argument because only the exponential factor
    is universal.
    """
    if a_3d <= 0.0 or a_ho_z <= 0.0 or prefactor <= 0.0:
        raise DomainError("lengths and prefactor must be positive")
    return prefactor * a_ho_z * math.exp(-math.sqrt(math.pi / 2.0) * a_ho_z / a_3d)


def lda_parameter(t):
    """sqrt(N) r0^2 / a_ho^2 with r0 = a / 3.17222 and a_ho = omega^(-1/2)."""
    r0 = t.scattering_length / eos.DIPOLE_A_OVER_R0
    return math.sqrt(t.n_particles) * r0**2 * t.omega


def config_for_lda_parameter(p, eos_choice, n_particles=1000.0, omega=1.0):
    """Trap configuration realizing a given LDA parameter at fixed N."""
    if p <= 0.0:
        raise DomainError("lda parameter must be positive")
    r0_sq = p / (math.sqrt(n_particles) * omega)
    return TrapConfig(
        n_particles=n_particles,
        omega=omega,
        eos_choice=eos_choice,
        scattering_length=eos.DIPOLE_A_OVER_R0 * math.sqrt(r0_sq),
    )
