"""Analytic equations of state of the dilute two-dimensional Bose gas.

Everything is expressed in dimensionless form: the gas parameter enters
only through L = |ln na^2|, energies per particle as
eps = (E/N) m / (2 pi hbar^2 n) and chemical potentials as
mu_tilde = mu m / (4 pi hbar^2 n).  Mean field is then eps = mu_tilde = 1/L.
Working in the log domain keeps every expression finite down to
na^2 = 10^-1000 and beyond.
"""

import csv
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources

from .errors import (
    ConvergenceError,
    DilutenessWarning,
    DomainError,
    InsufficientDataError,
    NoSolutionError,
    OutOfRegimeError,
    ValidityError,
)
from .specfun import EULER_GAMMA, gamma_upper_zero_scaled

LN_PI = math.log(math.pi)
LN_4PI = math.log(4.0 * math.pi)

# Printed conversion constant between the dipolar interaction range and the
# s-wave scattering length, a = e^{2 gamma} r0 rounded to six digits; the
# bundled reference densities are converted with exactly this value.
DIPOLE_A_OVER_R0 = 3.17222

_MAX_L = 2.5e3


@dataclass(frozen=True)
class GasParameter:
    """Log-domain gas parameter: log_na2 = ln(n a^2) < 0."""

    log_na2: float

    def __post_init__(self):
        if not (self.log_na2 < 0.0):
            raise DomainError(
                f"gas parameter requires ln(na^2) < 0, got {self.log_na2}"
            )
        if not (-self.log_na2 <= _MAX_L):
            raise DomainError(f"|ln na^2| beyond supported range: {-self.log_na2:g}")

    @property
    def L(self):
        """|ln na^2|, exact (no re-exponentiation)."""
        return -self.log_na2


def from_density_dipoles(n_r02):
    """Gas parameter from a dipolar density n*r0^2 via a = 3.17222 r0."""
    n_r02 = float(n_r02)
    if not n_r02 > 0.0:
        raise DomainError(f"density must be positive, got {n_r02}")
    if n_r02 >= 0.1:
        warnings.warn(
            f"n r0^2 = {n_r02:g} is outside the dilute regime of the conversion",
            DilutenessWarning,
            stacklevel=2,
        )
    return GasParameter(math.log(n_r02) + 2.0 * math.log(DIPOLE_A_OVER_R0))


@dataclass(frozen=True)
class UniversalConstants:
    """Constants of the universal beyond-mean-field expansion."""

    c1_mu: float = -LN_PI - 2.0 * EULER_GAMMA - 1.0
    c2_mu: float = -0.3
    c1_e: float = None
    c2_e: float = None
    euler_gamma: float = EULER_GAMMA
    c2_mu_err: float = 0.1

    def __post_init__(self):
        if self.c1_e is None:
            object.__setattr__(self, "c1_e", self.c1_mu + 0.5)
        if self.c2_e is None:
            object.__setattr__(self, "c2_e", self.c2_mu + 0.25)
        if abs(self.c1_e - self.c1_mu - 0.5) > 1e-12:
            raise DomainError("c1_e must equal c1_mu + 1/2")
        if abs(self.c2_e - self.c2_mu - 0.25) > 1e-12:
            raise DomainError("c2_e must equal c2_mu + 1/4")


UNIVERSAL = UniversalConstants()


# ---------------------------------------------------------------------------
# Mean field
# ---------------------------------------------------------------------------

def energy_mf_schick(g):
    """Leading mean-field energy eps = 1/L."""
    return 1.0 / g.L


def energy_mf_integrated(g):
    """Mean-field energy from integrating the chemical potential.

    eps = 2 e^{2L} Gamma(0, 2L), evaluated through the scaled gamma so it
    stays finite for L up to 2.5e3.
    """
    if not g.L > 0.5:
        raise OutOfRegimeError(f"integrated mean field needs L > 0.5, got {g.L:g}")
    return 2.0 * gamma_upper_zero_scaled(2.0 * g.L)


def energy_mf_expansion(g):
    """Dilute-limit expansion of the integrated mean-field energy."""
    if not g.L > 1.0:
        raise OutOfRegimeError(f"mean-field expansion needs L > 1, got {g.L:g}")
    return 1.0 / (g.L + 0.5 - 0.25 / g.L)


# ---------------------------------------------------------------------------
# Catalogue of beyond-mean-field corrections D(L); predicted eps = 1/(L + D)
# ---------------------------------------------------------------------------

def _popov_like(L):
    return math.log(L) - LN_4PI - 0.5


def _lozovik(L):
    return math.log(L) - LN_4PI + 0.5


def _hines(L):
    if not L + LN_PI > 1.0:
        raise OutOfRegimeError(f"hines correction needs L + ln pi > 1, got L = {L:g}")
    return math.log(L + LN_PI) - math.log(2.0 * math.pi**3) - 2.0 * EULER_GAMMA + 1.5


def _kolomeisky(L):
    if not L > LN_4PI:
        raise OutOfRegimeError(f"kolomeisky correction needs L > ln 4pi, got {L:g}")
    return math.log(L - LN_4PI) - LN_4PI


def _ovchinnikov(L):
    return math.log(L)


def _cherny_mora_pricoupenko(L):
    return math.log(L) - LN_PI - 2.0 * EULER_GAMMA - 0.5


def _pilati_fit(L):
    return 0.86 * math.log(L) - 2.26


def _schick(L):
    return 0.0


@dataclass(frozen=True)
class TheorySpec:
    """One catalogued beyond-mean-field correction with validity window.

    correction maps L to the denominator shift D(L); validity is an open
    interval in ln L, None meaning unbounded on that side.
    """

    name: str
    correction: callable
    validity: tuple = (None, None)


THEORIES = {
    "schick": TheorySpec("schick", _schick),
    "popov": TheorySpec("popov", _popov_like),
    "lozovik": TheorySpec("lozovik", _lozovik),
    "hines": TheorySpec("hines", _hines),
    "fisher": TheorySpec("fisher", _popov_like),
    "kolomeisky": TheorySpec("kolomeisky", _kolomeisky),
    "ovchinnikov": TheorySpec("ovchinnikov", _ovchinnikov),
    "cherny_mora_pricoupenko": TheorySpec(
        "cherny_mora_pricoupenko", _cherny_mora_pricoupenko
    ),
    "andersen": TheorySpec("andersen", _popov_like),
    "pilati_fit": TheorySpec("pilati_fit", _pilati_fit, validity=(1.5, 2.8)),
}


def theory_correction(t, g):
    """Denominator correction D(L) of one catalogued theory."""
    ln_l = math.log(g.L)
    lo, hi = t.validity
    if (lo is not None and ln_l <= lo) or (hi is not None and ln_l >= hi):
        raise ValidityError(t.name, ln_l, t.validity)
    return t.correction(g.L)


def theory_energy(t, g):
    """Predicted eps = 1/(L + D) for one catalogued theory."""
    return 1.0 / (g.L + theory_correction(t, g))


def fig1_ordinate(eps, g):
    """Beyond-mean-field residual 1/eps - L (plotted against ln L)."""
    if not eps > 0.0:
        raise DomainError(f"eps must be positive, got {eps}")
    return 1.0 / eps - g.L


# ---------------------------------------------------------------------------
# In-medium amplitude expansion and the cubic-coefficient fit
# ---------------------------------------------------------------------------

def cherny_u(g, tol=1e-13, maxit=200):
    """In-medium scattering amplitude from 1/u + ln u = L - ln pi - 2 gamma.

    The left side attains its minimum 1 at u = 1, so a solution in (0, 1]
    exists iff the right side is >= 1; it is found by safeguarded Newton
    iteration on that bracket and the residual is verified to 1e-12.
    """
    rhs = g.L - LN_PI - 2.0 * EULER_GAMMA
    if rhs < 1.0:
        raise NoSolutionError(
            f"1/u + ln u = {rhs:g} has no solution (density too high)"
        )
    lo, hi = 0.0, 1.0  # phi(lo+) = +inf, phi(1) = 1 - rhs <= 0
    u = min(1.0, 1.0 / rhs)
    for _ in range(maxit):
        f = 1.0 / u + math.log(u) - rhs
        if f == 0.0:
            break
        if f > 0.0:
            lo = u
        else:
            hi = u
        df = (u - 1.0) / (u * u)
        if df != 0.0:
            un = u - f / df
        else:
            un = 0.5 * (lo + hi)
        if not lo < un < hi:
            un = 0.5 * (lo + hi)
        if abs(un - u) <= 1e-16 * un:
            u = un
            break
        u = un
    resid = abs(1.0 / u + math.log(u) - rhs)
    if resid > 1e-12:
        raise ConvergenceError(f"cherny_u residual {resid:g} above 1e-12")
    return u


def cherny_energy(u, c3):
    """Energy from the amplitude series eps = u + u^2/2 - c3 u^3."""
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"amplitude must be in [0, 1], got {u}")
    return u + 0.5 * u * u - c3 * u**3


@dataclass(frozen=True)
class FitResult:
    c3: float
    c3_err: float
    chi2_per_dof: float
    rows_used: int


def fit_c3(rows, max_na2=1e-6, min_na2=0.0):
    """Weighted least-squares fit of the cubic coefficient.

    Minimizes sum_i [(eps_i - (u_i + u_i^2/2 - c3 u_i^3)) / sigma_i]^2,
    which is linear in c3 and solved in closed form; the one-sigma error
    comes from the chi^2 curvature.  Rows are selected by their gas
    parameter na^2 within [min_na2, max_na2].
    """
    ys, xs, ws = [], [], []
    for row in rows:
        na2 = row.n_r02 * DIPOLE_A_OVER_R0**2
        if not (min_na2 <= na2 <= max_na2):
            continue
        g = from_density_dipoles(row.n_r02)
        eps, sigma = reference_epsilon(row)
        u = cherny_u(g)
        ys.append(u + 0.5 * u * u - eps)  # model: y = c3 * u^3
        xs.append(u**3)
        ws.append(1.0 / sigma**2)
    n = len(ys)
    if n < 3:
        raise InsufficientDataError(
            f"need at least 3 rows inside the density window, found {n}"
        )
    sxx = sum(w * x * x for w, x in zip(ws, xs))
    sxy = sum(w * x * y for w, x, y in zip(ws, xs, ys))
    c3 = sxy / sxx
    c3_err = 1.0 / math.sqrt(sxx)
    chi2 = sum(w * (y - c3 * x) ** 2 for w, x, y in zip(ws, xs, ys))
    return FitResult(c3=c3, c3_err=c3_err, chi2_per_dof=chi2 / (n - 1), rows_used=n)


# ---------------------------------------------------------------------------
# Self-consistent and universal chemical potential / energy
# ---------------------------------------------------------------------------

def popov_solve(g, c1_popov, tol=1e-12, maxit=200):
    """Self-consistent mu_tilde: root y of y (B - ln y) = 1.

    B = L + ln C1 - ln 4pi - 1 is the constant bracket; the root is found
    by fixed-point iteration y <- 1/(B - ln y).
    """
    if not c1_popov > 0.0:
        raise DomainError(f"C1 must be positive, got {c1_popov}")
    bracket = g.L + math.log(c1_popov) - LN_4PI - 1.0
    if not bracket > 1.0:
        raise OutOfRegimeError(
            f"self-consistent bracket {bracket:g} <= 1; density too high"
        )
    y = 1.0 / bracket
    for _ in range(maxit):
        yn = 1.0 / (bracket - math.log(y))
        if abs(yn * (bracket - math.log(yn)) - 1.0) <= tol:
            return yn
        y = yn
    raise ConvergenceError(f"popov_solve did not reach residual {tol:g}")


def popov_closed_form(g, c1_popov):
    """Iterated closed form mu_tilde = 1/(L + ln L - ln 4pi + ln C1 - 1)."""
    if not c1_popov > 0.0:
        raise DomainError(f"C1 must be positive, got {c1_popov}")
    denom = g.L + math.log(g.L) - LN_4PI + math.log(c1_popov) - 1.0
    if not denom > 0.0:
        raise OutOfRegimeError(f"nonpositive denominator {denom:g}")
    return 1.0 / denom


def universal_mu_correction(g, k=UNIVERSAL):
    """Denominator correction of the universal chemical potential."""
    if not g.L > math.e:
        raise OutOfRegimeError(f"universal expansion needs L > e, got {g.L:g}")
    ln_l = math.log(g.L)
    return ln_l + k.c1_mu + (ln_l + k.c2_mu) / g.L


def universal_energy_correction(g, k=UNIVERSAL):
    """Denominator correction of the universal energy per particle."""
    if not g.L > math.e:
        raise OutOfRegimeError(f"universal expansion needs L > e, got {g.L:g}")
    ln_l = math.log(g.L)
    return ln_l + k.c1_e + (ln_l + k.c2_e) / g.L


def universal_mu(g, k=UNIVERSAL):
    """Best perturbative mu_tilde including the three BMF terms."""
    return 1.0 / (g.L + universal_mu_correction(g, k))


def universal_energy(g, k=UNIVERSAL):
    """Best perturbative eps including the three BMF terms."""
    return 1.0 / (g.L + universal_energy_correction(g, k))


def characteristic_density(m):
    """log10 of the density where the double log exceeds ln 4pi m-fold.

    Returns -(4 pi)^m / ln 10.
    """
    if not m > 0.0:
        raise DomainError(f"m must be positive, got {m}")
    return -((4.0 * math.pi) ** m) / math.log(10.0)


# ---------------------------------------------------------------------------
# Bundled reference dataset
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReferenceRow:
    """One reference energy: density n*r0^2, E/N and its one-sigma error
    in units hbar^2/(m r0^2)."""

    n_r02: float
    e_per_n: float
    err: float

    def __post_init__(self):
        if self.n_r02 <= 0.0 or self.e_per_n <= 0.0 or self.err <= 0.0:
            raise DomainError("reference row fields must be positive")


def load_reference_rows(path=None):
    """Reference rows from a CSV file (bundled dataset by default)."""
    if path is None:
        text = (
            resources.files("bose2d.data")
            .joinpath("table1_dipoles.csv")
            .read_text(encoding="utf-8")
        )
        lines = text.splitlines()
    else:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    rows = []
    reader = csv.DictReader(
        line for line in lines if line.strip() and not line.startswith("#")
    )
    if reader.fieldnames is None or set(reader.fieldnames) != {
        "n_r02",
        "e_per_n",
        "err",
    }:
        raise InsufficientDataError(
            "reference data must have columns n_r02,e_per_n,err"
        )
    for rec in reader:
        rows.append(
            ReferenceRow(
                n_r02=float(rec["n_r02"]),
                e_per_n=float(rec["e_per_n"]),
                err=float(rec["err"]),
            )
        )
    if not rows:
        raise InsufficientDataError("reference data file contains no rows")
    return rows


def reference_epsilon(row):
    """Dimensionless (eps, sigma_eps) of a reference row.

    eps = (E/N) / (2 pi n) in units hbar^2/m = 1 with lengths in r0.
    """
    scale = 2.0 * math.pi * row.n_r02
    return row.e_per_n / scale, row.err / scale
