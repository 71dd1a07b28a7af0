"""Interaction models and the pair-product guiding function.

Units: hbar^2/m = 1, lengths measured in the interaction range (r0 for
dipoles, the core diameter for hard disks), energies in hbar^2/(m range^2).
The dipolar pair potential is then V(r) = 1/r^3 and its zero-energy
two-body solution is K0(2/sqrt(r)); the hard-disk solution is ln(r).

The guiding function is a pair product Psi = prod f2(r_ij) with minimum
image distances.  f2 equals the two-body solution up to a match radius and
crosses over to a symmetric tail exp(-c1 s1(r) - c2 s2(r)) with
s_k(r) = r^-k + (box - r)^-k, whose coefficients are fixed by continuity
of value, slope and curvature at the match radius.  The symmetric form has
zero slope at box/2 by construction; beyond box/2 the pair function is
constant and the potential is cut off (dipoles get an integrated tail
correction).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import DomainError, NumericError
from ..specfun import EULER_GAMMA, _k0_k1_arrays
from . import kernels


@dataclass(frozen=True)
class PotentialModel:
    """Pair interaction: dipolar V = range/r^3 or hard disks of diameter range."""

    kind: str
    range: float = 1.0

    def __post_init__(self):
        if self.kind not in ("dipolar", "hard_disk"):
            raise DomainError(f"unknown potential kind {self.kind!r}")
        if not self.range > 0.0:
            raise DomainError(f"interaction range must be positive, got {self.range}")

    @property
    def scattering_length(self):
        if self.kind == "dipolar":
            return math.exp(2.0 * EULER_GAMMA) * self.range
        return self.range


@dataclass(frozen=True)
class GuidingParams:
    """Pair-function parameters: match radius plus the symmetric-tail
    coefficients (c1, c2, log_c) fixed by continuity; u_cut is the constant
    log value beyond box/2."""

    box: float
    match_radius: float
    c1: float
    c2: float
    log_c: float
    u_cut: float


class PairModel:
    """Vectorized evaluation of the pair function, drift and local energy."""

    def __init__(self, kind, r0, box, match_radius=None):
        if match_radius is None:
            match_radius = 0.25 * box
        if not 0.0 < match_radius < 0.5 * box:
            raise DomainError(
                f"match radius {match_radius:g} must lie in (0, box/2)"
            )
        if kind == "hard_disk" and match_radius <= r0:
            raise DomainError("match radius must exceed the hard-disk core")
        self.kind = kind
        self.r0 = r0
        self.box = box
        self.rcut = 0.5 * box
        self.rm = match_radius

        u_m, up_m, ulap_m = self._inner_terms(np.array([match_radius]))
        u_m, up_m = float(u_m[0]), float(up_m[0])
        u2_m = float(ulap_m[0]) - up_m / match_radius  # u'' at the joint

        R, L = match_radius, box
        a1 = 1.0 / R**2 - 1.0 / (L - R) ** 2
        a2 = 2.0 * (1.0 / R**3 - 1.0 / (L - R) ** 3)
        b1 = -2.0 * (1.0 / R**3 + 1.0 / (L - R) ** 3)
        b2 = -6.0 * (1.0 / R**4 + 1.0 / (L - R) ** 4)
        det = a1 * b2 - a2 * b1
        if det == 0.0:
            raise NumericError("degenerate tail-matching system")
        c1 = (up_m * b2 - u2_m * a2) / det
        c2 = (a1 * u2_m - b1 * up_m) / det
        s1, s2 = 1.0 / R + 1.0 / (L - R), 1.0 / R**2 + 1.0 / (L - R) ** 2
        log_c = u_m + c1 * s1 + c2 * s2
        u_cut = log_c - c1 * (2.0 / self.rcut) - c2 * (2.0 / self.rcut**2)
        self.params = GuidingParams(
            box=box, match_radius=match_radius, c1=c1, c2=c2,
            log_c=log_c, u_cut=u_cut,
        )
        # dipolar potential integrated beyond the cutoff, per particle:
        # (n/2) int_rcut^inf (r0/r^3) 2 pi r dr = pi n r0 / rcut
        self.tail_per_particle = 0.0

    def with_density(self, density):
        """Set the density-dependent tail correction; returns self."""
        if self.kind == "dipolar":
            self.tail_per_particle = math.pi * density * self.r0 / self.rcut
        return self

    # -- inner branch: exact zero-energy two-body solution ----------------

    def _inner_terms(self, r):
        """(u, u', u'' + u'/r) of ln f2 on the inner branch."""
        if self.kind == "dipolar":
            z = 2.0 * np.sqrt(self.r0 / r)
            k0, k1 = _k0_k1_arrays(z)
            u = np.log(k0)
            up = (k1 / k0) * z / (2.0 * r)
            ulap = self.r0 / r**3 - up * up  # zero-energy relation
            return u, up, ulap
        w = np.log(r / self.r0)
        up = 1.0 / (r * w)
        return np.log(w), up, -up * up

    # -- full pair terms on a flat distance array --------------------------

    def pair_terms(self, r):
        """(u, u', u'' + u'/r, V, overlap) on a flat distance array."""
        r = np.asarray(r, dtype=float)
        u = np.empty_like(r)
        up = np.zeros_like(r)
        ulap = np.zeros_like(r)
        v = np.zeros_like(r)
        overlap = np.zeros(r.shape, dtype=bool)
        if self.kind == "hard_disk":
            overlap = r <= self.r0
        inner = (~overlap) & (r <= self.rm)
        outer = (~overlap) & (r > self.rm) & (r <= self.rcut)
        beyond = r > self.rcut
        if inner.any():
            ri = r[inner]
            ui, upi, ulapi = self._inner_terms(ri)
            u[inner] = ui
            up[inner] = upi
            ulap[inner] = ulapi
            if self.kind == "dipolar":
                v[inner] = self.r0 / ri**3
        if outer.any():
            ro = r[outer]
            L, c1, c2 = self.box, self.params.c1, self.params.c2
            inv, invl = 1.0 / ro, 1.0 / (L - ro)
            u[outer] = self.params.log_c - c1 * (inv + invl) - c2 * (inv**2 + invl**2)
            upo = c1 * (inv**2 - invl**2) + 2.0 * c2 * (inv**3 - invl**3)
            up[outer] = upo
            u2 = -2.0 * c1 * (inv**3 + invl**3) - 6.0 * c2 * (inv**4 + invl**4)
            ulap[outer] = u2 + upo * inv
            if self.kind == "dipolar":
                v[outer] = self.r0 / ro**3
        if beyond.any():
            u[beyond] = self.params.u_cut
        u[overlap] = -np.inf
        return u, up, ulap, v, overlap

    # -- many-body evaluation ----------------------------------------------

    def attach(self, n_particles, density):
        """Prepare pair indices and the scatter matrix for N particles."""
        self.n = n_particles
        self.iu, self.ju = np.triu_indices(n_particles, 1)
        npairs = len(self.iu)
        scatter = np.zeros((n_particles, npairs))
        scatter[self.iu, np.arange(npairs)] = 1.0
        scatter[self.ju, np.arange(npairs)] = -1.0
        self._scatter = scatter
        self.with_density(density)
        return self

    def pair_distances(self, pos):
        """Minimum-image displacements and distances, pos shape (W, N, 2)."""
        d = pos[:, self.iu, :] - pos[:, self.ju, :]
        d -= self.box * np.round(d / self.box)
        r = np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)
        return d, r

    use_kernel = kernels.AVAILABLE

    def evaluate(self, pos):
        """log Psi, drift = grad_i ln Psi, and total local energy.

        pos has shape (W, N, 2); returns (W,), (W, N, 2), (W,) plus a
        boolean overlap flag per walker.  Overlapping hard-disk walkers get
        log Psi = -inf and an infinite-energy sentinel.  Dispatches to the
        compiled kernel when numba is available; evaluate_reference is the
        pure-numpy implementation of the same quantities.
        """
        if self.use_kernel:
            return kernels.evaluate_walkers(
                np.ascontiguousarray(pos),
                0 if self.kind == "dipolar" else 1,
                self.r0,
                self.box,
                self.rm,
                self.rcut,
                self.params.c1,
                self.params.c2,
                self.params.log_c,
                self.params.u_cut,
                self.n * self.tail_per_particle,
                self.iu,
                self.ju,
            )
        return self.evaluate_reference(pos)

    def evaluate_reference(self, pos):
        d, r = self.pair_distances(pos)
        u, up, ulap, v, overlap = self.pair_terms(r.ravel())
        shape = r.shape
        u = u.reshape(shape)
        up = up.reshape(shape)
        ulap = ulap.reshape(shape)
        v = v.reshape(shape)
        bad = overlap.reshape(shape).any(axis=1)
        log_psi = u.sum(axis=1)
        pair_vec = np.where(bad[:, None], 0.0, up / np.where(r > 0, r, 1.0))[
            :, :, None
        ] * d
        drift = np.matmul(self._scatter, pair_vec)
        grad_sq = np.einsum("wnc,wnc->w", drift, drift)
        eloc = (
            -0.5 * (2.0 * ulap.sum(axis=1) + grad_sq)
            + v.sum(axis=1)
            + self.n * self.tail_per_particle
        )
        if bad.any():
            log_psi = np.where(bad, -np.inf, log_psi)
            eloc = np.where(bad, np.inf, eloc)
            drift = np.where(bad[:, None, None], 0.0, drift)
        return log_psi, drift, eloc, bad

    def potential_with_tail(self, pos):
        """Cut potential plus tail, per particle, for each configuration."""
        _, r = self.pair_distances(pos)
        *_, v, overlap = self.pair_terms(r.ravel())
        v = v.reshape(r.shape).sum(axis=1)
        if overlap.any():
            v = np.where(overlap.reshape(r.shape).any(axis=1), np.inf, v)
        return v / self.n + self.tail_per_particle

    def min_pair_distance(self, pos):
        return float(self.pair_distances(pos)[1].min())


@dataclass
class Walker:
    """One DMC ensemble member: positions folded into [0, box) plus cached
    guiding-function data."""

    positions: np.ndarray
    log_psi: float = None
    drift: np.ndarray = None
    lineage: int = 0


def pair_guiding(p, g, r):
    """Pair function f2(r) for potential p and guiding parameters g.

    Returns zero inside a hard-disk core (wave-function node).
    """
    r = float(r)
    if not r > 0.0:
        raise DomainError(f"pair distance must be positive, got {r}")
    model = PairModel(p.kind, p.range, g.box, g.match_radius)
    u = model.pair_terms(np.array([r]))[0][0]
    return float(np.exp(u))


def local_energy(p, g, w):
    """Local energy of one walker (total, units hbar^2/(m range^2))."""
    pos = np.asarray(w.positions, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise DomainError("walker positions must have shape (N, 2)")
    n = pos.shape[0]
    model = PairModel(p.kind, p.range, g.box, g.match_radius).attach(
        n, n / g.box**2
    )
    log_psi, drift, eloc, bad = model.evaluate(pos[None])
    w.log_psi = float(log_psi[0])
    w.drift = drift[0]
    return float(eloc[0])


def scattering_length_check(p):
    """Scattering length extracted from the zero-energy radial equation.

    For dipoles the equation f'' + f'/r = (range/r^3) f is integrated
    outward in t = ln r from a short-distance start toward the ln(r/a)
    asymptote, and a is read off from a - r exp(-f/f').  Hard disks have
    the exact solution ln(r/range), so the core diameter is returned.
    """
    if p.kind == "hard_disk":
        return p.range
    r0 = p.range
    t0 = math.log(0.05 * r0)
    t1 = math.log(r0) + 20.0
    rmin = math.exp(t0)
    # start on the regular short-distance (WKB) solution
    y0 = [1.0, math.sqrt(r0 / rmin) + 0.75]
    sol = solve_ivp(
        lambda t, y: [y[1], r0 * math.exp(-t) * y[0]],
        (t0, t1),
        y0,
        method="DOP853",
        rtol=1e-12,
        atol=1e-300,
    )
    if not sol.success:
        raise NumericError(f"zero-energy integration failed: {sol.message}")
    f, fp = sol.y[0, -1], sol.y[1, -1]
    if fp <= 0.0:
        raise NumericError("zero-energy solution lost monotonicity")
    return math.exp(t1 - f / fp)


def lattice_positions(n, box):
    """Square-lattice configuration used to seed ensembles."""
    m = int(math.ceil(math.sqrt(n)))
    xs = (np.arange(m) + 0.5) * box / m
    gx, gy = np.meshgrid(xs, xs)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)[:n].copy()
