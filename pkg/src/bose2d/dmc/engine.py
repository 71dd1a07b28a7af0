"""Variational and diffusion Monte Carlo drivers.

Random numbers come from counter-based Philox streams keyed by
(seed, walker lineage id) with the step index in the counter word, so a
walker's moves are a pure function of (config, seed) and are unaffected by
how walkers are scheduled across workers.  All ensemble reductions run in
lineage order, which makes energy traces bit-identical for any worker
count.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import (
    DomainError,
    InsufficientDataError,
    PopulationControlError,
    TimestepWarning,
    TuningWarning,
)
from .model import PairModel, lattice_positions

# second counter word separates random streams
_STREAM_MAIN = 0   # VMC sampling
_STREAM_PRE = 1    # DMC pre-equilibration
_STREAM_SEED = 2   # ensemble seeding
_STREAM_DMC = 3    # DMC propagation


@dataclass(frozen=True)
class DmcConfig:
    """Run parameters; lengths in units of the interaction range."""

    n_particles: int
    density: float
    timestep: float
    target_walkers: int = 120
    equil_blocks: int = 10
    measure_blocks: int = 40
    steps_per_block: int = 100
    seed: int = 1
    match_radius: float = None  # default box/4
    preequil_steps: int = 300   # Metropolis steps seeding the DMC ensemble

    def __post_init__(self):
        if self.n_particles < 2:
            raise DomainError("need at least two particles")
        if not self.density > 0.0:
            raise DomainError("density must be positive")
        if not self.timestep > 0.0:
            raise DomainError("timestep must be positive")
        for name in ("target_walkers", "equil_blocks", "measure_blocks",
                     "steps_per_block"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be at least 1")

    @property
    def box(self):
        return math.sqrt(self.n_particles / self.density)


@dataclass
class EnergyEstimate:
    """Blocked energy per particle with a one-sigma error."""

    mean: float
    err: float
    tag: str
    acceptance: float = None
    population: float = None
    trace: np.ndarray = None
    final_positions: np.ndarray = None  # for checkpointing / restart


def blocking_error(series):
    """One-sigma error of the mean by repeated pairwise blocking.

    The error estimate grows with blocking level until correlations are
    exhausted; the first level whose successor stays inside its own noise
    band is taken as the plateau, with the running maximum as fallback.
    """
    x = np.asarray(series, dtype=float)
    if x.size < 2:
        return 0.0
    errs = []
    sizes = []
    cur = x
    while cur.size >= 16:
        errs.append(cur.std(ddof=1) / math.sqrt(cur.size))
        sizes.append(cur.size)
        m = cur.size // 2
        cur = 0.5 * (cur[: 2 * m : 2] + cur[1 : 2 * m : 2])
    if not errs:
        return x.std(ddof=1) / math.sqrt(x.size)
    for k in range(len(errs) - 1):
        band = 1.0 / math.sqrt(2.0 * (sizes[k + 1] - 1.0))
        if errs[k + 1] <= errs[k] * (1.0 + band):
            return max(errs[: k + 2])
    return max(errs)


def _walker_rng(seed, lineage, step, stream=_STREAM_MAIN):
    return np.random.Generator(
        np.random.Philox(key=[seed & (2**64 - 1), lineage & (2**64 - 1)],
                         counter=[step, stream, 0, 0])
    )


def _chunk_slices(n, workers):
    workers = max(1, min(workers, n))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _evaluate_chunked(model, pos, workers):
    if workers <= 1 or pos.shape[0] < 2 * workers:
        return model.evaluate(pos)
    slices = _chunk_slices(pos.shape[0], workers)
    with ThreadPoolExecutor(max_workers=len(slices)) as ex:
        parts = list(ex.map(lambda s: model.evaluate(pos[s]), slices))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))


def _seed_ensemble(model, config, nwalk, phase):
    base = lattice_positions(config.n_particles, config.box)
    spacing = 1.0 / math.sqrt(config.density)
    jitter_scale = min(0.05 * spacing, 0.2)
    pos = np.empty((nwalk, config.n_particles, 2))
    for w in range(nwalk):
        rng = _walker_rng(config.seed + phase, w, 0, stream=_STREAM_SEED)
        pos[w] = base + rng.normal(0.0, jitter_scale, size=base.shape)
    pos %= config.box
    return pos


def _metropolis_preequil(model, config, pos, steps, workers):
    """Short |Psi|^2 sampling to wash out the seeding lattice."""
    if steps <= 0:
        return pos
    n = config.n_particles
    scale = 0.09 / math.sqrt(config.density)
    log_psi = _evaluate_chunked(model, pos, workers)[0]
    for step in range(steps):
        eta = np.empty_like(pos)
        uacc = np.empty(pos.shape[0])
        for w in range(pos.shape[0]):
            rng = _walker_rng(config.seed, w, step, stream=_STREAM_PRE)
            eta[w] = rng.normal(0.0, scale, size=(n, 2))
            uacc[w] = rng.random()
        prop = (pos + eta) % model.box
        lp = _evaluate_chunked(model, prop, workers)[0]
        with np.errstate(over="ignore"):
            acc = uacc < np.exp(2.0 * (lp - log_psi))
        pos[acc] = prop[acc]
        log_psi[acc] = lp[acc]
    return pos


def _drift_limited(drift, tau):
    """Smooth per-particle drift limiting; exact as tau -> 0."""
    f2 = np.einsum("wnc,wnc->wn", drift, drift)
    arg = f2 * tau
    scale = np.where(arg > 1e-12, (np.sqrt(1.0 + 2.0 * arg) - 1.0)
                     / np.where(arg > 1e-12, arg, 1.0), 1.0)
    return drift * scale[:, :, None]


def vmc_run(config, potential, workers=1, proposal_scale=None):
    """Metropolis sampling of |Psi|^2; blocked energy per particle.

    The proposal width is tuned toward 50% acceptance during the
    equilibration blocks and then frozen.  The result is a variational
    upper bound on the ground-state energy.
    """
    model = PairModel(
        potential.kind, 1.0, config.box, config.match_radius
    ).attach(config.n_particles, config.density)
    return _vmc_engine(model, config, workers, proposal_scale)


def _vmc_engine(model, config, workers=1, proposal_scale=None):
    n, nwalk = config.n_particles, config.target_walkers
    if proposal_scale is None:
        proposal_scale = 0.09 / math.sqrt(config.density)
    pos = _seed_ensemble(model, config, nwalk, phase=0)
    log_psi, _, eloc, bad = _evaluate_chunked(model, pos, workers)
    if bad.any():
        raise DomainError("initial ensemble contains hard-core overlaps")
    trace = []
    accepted = 0
    attempted = 0
    block_acc = 0
    total_blocks = config.equil_blocks + config.measure_blocks
    for block in range(total_blocks):
        block_acc = 0
        for s in range(config.steps_per_block):
            step = block * config.steps_per_block + s
            eta = np.empty_like(pos)
            uacc = np.empty(pos.shape[0])
            for w in range(pos.shape[0]):
                rng = _walker_rng(config.seed, w, step)
                eta[w] = rng.normal(0.0, proposal_scale, size=(n, 2))
                uacc[w] = rng.random()
            prop = (pos + eta) % model.box
            lp, _, el, _ = _evaluate_chunked(model, prop, workers)
            with np.errstate(over="ignore"):
                ratio = np.exp(2.0 * (lp - log_psi))
            acc = uacc < ratio
            pos[acc] = prop[acc]
            log_psi[acc] = lp[acc]
            eloc[acc] = el[acc]
            block_acc += int(acc.sum())
            if block >= config.equil_blocks:
                accepted += int(acc.sum())
                attempted += pos.shape[0]
                trace.append(eloc.sum() / (pos.shape[0] * n))
        if block < config.equil_blocks:
            rate = block_acc / (config.steps_per_block * pos.shape[0])
            proposal_scale *= min(2.0, max(0.5, rate / 0.5)) ** 0.5
    trace = np.asarray(trace)
    acceptance = accepted / max(attempted, 1)
    if not 0.2 <= acceptance <= 0.9:
        warnings.warn(
            f"VMC acceptance {acceptance:.2f} outside [0.2, 0.9]; "
            "tune the proposal scale",
            TuningWarning,
            stacklevel=2,
        )
    return EnergyEstimate(
        mean=float(trace.mean()),
        err=float(blocking_error(trace)),
        tag="vmc",
        acceptance=acceptance,
        population=float(nwalk),
        trace=trace,
    )


def dmc_run(config, potential, workers=1, check_overlaps=False,
            initial_positions=None):
    """Importance-sampled diffusion Monte Carlo; mixed-estimator energy.

    Each step diffuses walkers with variance timestep per coordinate plus
    a drift-limited guiding force, applies a Metropolis correction on the
    drift-diffusion Green function, branches with stochastic integer
    splitting of exp(-(E_L - E_T) timestep), and steers E_T toward the
    target population with a clipped log feedback.  initial_positions
    (walkers, N, 2), e.g. from a checkpoint, replaces the seeded and
    pre-equilibrated ensemble for restarts.
    """
    model = PairModel(
        potential.kind, 1.0, config.box, config.match_radius
    ).attach(config.n_particles, config.density)
    return _dmc_engine(model, config, workers, check_overlaps,
                       initial_positions)


def _dmc_engine(model, config, workers=1, check_overlaps=False,
                initial_positions=None):
    n, target = config.n_particles, config.target_walkers
    tau = config.timestep
    sqrt_tau = math.sqrt(tau)
    if initial_positions is None:
        pos = _seed_ensemble(model, config, target, phase=1)
        pos = _metropolis_preequil(model, config, pos, config.preequil_steps,
                                   workers)
    else:
        pos = np.array(initial_positions, dtype=float) % model.box
        if pos.ndim != 3 or pos.shape[1:] != (n, 2):
            raise DomainError("initial positions must have shape (walkers, N, 2)")
    lineage = np.arange(pos.shape[0], dtype=np.int64)
    next_lineage = pos.shape[0]
    log_psi, drift, eloc, bad = _evaluate_chunked(model, pos, workers)
    if bad.any():
        raise DomainError("initial ensemble contains hard-core overlaps")
    e_ref = float(eloc.mean())  # total energy reference
    e_trial = e_ref
    trace = []
    accepted = 0
    attempted = 0
    pops = []
    sigma_el = 0.0
    total_steps = (config.equil_blocks + config.measure_blocks) * config.steps_per_block
    measure_from = config.equil_blocks * config.steps_per_block
    for step in range(total_steps):
        nw = pos.shape[0]
        eta = np.empty_like(pos)
        uacc = np.empty(nw)
        uxi = np.empty(nw)
        for w in range(nw):
            rng = _walker_rng(config.seed, int(lineage[w]), step, _STREAM_DMC)
            eta[w] = rng.standard_normal((n, 2)) * sqrt_tau
            uacc[w] = rng.random()
            uxi[w] = rng.random()
        vbar = _drift_limited(drift, tau)
        prop = (pos + tau * vbar + eta) % model.box
        lp, dr_new, el_new, bad = _evaluate_chunked(model, prop, workers)
        vbar_new = _drift_limited(dr_new, tau)
        dfor = prop - pos - tau * vbar
        dfor -= model.box * np.round(dfor / model.box)
        drev = pos - prop - tau * vbar_new
        drev -= model.box * np.round(drev / model.box)
        log_green = (
            np.einsum("wnc,wnc->w", dfor, dfor)
            - np.einsum("wnc,wnc->w", drev, drev)
        ) / (2.0 * tau)
        with np.errstate(over="ignore", invalid="ignore"):
            ratio = np.where(bad, 0.0, np.exp(2.0 * (lp - log_psi) + log_green))
        acc = uacc < ratio
        accepted += int(acc.sum())
        attempted += nw
        pos = np.where(acc[:, None, None], prop, pos)
        log_psi = np.where(acc, lp, log_psi)
        drift = np.where(acc[:, None, None], dr_new, drift)
        e_old = eloc
        eloc = np.where(acc, el_new, eloc)
        # branching on the symmetrized local energy
        e_branch = 0.5 * (e_old + eloc)
        weight = np.exp(-tau * (e_branch - e_trial))
        wsum = float(weight.sum())
        e_mix = float(np.dot(weight, eloc)) / wsum / n
        copies = np.minimum(np.floor(weight + uxi).astype(np.int64), 10)
        keep = np.repeat(np.arange(nw), copies)
        pos = pos[keep]
        log_psi = log_psi[keep]
        drift = drift[keep]
        eloc = eloc[keep]
        new_lineage = lineage[keep].copy()
        extra = np.flatnonzero(np.diff(keep, prepend=-1) == 0)
        if extra.size:
            new_lineage[extra] = next_lineage + np.arange(extra.size)
            next_lineage += extra.size
        lineage = new_lineage
        nw = pos.shape[0]
        pops.append(nw)
        if nw < max(2, target // 10) or nw > 10 * target:
            raise PopulationControlError(
                f"walker population {nw} left [{max(2, target // 10)}, "
                f"{10 * target}] at step {step} (target {target})"
            )
        if check_overlaps and model.kind == "hard_disk":
            dmin = model.min_pair_distance(pos)
            if dmin <= model.r0:
                raise AssertionError(
                    f"hard-disk overlap after branching: min distance {dmin}"
                )
        # population control: clipped log feedback toward the target
        e_ref = 0.95 * e_ref + 0.05 * (e_mix * n)
        feedback = math.log(target / nw) / tau
        cap = 0.1 * max(abs(e_ref), 1.0)
        e_trial = e_ref + min(cap, max(-cap, feedback))
        if step >= measure_from:
            trace.append(e_mix)
            sigma_el = max(sigma_el, float(eloc.std(ddof=0)))
    trace = np.asarray(trace)
    if tau * sigma_el > 0.1:
        warnings.warn(
            f"timestep {tau:g} times local-energy spread {sigma_el:.3g} "
            "exceeds 0.1; expect visible bias",
            TimestepWarning,
            stacklevel=2,
        )
    return EnergyEstimate(
        mean=float(trace.mean()),
        err=float(blocking_error(trace)),
        tag="dmc_mixed",
        acceptance=accepted / max(attempted, 1),
        population=float(np.mean(pops)),
        trace=trace,
        final_positions=pos,
    )


def _weighted_linfit(x, y, sigma):
    w = 1.0 / np.asarray(sigma, dtype=float) ** 2
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = w.sum()
    sx = (w * x).sum()
    sy = (w * y).sum()
    sxx = (w * x * x).sum()
    sxy = (w * x * y).sum()
    delta = s * sxx - sx * sx
    if delta <= 0.0:
        raise InsufficientDataError("degenerate abscissae in weighted fit")
    intercept = (sxx * sy - sx * sxy) / delta
    slope = (s * sxy - sx * sy) / delta
    return intercept, slope, sxx / delta, s / delta


def extrapolate_timestep(results):
    """Zero-timestep energy from a weighted linear fit of mean vs timestep."""
    if len({t for t, _ in results}) < 2:
        raise InsufficientDataError("need results at two distinct timesteps")
    taus = [t for t, _ in results]
    means = [r.mean for _, r in results]
    errs = [max(r.err, 1e-300) for _, r in results]
    intercept, _, var_a, _ = _weighted_linfit(taus, means, errs)
    return EnergyEstimate(
        mean=float(intercept), err=float(math.sqrt(var_a)), tag="extrapolated"
    )


def extrapolate_size(results):
    """Thermodynamic-limit energy from a weighted fit of mean vs 1/N."""
    if len({n for n, _ in results}) < 2:
        raise InsufficientDataError("need results at two distinct particle numbers")
    inv_n = [1.0 / n for n, _ in results]
    means = [r.mean for _, r in results]
    errs = [max(r.err, 1e-300) for _, r in results]
    intercept, _, var_a, _ = _weighted_linfit(inv_n, means, errs)
    return EnergyEstimate(
        mean=float(intercept), err=float(math.sqrt(var_a)), tag="extrapolated"
    )
