"""Run-configuration files, the runs.csv log, and walker checkpoints.

A run file is documented key-value text: one `key = value` per line,
blank lines and `#` comments ignored.  Recognized keys:

    potential        dipolar | hard_disk
    range            interaction range (r0 or core diameter), default 1.0
    density          n * range^2
    n_particles      particles in the periodic box
    timesteps        one or more comma-separated imaginary-time steps
    target_walkers   walker population target
    equil_blocks     blocks discarded before measuring
    measure_blocks   measured blocks
    steps_per_block  steps per block
    seed             64-bit RNG seed
    match_radius_fraction   pair-function match radius over box, default 0.25
    run_vmc          true | false, variational baseline before DMC
    workers          worker count for walker propagation
"""

import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from .engine import DmcConfig
from .model import PotentialModel

_BOOL = {"true": True, "yes": True, "1": True,
         "false": False, "no": False, "0": False}


@dataclass
class RunSpec:
    """Everything cmd-level DMC needs: potential, per-timestep configs."""

    potential: PotentialModel
    configs: list
    run_vmc: bool = False
    workers: int = 1

    @property
    def timesteps(self):
        return [c.timestep for c in self.configs]


def parse_run_file(path):
    """Parse and validate a run file; raises DomainError with the field name."""
    raw = {}
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{ln}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in raw:
                raise DomainError(f"{path}:{ln}: duplicate key {key!r}")
            raw[key] = value

    known = {
        "potential", "range", "density", "n_particles", "timesteps",
        "target_walkers", "equil_blocks", "measure_blocks",
        "steps_per_block", "seed", "match_radius_fraction", "run_vmc",
        "workers",
    }
    unknown = set(raw) - known
    if unknown:
        raise DomainError(f"unknown config keys: {sorted(unknown)}")
    required = {"potential", "density", "n_particles", "timesteps"}
    missing = required - set(raw)
    if missing:
        raise DomainError(f"missing config keys: {sorted(missing)}")

    def get(key, cast, default=None):
        if key not in raw:
            return default
        try:
            return cast(raw[key])
        except (TypeError, ValueError) as exc:
            raise DomainError(f"config field {key!r}: {exc}") from exc

    def as_bool(text):
        try:
            return _BOOL[text.lower()]
        except KeyError:
            raise ValueError(f"expected boolean, got {text!r}")

    potential = PotentialModel(raw["potential"], get("range", float, 1.0))
    timesteps = []
    for tok in raw["timesteps"].split(","):
        tok = tok.strip()
        if tok:
            timesteps.append(float(tok))
    if not timesteps:
        raise DomainError("config field 'timesteps': empty list")
    n_particles = get("n_particles", int)
    density = get("density", float)
    frac = get("match_radius_fraction", float, 0.25)
    if not 0.0 < frac < 0.5:
        raise DomainError("config field 'match_radius_fraction': must be in (0, 0.5)")
    box = np.sqrt(n_particles / density)
    configs = [
        DmcConfig(
            n_particles=n_particles,
            density=density,
            timestep=tau,
            target_walkers=get("target_walkers", int, 120),
            equil_blocks=get("equil_blocks", int, 10),
            measure_blocks=get("measure_blocks", int, 40),
            steps_per_block=get("steps_per_block", int, 100),
            seed=get("seed", int, 1),
            match_radius=frac * box,
        )
        for tau in timesteps
    ]
    return RunSpec(
        potential=potential,
        configs=configs,
        run_vmc=get("run_vmc", as_bool, False),
        workers=get("workers", int, 1),
    )


RUNS_COLUMNS = ("potential", "n_r2", "N", "timestep", "walkers",
                "mean", "err", "tag", "seed")


def append_run(path, potential, config, estimate):
    """Append one estimate to the runs.csv log, creating it if needed."""
    fresh = not os.path.exists(path)
    with open(path, "a", encoding="utf-8") as fh:
        if fresh:
            fh.write("# schema: runs_v1\n")
            fh.write(",".join(RUNS_COLUMNS) + "\n")
        fh.write(
            ",".join(
                [
                    potential.kind,
                    format(config.density, ".17g"),
                    str(config.n_particles),
                    format(config.timestep, ".17g"),
                    str(config.target_walkers),
                    format(estimate.mean, ".17g"),
                    format(estimate.err, ".17g"),
                    estimate.tag,
                    str(config.seed),
                ]
            )
            + "\n"
        )


def save_checkpoint(path, positions, box, lineage=None):
    """Plain-CSV walker checkpoint: walker,particle,lineage,x,y rows."""
    positions = np.asarray(positions, dtype=float)
    nwalk, n, _ = positions.shape
    if lineage is None:
        lineage = np.arange(nwalk, dtype=np.int64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# schema: walkers_v1\n")
        fh.write(f"# box = {box:.17g}\n")
        fh.write(f"# n_particles = {n}\n")
        fh.write("walker,particle,lineage,x,y\n")
        for w in range(nwalk):
            for i in range(n):
                fh.write(
                    f"{w},{i},{int(lineage[w])},"
                    f"{positions[w, i, 0]:.17g},{positions[w, i, 1]:.17g}\n"
                )


def load_checkpoint(path):
    """Inverse of save_checkpoint: (positions, box, lineage)."""
    box = None
    n = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                if "box =" in line:
                    box = float(line.split("=", 1)[1])
                elif "n_particles =" in line:
                    n = int(line.split("=", 1)[1])
                continue
            if not line or line.startswith("walker,"):
                continue
            rows.append(line.split(","))
    if box is None or n is None or not rows:
        raise DomainError(f"{path}: not a walker checkpoint")
    nwalk = len(rows) // n
    positions = np.empty((nwalk, n, 2))
    lineage = np.empty(nwalk, dtype=np.int64)
    for rec in rows:
        w, i = int(rec[0]), int(rec[1])
        lineage[w] = int(rec[2])
        positions[w, i] = (float(rec[3]), float(rec[4]))
    return positions, box, lineage
