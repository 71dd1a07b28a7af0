from .engine import (
    DmcConfig,
    EnergyEstimate,
    blocking_error,
    dmc_run,
    extrapolate_size,
    extrapolate_timestep,
    vmc_run,
)
from .io import (
    RunSpec,
    append_run,
    load_checkpoint,
    parse_run_file,
    save_checkpoint,
)
from .model import (
    GuidingParams,
    PairModel,
    PotentialModel,
    Walker,
    lattice_positions,
    local_energy,
    pair_guiding,
    scattering_length_check,
)

__all__ = [
    "DmcConfig",
    "EnergyEstimate",
    "GuidingParams",
    "PairModel",
    "PotentialModel",
    "RunSpec",
    "Walker",
    "append_run",
    "blocking_error",
    "dmc_run",
    "extrapolate_size",
    "extrapolate_timestep",
    "lattice_positions",
    "load_checkpoint",
    "local_energy",
    "pair_guiding",
    "parse_run_file",
    "save_checkpoint",
    "scattering_length_check",
    "vmc_run",
]
