"""Tools for the dilute two-dimensional Bose gas: analytic equations of
state, a diffusion Monte Carlo engine for dipoles and hard disks, and a
trapped-gas solver for the lowest breathing mode."""

from . import dmc, eos, specfun, trap

__all__ = ["dmc", "eos", "specfun", "trap"]
__version__ = "0.1.0"
