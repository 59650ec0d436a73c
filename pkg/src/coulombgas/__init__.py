"""Numerical laboratory for log and Coulomb gases."""

__version__ = "0.1.0"

from .kernel import KernelSpec, cd_const, f_eta, g_eval, g_grad
from .equilibrium import EquilibriumMeasure, PotentialSpec, equilibrium_measure
from .energy import Configuration, TruncationVector, electric_energy, hamiltonian, next_order_energy
from .sampler import GibbsParams, mcmc_run, sample_beta_tridiag, sample_ginibre
from .jellium import LatticeSpec, PeriodicConfig, renorm_energy_periodic
from .thermo import logz_closed_form, logz_estimate_ti
from . import fluctstats

__all__ = [
    "__version__",
    "KernelSpec",
    "cd_const",
    "f_eta",
    "g_eval",
    "g_grad",
    "EquilibriumMeasure",
    "PotentialSpec",
    "equilibrium_measure",
    "Configuration",
    "TruncationVector",
    "electric_energy",
    "hamiltonian",
    "next_order_energy",
    "GibbsParams",
    "mcmc_run",
    "sample_beta_tridiag",
    "sample_ginibre",
    "LatticeSpec",
    "PeriodicConfig",
    "renorm_energy_periodic",
    "logz_closed_form",
    "logz_estimate_ti",
    "fluctstats",
]
