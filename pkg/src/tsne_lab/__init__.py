"""Numerical lab for tSNE asymptotics.

Discrete attraction/repulsion energies with perplexity-calibrated adaptive
bandwidths, their rescaled variant, the continuum (large-data) limit energy
on grids, momentum-descent minimizers, and reproducible experiment drivers.
"""
from .bandwidth import (BandwidthProfile, CalibrationError, PerplexityTarget,
                        analytic_profile, calibrate_profile, kde,
                        limit_bandwidth, perplexity, solve_bandwidth)
from .continuum import (GridMap, QuadratureGrid, SmoothMap, apply_map,
                        averaged_attraction, averaged_repulsion, boundary_flux,
                        conditional_moments, continuum_energy,
                        dirichlet_coefficient, el_residual, gridmap_energy,
                        gridmap_gradient, moment_bounds, nonlocal_smoothness,
                        weighted_mean, weighted_spread)
from .density import Dataset, Density, Domain, DomainError
from .energy import (AffinityMatrix, Embedding, EnergyBreakdown, affinities_p,
                     affinities_q, decompose, grad_discrete, kl_energy,
                     rescaled_energy)
from .experiments import (SweepConfig, SweepResult, exp_bandwidth,
                          exp_consistency, exp_el_residual, exp_illposed,
                          exp_rescaled, run_experiment)
from .optimize import (GradCheckReport, InitGaussian, InitGiven, InitPCA,
                       OptimizationError, OptimizationTrace, OptimizerConfig,
                       gradcheck, minimize_discrete, minimize_gridmap)

__version__ = "0.1.0"

__all__ = [
    "AffinityMatrix", "BandwidthProfile", "CalibrationError", "Dataset",
    "Density", "Domain", "DomainError", "Embedding", "EnergyBreakdown",
    "GradCheckReport", "GridMap", "InitGaussian", "InitGiven", "InitPCA",
    "OptimizationError", "OptimizationTrace", "OptimizerConfig",
    "PerplexityTarget", "QuadratureGrid", "SmoothMap", "SweepConfig",
    "SweepResult", "affinities_p", "affinities_q", "analytic_profile",
    "apply_map", "averaged_attraction", "averaged_repulsion", "boundary_flux",
    "calibrate_profile", "conditional_moments", "continuum_energy",
    "decompose", "dirichlet_coefficient", "el_residual", "exp_bandwidth",
    "exp_consistency", "exp_el_residual", "exp_illposed", "exp_rescaled",
    "grad_discrete", "gradcheck", "gridmap_energy", "gridmap_gradient", "kde",
    "kl_energy", "limit_bandwidth", "minimize_discrete", "minimize_gridmap",
    "moment_bounds", "nonlocal_smoothness", "perplexity", "rescaled_energy",
    "run_experiment", "solve_bandwidth", "weighted_mean", "weighted_spread",
]
