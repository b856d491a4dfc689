"""Exact diagnostics for 1-D quantum walks with decaying coin phases.

The package simulates the two-state walk U = S C(x) on the integer line
with coin phases theta(x) = g (1 + |x|)^(-gamma), diagonalizes the free
walk U0 in Fourier space, and measures whether the wave-operator
approximants W(t) = U^{-t} U0^t settle down: divergence-term partial
sums, Cauchy defects, velocity-operator rates and a gamma sweep that
classifies each cell as DIVERGENT, CONVERGENT or AMBIGUOUS.
"""

__version__ = "0.1.0"

from .lattice import (
    CoinSpec,
    PhaseProfile,
    StateVector,
    WindowGuardError,
    build_coin,
    diagonal_coin,
    evolve,
    hadamard_coin,
    single_site_state,
    state_from_amplitudes,
)
from .spectral import (
    FilterAnnihilationError,
    FilterSpec,
    KGrid,
    TailToleranceError,
    apply_function_of_v0,
    apply_resolvent_v0,
    apply_v0,
    apply_with_auto_grid,
    eigensystem,
    u0_spectrum,
    velocity_filter,
)
from .diagnostics import (
    DefectSeries,
    GrowthFit,
    LemmaReport,
    cauchy_defect,
    divergence_terms,
    fit_growth,
    lemma_suite,
    partial_sums,
    telescoping_check,
    wave_apply,
    weak_limit_compare,
)
from .config import ConfigError, ExperimentConfig, SeedSpec, parse_config
from .runner import make_seed, run_cell, run_experiment

__all__ = [
    "__version__",
    "CoinSpec",
    "PhaseProfile",
    "StateVector",
    "WindowGuardError",
    "build_coin",
    "diagonal_coin",
    "evolve",
    "hadamard_coin",
    "single_site_state",
    "state_from_amplitudes",
    "FilterAnnihilationError",
    "FilterSpec",
    "KGrid",
    "TailToleranceError",
    "apply_function_of_v0",
    "apply_resolvent_v0",
    "apply_v0",
    "apply_with_auto_grid",
    "eigensystem",
    "u0_spectrum",
    "velocity_filter",
    "DefectSeries",
    "GrowthFit",
    "LemmaReport",
    "cauchy_defect",
    "divergence_terms",
    "fit_growth",
    "lemma_suite",
    "partial_sums",
    "telescoping_check",
    "wave_apply",
    "weak_limit_compare",
    "ConfigError",
    "ExperimentConfig",
    "SeedSpec",
    "parse_config",
    "make_seed",
    "run_cell",
    "run_experiment",
]
