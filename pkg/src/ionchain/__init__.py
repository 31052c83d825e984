"""Axial normal-mode dynamics and diagnostics for linear trapped-ion crystals.

The library computes the equilibrium structure and normal modes of a
linear chain of singly charged ions in a harmonic axial well, simulates
the chain's response to an impulsive collision, identifies which ion was
struck from the motion spectrum of a single observed ion, and estimates
the mass of a dark impurity ion from shifted mode frequencies.
"""

from .dynamics import (
    ImpulseEvent,
    Trajectory,
    beta_amplitudes,
    collision_mode_amplitudes,
    integrate_full_dynamics,
    synthesize_trajectory,
)
from .equilibrium import (
    EquilibriumChain,
    TrapConfig,
    characteristic_length,
    equilibrium_chain,
    solve_equilibrium,
)
from .impurity import (
    MassDistribution,
    MassEstimate,
    PerturbedModes,
    build_scaled_coupling,
    estimate_impurity_mass_exact,
    estimate_impurity_mass_first_order,
    exact_frequency_ratios,
    frequency_ratio,
    perturbation_delta_A,
    perturbation_delta_mu,
    perturbed_modes,
)
from .modes import (
    CouplingMatrix,
    ModeBasis,
    build_coupling_matrix,
    chain_modes,
    eigendecompose,
    ion_displacements,
    mode_frequencies,
    normal_coordinates,
    with_frequencies,
)
from .spectral import (
    CollisionReport,
    MotionSpectrum,
    estimate_spectrum,
    infer_collision_site,
    recover_eigenvector_components,
)

__version__ = "0.1.0"

__all__ = [
    "CollisionReport",
    "CouplingMatrix",
    "EquilibriumChain",
    "ImpulseEvent",
    "MassDistribution",
    "MassEstimate",
    "ModeBasis",
    "MotionSpectrum",
    "PerturbedModes",
    "TrapConfig",
    "Trajectory",
    "beta_amplitudes",
    "build_coupling_matrix",
    "build_scaled_coupling",
    "chain_modes",
    "characteristic_length",
    "collision_mode_amplitudes",
    "eigendecompose",
    "equilibrium_chain",
    "estimate_impurity_mass_exact",
    "estimate_impurity_mass_first_order",
    "estimate_spectrum",
    "exact_frequency_ratios",
    "frequency_ratio",
    "infer_collision_site",
    "integrate_full_dynamics",
    "ion_displacements",
    "mode_frequencies",
    "normal_coordinates",
    "perturbation_delta_A",
    "perturbation_delta_mu",
    "perturbed_modes",
    "recover_eigenvector_components",
    "solve_equilibrium",
    "synthesize_trajectory",
    "with_frequencies",
]
