"""Two-phonon collective emission of spin ensembles in a nonlinear phononic waveguide."""

from .correlation import (RateMatrix, SpinEnsemble, frequency_for_momentum, group_velocity,
                          pairwise_rate_matrix, solve_K0, two_phonon_correlation)
from .dicke import dicke_evolve, distribution_snapshot_report, half_emission_time, mean_field_evolve
from .lattice import evolve_full, evolve_reduced, fit_exponential_rate
from .lindblad import (build_pair_liouvillian, evolve_density_matrix, find_subradiant_states,
                       grouped_superradiance_experiment, predict_plateau)
from .series import TimeSeries
from .units import PhysicalUnits, feasibility_report
from .waveguide import WaveguideParams, bound_state_energy, exact_two_excitation_spectrum

__version__ = "0.1.0"

__all__ = [
    "PhysicalUnits", "RateMatrix", "SpinEnsemble", "TimeSeries", "WaveguideParams",
    "bound_state_energy", "build_pair_liouvillian", "dicke_evolve", "distribution_snapshot_report",
    "evolve_density_matrix", "evolve_full", "evolve_reduced", "exact_two_excitation_spectrum",
    "feasibility_report", "find_subradiant_states", "fit_exponential_rate", "frequency_for_momentum",
    "group_velocity", "grouped_superradiance_experiment", "half_emission_time", "mean_field_evolve",
    "pairwise_rate_matrix", "predict_plateau", "solve_K0", "two_phonon_correlation",
]
