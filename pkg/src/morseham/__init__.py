"""Radial nodal solutions of Hamiltonian elliptic systems and their Morse indices."""

from .errors import (AmbiguityError, ConfigError, ConsistencyError, DegeneracyError, DomainError, MorsehamError,
                     NotFoundError, SolverError)
from .geometry import DomainSpec
from .hamiltonian import (HamiltonianModel, LaneEmden, SeparablePowers, check_convexity, check_strong_coupling,
                          model_from_dict, potential_function, potentials_along_solution)
from .harness import ExperimentConfig, RunReport, run_config, sweep, verify_theorems
from .morse import (angular_cutoff, beltrami_eigenvalue, beltrami_multiplicity, build_report, full_morse_index,
                    radial_morse_index, verify_theorem_bounds)
from .nodal import NodalData, extract_nodal_data, verify_profile
from .oracle import coupled_spectrum, decoupling_check, derivative_pair_residual, test_function_estimates
from .shooting import RadialSolution, find_solution, integrate_ivp, read_solution_csv, write_solution_csv
from .spectra import SpectralProblem, Spectrum, regular_radial_eigenvalues, singular_radial_eigenvalues

__version__ = "0.1.0"
