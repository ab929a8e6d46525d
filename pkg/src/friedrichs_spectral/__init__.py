"""Spectral decomposition and irreversible evolution of functional states in the rank-one Friedrichs model."""

from .grid import EnergyGrid, build_grid, integrate, principal_value, boundary_value
from .model import ScatteringModel, PoleNotFoundError, MultiplePolesError
from .functionals import (ObservableKernel, StateFunctional, pair, from_wavefunction, mixture,
                          diagonal_state, time_invert, decompose, observable_presets, make_state_preset)
from .scattering import ls_plus, to_plus_representation, PlusRepresentation, fluctuating_kernel
from .evolution import evolve_mean, evolve, final_state, irreversibility_suite, EvolutionResult
from .spectral import (real_family, phi_energy_trace, gamov_vectors, complex_evolution, interior_nodes,
                       ComplexDecomposition, AnalyticityError)
from .oracle import DiscretizedSystem, evolve_oracle, mean_oracle, longtime_diagonal

__version__ = "0.1.0"
