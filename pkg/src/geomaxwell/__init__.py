"""Structure-preserving Maxwell dynamics in nonlinear and dispersive media."""

from .dec import (Cochain, ComplexMesh, build_mesh, codifferential, exterior_derivative,
                  hodge_star, l2_inner, poincare_pair, vector_proxy_to_forms)
from .errors import ConfigError, ConstitutiveError, LeakageError, NonConvergence
from .media import (FieldState, InvariantLagrangian, Kerr, LinearSusceptibility, MediumModel,
                    NonlocalDispersive, Vacuum, born_infeld, constitutive_DH, dispersion_omega,
                    energy_K, hamiltonian_gradients, hamiltonian_H, invert_constitutive,
                    jacobian_dE_dD, variational_derivatives)
from .dynamics import EvolutionConfig, casimir_monitors, maxwell_rhs, poisson_bracket, step

__version__ = "0.1.0"
