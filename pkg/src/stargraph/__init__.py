"""Scattering on star graphs with a potential squeezed into the vertex.

The operator ``-d^2/dx^2 + eps^-2 lambda(eps) Q(x / eps)`` on a star of ``n``
half-lines converges, as ``eps -> 0``, to a point interaction determined by
the zero-energy resonances of ``Q``.  This package computes the resonances,
the limit vertex coupling, its S-matrix and bound states, the exact S-matrix
at finite ``eps`` and resolvent gaps between the two operators.
"""
from .coupling import (SMatrix, VertexCoupling, asymptotic_smatrix, discrete_spectrum,
                       limit_smatrix, limit_smatrix_cramer, matching_defect)
from .errors import (ConditioningError, ConfigSchemaError, DomainError, RateFitError,
                     SingularSystemError, StarGraphError, ValidationError)
from .model import (ExperimentConfig, PotentialSpec, ScalingLaw, StarGraph, Tolerances,
                    config_from_dict, config_hash, evaluate_potential, evaluate_scaling,
                    load_config)
from .propagate import solve_ivp, transfer_matrix
from .resolvent import (ScaledOperator, Source, battery_gaps, default_battery, rate_fit,
                        resolvent_apply, resolvent_gap)
from .resonance import (coupling_data, design_resonant_potential, kirchhoff_defect_matrix,
                        resonance_order, resonant_basis)
from .scattering import det_ratio, eps_smatrix, fredholm_residual, fundamental_system, rho_constant

__version__ = "0.1.0"
