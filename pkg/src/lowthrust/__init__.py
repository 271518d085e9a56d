"""Indirect low-thrust minimum-fuel transfer optimization in the CR3BP.

PSO-based co-state initialization of the minimum-energy problem followed by
energy-to-fuel homotopy continuation with trust-region single shooting,
switching detection, and state-transition-matrix Jacobians.
"""

from .control import (ControlEvaluation, ExtendedState, HomotopyParameter,
                      evaluate_control, extremal_rhs, hamiltonian,
                      jump_matrix, optimal_throttle, primer_direction,
                      rhs_jacobian, switching_function, switching_gradient)
from .dynamics import (SpacecraftParams, SystemConstants,
                       collinear_equilibrium, coriolis_jacobian,
                       coriolis_term, gravity_accel, gravity_gradient,
                       jacobi_constant, primary_distances)
from .propagation import (IntegratorSettings, StateTransition,
                          TrajectorySolution, propagate, propagate_with_stm,
                          surface_collision_guard)

__version__ = "0.1.0"
