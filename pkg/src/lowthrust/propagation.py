"""Adaptive propagation of the 14-dimensional extremal system.

Wraps the compiled Dormand-Prince 8(5,3) core: dense output, switching
events located on the interpolant, optional joint state-transition-matrix
integration with jump-matrix chaining across throttle switches, and
collision/mass guards.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _core
from .control import GRAZING_SDOT_TOL, as_state_vector, _eps_value
from .dynamics import SpacecraftParams, SystemConstants
from .errors import (DegeneratePrimerError, GrazingSwitchError,
                     MaxStepsExceededError, SingularityError,
                     StepSizeUnderflowError)

_EPS = np.finfo(float).eps

HALT_REASONS = {
    _core.HALT_PRIMARY_1: "primary-1-collision",
    _core.HALT_PRIMARY_2: "primary-2-collision",
    _core.HALT_MASS_FLOOR: "mass-floor",
}


@dataclass(frozen=True)
class IntegratorSettings:
    """Numerical contract of one propagation run.

    body_radii are dimensional radii [km] of the two primaries used by the
    collision guard; event_tol is the switching-time root width [TU].
    """

    abs_tol: float = 1e-14
    rel_tol: float = 1e-14
    event_tol: float = 4.0 * _EPS
    max_steps: int = 2_000_000
    body_radii: tuple = (6378.0, 1737.0)
    mass_floor: float = 0.01
    event_interior_points: int = 3

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0 or self.event_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class TrajectorySolution:
    """Propagated extremal with located switch epochs and dense output."""

    times: np.ndarray
    states: np.ndarray
    switch_times: np.ndarray
    terminal_state: np.ndarray
    halted: str | None = None
    _dense: tuple = field(default=None, repr=False)

    def sample(self, t):
        """Dense-output state(s) at time(s) t within the propagated span."""
        if self._dense is None or self._dense[0].size == 0:
            raise ValueError("no dense output stored for this solution")
        t0s, hs, tvs, y0s, Fs = self._dense
        tq = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((tq.size, 14))
        buf = np.empty(14)
        for i, ti in enumerate(tq):
            _core.dense_sample(t0s, hs, tvs, y0s, Fs, ti, buf)
            out[i] = buf
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return out[0]
        return out


@dataclass(frozen=True)
class StateTransition:
    """State-transition matrix of the full arc, switch jumps included."""

    phi: np.ndarray


def surface_collision_guard(state, constants: SystemConstants, body_radii):
    """Halt reason when the position is inside a primary, else None."""
    y = as_state_vector(state) if np.asarray(state).size == 14 else None
    r = y[0:3] if y is not None else np.asarray(state, dtype=float)
    r1, r2 = _core.distances(r[0], r[1], r[2], constants.mu)
    if r1 * constants.lu < body_radii[0]:
        return "primary-1-collision"
    if r2 * constants.lu < body_radii[1]:
        return "primary-2-collision"
    return None


def _run_core(y0, t_span, eps, sc, settings, with_stm, store_dense):
    t_i, t_f = float(t_span[0]), float(t_span[1])
    if t_f < t_i:
        raise ValueError("backward-time propagation is not supported")
    k = sc.constants
    r1_halt = settings.body_radii[0] / k.lu
    r2_halt = settings.body_radii[1] / k.lu
    return _core.propagate(
        y0, t_i, t_f, k.mu, eps, sc.t_max_nd, sc.c_nd,
        settings.abs_tol, settings.rel_tol, settings.max_steps,
        r1_halt, r2_halt, settings.mass_floor, with_stm, store_dense,
        settings.event_interior_points, settings.event_tol, GRAZING_SDOT_TOL)


def _raise_for_error(status):
    if status == _core.ERR_MAX_STEPS:
        raise MaxStepsExceededError("step budget exhausted")
    if status == _core.ERR_STEP_UNDERFLOW:
        raise StepSizeUnderflowError("step size below time resolution")
    if status == _core.ERR_GRAZING_SWITCH:
        raise GrazingSwitchError("tangential switching-surface crossing")
    if status == _core.ERR_SINGULARITY:
        raise SingularityError("state within the singularity guard radius")
    if status == _core.ERR_DEGENERATE_PRIMER:
        raise DegeneratePrimerError("velocity co-state vanished with "
                                    "positive throttle")


def _assemble(y0_14, t_i, result):
    (status, t_end, y_end, switch_times, d_t0, d_h, d_tval, d_y0, d_F,
     _nsteps, _nfev) = result
    _raise_for_error(status)
    halted = HALT_REASONS.get(status)
    n = d_tval.size
    times = np.empty(n + 1)
    states = np.empty((n + 1, 14))
    times[0] = t_i
    states[0] = y0_14
    if n:
        times[1:] = d_tval
        states[1:-1] = d_y0[1:]
        states[-1] = y_end[:14]
    sol = TrajectorySolution(
        times=times, states=states, switch_times=switch_times,
        terminal_state=y_end[:14].copy(), halted=halted,
        _dense=(d_t0, d_h, d_tval, d_y0, d_F))
    return sol, t_end, y_end


def propagate(y0, t_span, eps, sc: SpacecraftParams,
              settings: IntegratorSettings | None = None):
    """Propagate the extremal system over t_span at homotopy parameter eps.

    Switching-surface crossings are located on the dense output and inserted
    as nodes; collisions with either primary and the mass floor halt the run
    early with the reason recorded on the returned solution.
    """
    settings = settings or IntegratorSettings()
    y0 = as_state_vector(y0)
    e = _eps_value(eps)
    result = _run_core(y0, t_span, e, sc, settings, False, True)
    sol, _, _ = _assemble(y0, float(t_span[0]), result)
    return sol


def propagate_with_stm(y0, t_span, eps, sc: SpacecraftParams,
                       settings: IntegratorSettings | None = None):
    """Propagate jointly with the 14x14 state-transition matrix.

    The returned matrix is the chained product of segment STMs and the
    rank-one jump matrices applied at every bang-bang switch.
    """
    settings = settings or IntegratorSettings()
    y0 = as_state_vector(y0)
    e = _eps_value(eps)
    y0_aug = np.empty(14 + 196)
    y0_aug[:14] = y0
    y0_aug[14:] = np.eye(14).ravel()
    result = _run_core(y0_aug, t_span, e, sc, settings, True, True)
    sol, _, y_end = _assemble(y0, float(t_span[0]), result)
    phi = y_end[14:].reshape(14, 14).copy()
    return sol, StateTransition(phi=phi)
