"""Particle swarm search over the 7-dimensional initial co-state space.

The swarm minimizes the weighted squared final-boundary residual of the
minimum-energy propagation.  The update rule is the adaptive-inertia,
adaptive-neighborhood variant: inertia in [0.1, 1.1] rising on global-best
improvement, neighborhoods growing on stagnation, velocities clamped to the
search span, positions clamped to the search bounds with the clamped
velocity component zeroed.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .control import GRAZING_SDOT_TOL
from .propagation import HALT_REASONS, IntegratorSettings
from .scenarios import Scenario

_LAM_R_INIT = 40.0
_LAM_V_INIT = 2.0
_LAM_M_INIT = (0.0, 2.0)
_LAM_R_SEARCH = 100.0
_LAM_V_SEARCH = 10.0
_LAM_M_SEARCH = (0.0, 10.0)


def _default_init_lower():
    return np.array([-_LAM_R_INIT] * 3 + [-_LAM_V_INIT] * 3 + [_LAM_M_INIT[0]])


def _default_init_upper():
    return np.array([_LAM_R_INIT] * 3 + [_LAM_V_INIT] * 3 + [_LAM_M_INIT[1]])


def _default_search_lower():
    return np.array([-_LAM_R_SEARCH] * 3 + [-_LAM_V_SEARCH] * 3
                    + [_LAM_M_SEARCH[0]])


def _default_search_upper():
    return np.array([_LAM_R_SEARCH] * 3 + [_LAM_V_SEARCH] * 3
                    + [_LAM_M_SEARCH[1]])


@dataclass
class SwarmConfig:
    swarm_size: int = 500
    init_lower: np.ndarray = field(default_factory=_default_init_lower)
    init_upper: np.ndarray = field(default_factory=_default_init_upper)
    search_lower: np.ndarray = field(default_factory=_default_search_lower)
    search_upper: np.ndarray = field(default_factory=_default_search_upper)
    inertia_range: tuple = (0.1, 1.1)
    self_weight: float = 1.49
    social_weight: float = 1.49
    min_neighborhood_fraction: float = 0.05
    stall_iterations: int = 50
    stall_tolerance: float = 1e-6
    max_wall_time: float = 1800.0
    max_iterations: int = 1400
    rng_seed: int = 0
    propagation_tol: float = 1e-14  # may be loosened to 1e-12 for the swarm
    # penalize whole-arc full-throttle guesses: on that family the
    # shooting Jacobian is rank deficient and continuation always stalls
    saturation_guard: bool = True

    def __post_init__(self):
        self.init_lower = np.asarray(self.init_lower, dtype=float)
        self.init_upper = np.asarray(self.init_upper, dtype=float)
        self.search_lower = np.asarray(self.search_lower, dtype=float)
        self.search_upper = np.asarray(self.search_upper, dtype=float)
        if np.any(self.init_lower < self.search_lower) or \
                np.any(self.init_upper > self.search_upper):
            raise ValueError("init bounds must lie inside search bounds")
        if self.swarm_size < 2:
            raise ValueError("swarm needs at least 2 particles")


@dataclass
class Particle:
    """Snapshot of one swarm member."""

    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_value: float


@dataclass
class PsoObjectiveSpec:
    """Weighted least-squares objective over the boundary residual."""

    weights: np.ndarray = field(
        default_factory=lambda: np.array([10.0, 10.0, 10.0, 1.0, 1.0, 1.0,
                                          1.0]))
    eps: float = 1.0
    infeasible_penalty: float = 1e10

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (7,) or np.any(self.weights <= 0):
            raise ValueError("need 7 positive residual weights")


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_value: float
    iterations: int
    evaluations: int
    elapsed: float
    stop_reason: str


@dataclass(frozen=True)
class Halted:
    """Marker returned in place of a residual when propagation halted."""

    reason: str


def boundary_residual(lam0, scenario: Scenario, eps,
                      settings: IntegratorSettings | None = None):
    """Final boundary residual e(t_f) = [r - r_f, v - v_f, lam_m](t_f).

    Returns a Halted marker instead when the propagation stopped early
    (collision, mass floor) or failed.
    """
    st = settings or IntegratorSettings()
    sc = scenario.spacecraft
    k = sc.constants
    y0 = scenario.initial_extended_state(lam0)
    res = _core.propagate(
        y0, 0.0, scenario.tof, k.mu, float(eps), sc.t_max_nd, sc.c_nd,
        st.abs_tol, st.rel_tol, st.max_steps, st.body_radii[0] / k.lu,
        st.body_radii[1] / k.lu, st.mass_floor, False, False,
        st.event_interior_points, st.event_tol, GRAZING_SDOT_TOL)
    status, y_end = res[0], res[2]
    if status != _core.STATUS_OK:
        return Halted(HALT_REASONS.get(status, f"integration-failure-{status}"))
    e = np.empty(7)
    e[0:3] = y_end[0:3] - scenario.r_f
    e[3:6] = y_end[3:6] - scenario.v_f
    e[6] = y_end[13]
    return e


def pso_objective(lam0, scenario: Scenario, spec: PsoObjectiveSpec,
                  settings: IntegratorSettings | None = None):
    """J = e^T W e, or the infeasible penalty when the arc halted."""
    e = boundary_residual(lam0, scenario, spec.eps, settings)
    if isinstance(e, Halted):
        return float(spec.infeasible_penalty)
    return float(e @ (spec.weights * e))


def _batch_evaluator(scenario, spec, tol, saturation_guard=True):
    st = IntegratorSettings(abs_tol=tol, rel_tol=tol)
    sc = scenario.spacecraft
    k = sc.constants
    y_phys = np.concatenate([scenario.r_i, scenario.v_i])
    rf = np.asarray(scenario.r_f, float)
    vf = np.asarray(scenario.v_f, float)
    w = np.asarray(spec.weights, float)

    def evaluate(positions):
        out = np.empty(positions.shape[0])
        _core.batch_objective(
            np.ascontiguousarray(positions), y_phys, 0.0, scenario.tof,
            k.mu, float(spec.eps), sc.t_max_nd, sc.c_nd, st.abs_tol,
            st.rel_tol, st.max_steps, st.body_radii[0] / k.lu,
            st.body_radii[1] / k.lu, st.mass_floor, rf, vf, w,
            float(spec.infeasible_penalty), saturation_guard, out)
        return out

    return evaluate


def pso_minimize(scenario: Scenario, config: SwarmConfig,
                 spec: PsoObjectiveSpec | None = None, objective=None,
                 progress=None):
    """Run the swarm until stall, wall-time, or the iteration cap.

    objective: optional batch callable positions (n, 7) -> values (n,) that
    replaces the propagation-backed objective (testing hook).
    progress: optional callable(iteration, best_value, evaluations, elapsed).
    """
    spec = spec or PsoObjectiveSpec()
    if objective is None:
        objective = _batch_evaluator(scenario, spec, config.propagation_tol,
                                     config.saturation_guard)

    rng = np.random.default_rng(config.rng_seed)
    n = config.swarm_size
    lo, hi = config.search_lower, config.search_upper
    span = hi - lo
    init_span = config.init_upper - config.init_lower

    start = time.monotonic()
    X = rng.uniform(config.init_lower, config.init_upper, size=(n, 7))
    V = rng.uniform(-init_span, init_span, size=(n, 7))
    pbest = X.copy()
    pbest_val = np.asarray(objective(X), dtype=float).copy()
    evaluations = n

    g_idx = int(np.argmin(pbest_val))
    g_val = float(pbest_val[g_idx])
    g_pos = pbest[g_idx].copy()

    w_lo, w_hi = config.inertia_range
    inertia = w_hi
    min_nb = max(2, int(np.floor(config.min_neighborhood_fraction * n)))
    nb_size = min_nb
    stall_counter = 0
    best_history = [g_val]

    iterations = 0
    stop_reason = "max-iterations"
    while iterations < config.max_iterations:
        if time.monotonic() - start >= config.max_wall_time:
            stop_reason = "time"
            break
        iterations += 1

        # random informant subset per particle (self plus nb_size - 1 draws)
        others = rng.integers(0, n, size=(n, max(nb_size - 1, 1)))
        informant_vals = pbest_val[others]
        pick = np.argmin(informant_vals, axis=1)
        informants = others[np.arange(n), pick]
        self_better = pbest_val <= pbest_val[informants]
        informants = np.where(self_better, np.arange(n), informants)
        local_best = pbest[informants]

        u1 = rng.random((n, 7))
        u2 = rng.random((n, 7))
        V = (inertia * V + config.self_weight * u1 * (pbest - X)
             + config.social_weight * u2 * (local_best - X))
        np.clip(V, -span, span, out=V)
        X = X + V
        low_mask = X < lo
        high_mask = X > hi
        X = np.clip(X, lo, hi)
        V[low_mask | high_mask] = 0.0

        vals = np.asarray(objective(X), dtype=float)
        evaluations += n
        improved = vals < pbest_val
        pbest[improved] = X[improved]
        pbest_val[improved] = vals[improved]

        g_idx = int(np.argmin(pbest_val))
        new_val = float(pbest_val[g_idx])
        got_better = new_val < g_val
        if got_better:
            g_val = new_val
            g_pos = pbest[g_idx].copy()
            stall_counter = max(0, stall_counter - 1)
            nb_size = min_nb
            if stall_counter < 2:
                inertia = min(1.25 * inertia, w_hi)
        else:
            stall_counter += 1
            nb_size = min(nb_size + min_nb, n)
            if stall_counter > 5:
                # gentle decay: a fast drop freezes the swarm and ends the
                # run long before the wall-time budget is spent
                inertia = max(0.98 * inertia, w_lo)
        best_history.append(g_val)
        if progress is not None:
            progress(iterations, g_val, evaluations,
                     time.monotonic() - start)

        if iterations >= config.stall_iterations:
            # relative improvement over the stall window
            window = best_history[-(config.stall_iterations + 1)]
            if window - g_val <= config.stall_tolerance * max(1e-12, window):
                stop_reason = "stall"
                break

    return PsoResult(best_position=g_pos, best_value=g_val,
                     iterations=iterations, evaluations=evaluations,
                     elapsed=time.monotonic() - start,
                     stop_reason=stop_reason)
