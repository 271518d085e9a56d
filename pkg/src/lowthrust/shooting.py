"""Trust-region single shooting on the 7-dimensional boundary residual and
the energy-to-fuel continuation driver.

The shooting unknowns are the initial co-states lam(t_i); the residual is
Z = [r(t_f) - r_f, v(t_f) - v_f, lam_m(t_f)] and its Jacobian is read off
the propagated state-transition matrix.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _core
from .control import GRAZING_SDOT_TOL
from .errors import (GrazingSwitchError, HaltedTrajectoryError,
                     LowThrustError, PropagationError)
from .propagation import HALT_REASONS, IntegratorSettings

_SVD_TOL_FACTOR = 1e-6
_ILL_CONDITION = 1e12


@dataclass(frozen=True)
class ShootingProblem:
    """One two-point boundary-value problem instance at a fixed eps."""

    scenario: object
    eps: float
    r_i: np.ndarray
    v_i: np.ndarray
    r_f: np.ndarray
    v_f: np.ndarray
    tof: float
    settings: IntegratorSettings = field(default_factory=IntegratorSettings)

    @classmethod
    def from_scenario(cls, scenario, eps, settings=None):
        return cls(scenario=scenario, eps=float(eps),
                   r_i=np.asarray(scenario.r_i, float),
                   v_i=np.asarray(scenario.v_i, float),
                   r_f=np.asarray(scenario.r_f, float),
                   v_f=np.asarray(scenario.v_f, float),
                   tof=float(scenario.tof),
                   settings=settings or IntegratorSettings())

    def with_eps(self, eps):
        return ShootingProblem(scenario=self.scenario, eps=float(eps),
                               r_i=self.r_i, v_i=self.v_i, r_f=self.r_f,
                               v_f=self.v_f, tof=self.tof,
                               settings=self.settings)

    def initial_state(self, lam0):
        y0 = np.empty(14)
        y0[0:3] = self.r_i
        y0[3:6] = self.v_i
        y0[6] = 1.0
        y0[7:14] = np.asarray(lam0, dtype=float)
        return y0


@dataclass(frozen=True)
class ContinuationSchedule:
    """Quadratic continuation law eps_j = (j^2 - 1)/(N^2 - 1), j = N..1."""

    n_steps: int = 25

    @property
    def epsilons(self):
        n = self.n_steps
        if n < 2:
            raise ValueError("schedule needs at least 2 steps")
        return np.array([(j * j - 1.0) / (n * n - 1.0)
                         for j in range(n, 0, -1)])


@dataclass(frozen=True)
class TrustRegionSettings:
    residual_tol: float = 1e-10
    max_iterations: int = 250
    initial_radius: float = 1.0
    min_radius: float = 1e-13
    max_radius: float = 1e4

    def __post_init__(self):
        if self.residual_tol <= 0:
            raise ValueError("residual tolerance must be positive")


@dataclass
class SolutionRecord:
    """Outcome of one shooting solve at a fixed eps."""

    lam0: np.ndarray
    eps: float
    residual_inf: float
    delta_m_kg: float
    n_switches: int
    converged: bool
    jacobian_rank: int
    iterations: int = 0
    stop_reason: str = ""


def _propagate_raw(lam0, problem, with_stm):
    st = problem.settings
    sc = problem.scenario.spacecraft
    k = sc.constants
    if with_stm:
        y0 = np.empty(210)
        y0[14:] = np.eye(14).ravel()
    else:
        y0 = np.empty(14)
    y0[0:3] = problem.r_i
    y0[3:6] = problem.v_i
    y0[6] = 1.0
    y0[7:14] = np.asarray(lam0, dtype=float)
    res = _core.propagate(
        y0, 0.0, problem.tof, k.mu, problem.eps, sc.t_max_nd, sc.c_nd,
        st.abs_tol, st.rel_tol, st.max_steps,
        st.body_radii[0] / k.lu, st.body_radii[1] / k.lu, st.mass_floor,
        with_stm, False, st.event_interior_points, st.event_tol,
        GRAZING_SDOT_TOL)
    status, t_end, y_end = res[0], res[1], res[2]
    n_sw = res[3].size
    if status in HALT_REASONS:
        raise HaltedTrajectoryError(HALT_REASONS[status])
    if status == _core.ERR_GRAZING_SWITCH:
        raise GrazingSwitchError("tangential crossing while chaining the STM")
    if status != _core.STATUS_OK:
        raise HaltedTrajectoryError(f"integration-failure-{status}")
    del t_end
    e = np.empty(7)
    e[0:3] = y_end[0:3] - problem.r_f
    e[3:6] = y_end[3:6] - problem.v_f
    e[6] = y_end[13]
    return e, y_end, n_sw


def shooting_function(lam0, problem: ShootingProblem):
    """Boundary residual Z(lam0, eps) = e(t_f)."""
    e, _, _ = _propagate_raw(lam0, problem, False)
    return e


def shooting_jacobian(lam0, problem: ShootingProblem):
    """dZ/dlam0 extracted from the propagated state-transition matrix:
    rows {r, v, lam_m} x columns {lam(t_i)}."""
    _, y_end, _ = _propagate_raw(lam0, problem, True)
    phi = y_end[14:].reshape(14, 14)
    rows = np.concatenate([np.arange(6), [13]])
    return phi[np.ix_(rows, np.arange(7, 14))].copy()


def numerical_rank(matrix, svd_tol_factor=_SVD_TOL_FACTOR):
    """Numerical rank and singular values at threshold factor*sigma_max."""
    sigma = np.linalg.svd(np.asarray(matrix, float), compute_uv=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0, sigma
    return int(np.sum(sigma > svd_tol_factor * sigma[0])), sigma


def jacobian_rank_report(lam0, problem: ShootingProblem,
                         svd_tol_factor=_SVD_TOL_FACTOR):
    """Rank diagnosis of the shooting Jacobian at lam0."""
    J = shooting_jacobian(lam0, problem)
    return numerical_rank(J, svd_tol_factor)


def _dogleg_step(J, Z, radius, d):
    """Dogleg step for the square Newton system J s = -Z inside the scaled
    trust region |diag(d) s| <= radius, with an SVD pseudo-inverse step when
    J is ill-conditioned."""
    sigma = np.linalg.svd(J, compute_uv=False)
    if sigma[-1] <= 0.0 or sigma[0] / max(sigma[-1], 1e-300) > _ILL_CONDITION:
        s_newton = -np.linalg.pinv(J, rcond=1e-14) @ Z
    else:
        s_newton = np.linalg.solve(J, -Z)
    sn_scaled = d * s_newton
    if np.linalg.norm(sn_scaled) <= radius:
        return s_newton
    # steepest descent of 0.5|Z|^2 in the scaled variables x_hat = d*x
    Jh = J / d
    gh = Jh.T @ Z
    ghn = np.linalg.norm(gh)
    if ghn == 0.0:
        return s_newton * (radius / np.linalg.norm(sn_scaled))
    Jg = Jh @ gh
    t_c = ghn ** 2 / float(Jg @ Jg)
    cauchy = -t_c * gh
    cn = np.linalg.norm(cauchy)
    if cn >= radius:
        return -(radius / ghn) * gh / d
    dd = sn_scaled - cauchy
    a = float(dd @ dd)
    b = 2.0 * float(cauchy @ dd)
    cq = cn ** 2 - radius ** 2
    tau = (-b + np.sqrt(b * b - 4.0 * a * cq)) / (2.0 * a)
    return (cauchy + tau * dd) / d


def trust_region_solve(lam0_guess, problem: ShootingProblem,
                       settings: TrustRegionSettings | None = None):
    """Dogleg trust-region Newton iteration on the shooting function.

    Always returns a record; non-convergence is encoded, not raised.  A
    halted or grazing trajectory counts as a rejected iterate.
    """
    settings = settings or TrustRegionSettings()
    lam = np.asarray(lam0_guess, dtype=float).copy()
    sc = problem.scenario.spacecraft

    def full_eval(l):
        e, y_end, n_sw = _propagate_raw(l, problem, True)
        phi = y_end[14:].reshape(14, 14)
        rows = np.concatenate([np.arange(6), [13]])
        J = phi[np.ix_(rows, np.arange(7, 14))].copy()
        return e, J, y_end, n_sw

    try:
        Z, J, y_end, n_sw = full_eval(lam)
    except (HaltedTrajectoryError, GrazingSwitchError, PropagationError) as exc:
        return SolutionRecord(
            lam0=lam, eps=problem.eps, residual_inf=np.inf,
            delta_m_kg=np.nan, n_switches=0, converged=False,
            jacobian_rank=0, iterations=0, stop_reason=f"initial-{exc}")

    # column scaling of the trust region (kept at its running maximum)
    d = np.linalg.norm(J, axis=0)
    d[d == 0.0] = 1.0
    dx0 = np.linalg.norm(d * lam)
    radius = settings.initial_radius * (dx0 if dx0 > 0 else 1.0)
    iterations = 0
    escapes_left = 25
    stop_reason = "max-iterations"
    while iterations < settings.max_iterations:
        res_inf = float(np.max(np.abs(Z)))
        if res_inf < settings.residual_tol:
            stop_reason = "converged"
            break
        if radius < settings.min_radius:
            # near-singular Jacobians leave the dogleg blind along the null
            # direction; probe it directly before declaring a stall.  At a
            # genuine local minimum of |W^1/2 Z|^2 no probe can decrease |Z|
            # and the stall stands.
            escaped = False
            rank, _ = numerical_rank(J)
            if rank < 7 and escapes_left > 0:
                escapes_left -= 1
                _, _, Vt = np.linalg.svd(J)
                zn = float(np.linalg.norm(Z))
                for direction in (Vt[-1], -Vt[-1]):
                    for gamma in (1e-4, 1e-3, 1e-2, 1e-1, 0.3):
                        trial = lam + gamma * max(np.linalg.norm(lam), 1.0) \
                            * direction
                        try:
                            Z_try = shooting_function(trial, problem)
                        except (HaltedTrajectoryError, GrazingSwitchError,
                                PropagationError):
                            continue
                        if np.linalg.norm(Z_try) < 0.999 * zn:
                            lam = trial
                            try:
                                Z, J, y_end, n_sw = full_eval(lam)
                            except (HaltedTrajectoryError, GrazingSwitchError,
                                    PropagationError):
                                escaped = False
                                break
                            d = np.maximum(d, np.linalg.norm(J, axis=0))
                            radius = settings.initial_radius * max(
                                float(np.linalg.norm(d * lam)), 1.0)
                            escaped = True
                            break
                    if escaped:
                        break
            if not escaped:
                stop_reason = "radius-collapse"
                break
            continue
        iterations += 1
        step = _dogleg_step(J, Z, radius, d)
        step_scaled = float(np.linalg.norm(d * step))
        pred = float(Z @ Z) - float((Z + J @ step) @ (Z + J @ step))
        trial = lam + step
        try:
            Z_new = shooting_function(trial, problem)
            ok = True
        except (HaltedTrajectoryError, GrazingSwitchError,
                PropagationError):
            ok = False
        if ok:
            actual = float(Z @ Z) - float(Z_new @ Z_new)
            rho = actual / pred if pred > 0 else -1.0
        else:
            rho = -1.0
        if rho > 1e-4:
            lam = trial
            try:
                Z, J, y_end, n_sw = full_eval(lam)
            except (HaltedTrajectoryError, GrazingSwitchError,
                    PropagationError) as exc:
                stop_reason = f"lost-iterate-{exc}"
                break
            d = np.maximum(d, np.linalg.norm(J, axis=0))
            if rho > 0.75 and step_scaled >= 0.99 * radius:
                radius = min(2.0 * radius, settings.max_radius * max(dx0, 1.0))
            elif rho < 0.25:
                radius = 0.25 * step_scaled
        else:
            radius = 0.25 * min(radius, step_scaled)

    res_inf = float(np.max(np.abs(Z)))
    converged = res_inf < settings.residual_tol
    rank, _ = numerical_rank(J)
    delta_m = (1.0 - y_end[6]) * sc.m_i
    return SolutionRecord(
        lam0=lam, eps=problem.eps, residual_inf=res_inf,
        delta_m_kg=float(delta_m), n_switches=int(n_sw),
        converged=converged, jacobian_rank=rank, iterations=iterations,
        stop_reason=stop_reason if converged or stop_reason != "max-iterations"
        else "max-iterations")


def continuation_solve(lam0_energy, problem: ShootingProblem,
                       schedule: ContinuationSchedule | None = None,
                       settings: TrustRegionSettings | None = None,
                       callback=None):
    """Chain trust-region solves down the continuation schedule.

    Starts at eps = 1 from lam0_energy and re-solves at each scheduled eps
    using the previous solution as the guess.  On a failed step, one retry is
    made from the midpoint between the failed and the last solved eps; if the
    retry fails the chain stops and the records so far are returned.
    """
    schedule = schedule or ContinuationSchedule()
    settings = settings or TrustRegionSettings()
    records = []
    guess = np.asarray(lam0_energy, dtype=float)
    prev_eps = None
    for eps in schedule.epsilons:
        rec = trust_region_solve(guess, problem.with_eps(eps), settings)
        if not rec.converged and prev_eps is not None:
            mid = 0.5 * (prev_eps + eps)
            rec_mid = trust_region_solve(guess, problem.with_eps(mid),
                                         settings)
            if rec_mid.converged:
                rec = trust_region_solve(rec_mid.lam0, problem.with_eps(eps),
                                         settings)
        records.append(rec)
        if callback is not None:
            callback(rec)
        if not rec.converged:
            break
        guess = rec.lam0
        prev_eps = eps
    return records
