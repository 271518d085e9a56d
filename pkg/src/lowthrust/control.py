"""Optimal-control layer of the extremal system.

Switching function, homotopy throttle law, primer direction, Hamiltonian,
the coupled 14-dimensional state/co-state rates, their Jacobian per throttle
regime, and the jump matrix across a throttle discontinuity.
"""

from dataclasses import dataclass

import numpy as np

from . import _core
from .dynamics import SpacecraftParams, coriolis_term, gravity_accel
from .errors import (DegeneratePrimerError, GrazingSwitchError,
                     OnSwitchSurfaceError, SingularityError)

DEGENERATE_PRIMER_NORM = _core.DEGENERATE_PRIMER_NORM
GRAZING_SDOT_TOL = 1e-10


@dataclass
class ExtendedState:
    """14-dimensional extremal state [r, v, m, lam_r, lam_v, lam_m]."""

    r: np.ndarray
    v: np.ndarray
    m: float
    lam_r: np.ndarray
    lam_v: np.ndarray
    lam_m: float

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.lam_r = np.asarray(self.lam_r, dtype=float)
        self.lam_v = np.asarray(self.lam_v, dtype=float)
        if not 0.0 < self.m <= 1.0:
            raise ValueError(f"mass out of (0, 1]: {self.m}")
        if not np.all(np.isfinite(self.to_vector())):
            raise ValueError("extended state has non-finite components")

    def to_vector(self):
        y = np.empty(14)
        y[0:3] = self.r
        y[3:6] = self.v
        y[6] = self.m
        y[7:10] = self.lam_r
        y[10:13] = self.lam_v
        y[13] = self.lam_m
        return y

    @classmethod
    def from_vector(cls, y):
        y = np.asarray(y, dtype=float)
        return cls(r=y[0:3].copy(), v=y[3:6].copy(), m=float(y[6]),
                   lam_r=y[7:10].copy(), lam_v=y[10:13].copy(),
                   lam_m=float(y[13]))


@dataclass(frozen=True)
class HomotopyParameter:
    """Energy-to-fuel perturbation parameter, 1 = energy, 0 = fuel."""

    eps: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"homotopy parameter out of [0, 1]: {self.eps}")


@dataclass(frozen=True)
class ControlEvaluation:
    """Throttle-law evaluation at one state: switching value, throttle,
    thrust direction (None when the primer is degenerate and u = 0), and
    Hamiltonian."""

    s: float
    u: float
    alpha: np.ndarray | None
    h_val: float


def _eps_value(eps):
    if isinstance(eps, HomotopyParameter):
        return eps.eps
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"homotopy parameter out of [0, 1]: {eps}")
    return eps


def as_state_vector(state):
    """Accept an ExtendedState or a length-14 array."""
    if isinstance(state, ExtendedState):
        return state.to_vector()
    y = np.asarray(state, dtype=float)
    if y.shape != (14,):
        raise ValueError(f"expected a 14-vector, got shape {y.shape}")
    return y


def switching_function(state, c_nd):
    """S = -(c/m) |lam_v| - lam_m + 1."""
    y = as_state_vector(state)
    if y[6] <= 0.0:
        raise ValueError("mass must be positive")
    return float(_core.switching_value(y, c_nd))


def optimal_throttle(s, eps):
    """Homotopy throttle law; bang-bang at eps = 0 with coast tie-break."""
    e = _eps_value(eps)
    if e > 0.0:
        if s > e:
            return 0.0
        if s < -e:
            return 1.0
        return (e - s) / (2.0 * e)
    return 1.0 if s < 0.0 else 0.0


def primer_direction(lam_v):
    """Unit thrust direction -lam_v/|lam_v|."""
    lam_v = np.asarray(lam_v, dtype=float)
    n = float(np.linalg.norm(lam_v))
    if n <= DEGENERATE_PRIMER_NORM:
        raise DegeneratePrimerError(f"|lam_v| = {n} below direction threshold")
    return -lam_v / n


def hamiltonian(state, eps, sc: SpacecraftParams):
    """H = lam_r.v + lam_v.(g + h) + (u T/c)(S - eps + eps u)."""
    y = as_state_vector(state)
    e = _eps_value(eps)
    s = switching_function(y, sc.c_nd)
    u = optimal_throttle(s, e)
    g = gravity_accel(y[0:3], sc.constants.mu)
    h = coriolis_term(y[3:6])
    val = float(y[7:10] @ y[3:6] + y[10:13] @ (g + h))
    if u > 0.0:
        val += u * sc.t_max_nd / sc.c_nd * (s - e + e * u)
    return val


def evaluate_control(state, eps, sc: SpacecraftParams):
    """Bundle S, u, thrust direction, and Hamiltonian at one state."""
    y = as_state_vector(state)
    e = _eps_value(eps)
    s = switching_function(y, sc.c_nd)
    u = optimal_throttle(s, e)
    alpha = None
    if u > 0.0 or float(np.linalg.norm(y[10:13])) > DEGENERATE_PRIMER_NORM:
        alpha = primer_direction(y[10:13])
    return ControlEvaluation(s=s, u=u, alpha=alpha,
                             h_val=hamiltonian(y, e, sc))


def extremal_rhs(t, state, eps, sc: SpacecraftParams):
    """Time derivative of the 14-dimensional extremal state.

    The system is autonomous; t is accepted for ODE-solver compatibility.
    """
    del t
    y = as_state_vector(state)
    e = _eps_value(eps)
    s = _core.switching_value(y, sc.c_nd)
    regime = _core.regime_from_switching(s, e)
    out = np.empty(14)
    status = _core.rhs14(y, sc.constants.mu, e, sc.t_max_nd, sc.c_nd, regime,
                         out)
    _raise_for_status(status)
    return out


def rhs_jacobian(t, state, eps, sc: SpacecraftParams):
    """14x14 Jacobian of extremal_rhs for the current throttle regime."""
    del t
    y = as_state_vector(state)
    e = _eps_value(eps)
    s = _core.switching_value(y, sc.c_nd)
    scale = 1e-14 * max(1.0, abs(s), e)
    if e > 0.0:
        if abs(s - e) < scale or abs(s + e) < scale:
            raise OnSwitchSurfaceError(f"S = {s} on a kink at eps = {e}")
    elif abs(s) < scale:
        raise OnSwitchSurfaceError("S = 0 at eps = 0")
    regime = _core.regime_from_switching(s, e)
    F = np.empty((14, 14))
    status = _core.fjac14(y, sc.constants.mu, e, sc.t_max_nd, sc.c_nd, regime,
                          F)
    _raise_for_status(status)
    return F


def switching_gradient(state, sc: SpacecraftParams):
    """dS/dy (14-vector) and the time rate of S along the flow."""
    y = as_state_vector(state)
    if float(np.linalg.norm(y[10:13])) <= DEGENERATE_PRIMER_NORM:
        raise DegeneratePrimerError("switching gradient undefined at lam_v = 0")
    ds = np.empty(14)
    s_dot = _core.switching_gradient14(y, sc.c_nd, ds)
    return ds, float(s_dot)


def _rates_with_throttle(y, u, sc):
    """Extremal rates with an imposed throttle value."""
    out = np.empty(14)
    g = gravity_accel(y[0:3], sc.constants.mu)
    out[0:3] = y[3:6]
    out[3:6] = g + coriolis_term(y[3:6])
    lam_v = y[10:13]
    lvn = float(np.linalg.norm(lam_v))
    if u > 0.0:
        if lvn <= DEGENERATE_PRIMER_NORM:
            raise DegeneratePrimerError("thrust direction undefined")
        out[3:6] -= (u * sc.t_max_nd / (y[6] * lvn)) * lam_v
        out[6] = -u * sc.t_max_nd / sc.c_nd
        out[13] = -lvn * u * sc.t_max_nd / y[6] ** 2
    else:
        out[6] = 0.0
        out[13] = 0.0
    G = np.empty((3, 3))
    _core.gravity_gradient(y[0], y[1], y[2], sc.constants.mu, G)
    out[7:10] = -G.T @ lam_v
    # H^T lam_v = (-2 lv_y, 2 lv_x, 0)
    out[10] = -y[7] + 2.0 * lam_v[1]
    out[11] = -y[8] - 2.0 * lam_v[0]
    out[12] = -y[9]
    return out


def _infer_throttle(y, sc):
    s = _core.switching_value(y, sc.c_nd)
    if abs(s) < 1e-9:
        return None
    return 1.0 if s < 0.0 else 0.0


def jump_matrix(state_minus, state_plus, sc: SpacecraftParams,
                u_minus=None, u_plus=None):
    """Rank-one STM correction across a throttle discontinuity.

    The two states share one epoch and state vector; they differ through the
    throttle regime on either side of the switch.  At an exact switch the
    regime is not recoverable from the state alone, so callers there must
    pass u_minus/u_plus explicitly.
    """
    ym = as_state_vector(state_minus)
    yp = as_state_vector(state_plus)
    if u_minus is None:
        u_minus = _infer_throttle(ym, sc)
    if u_plus is None:
        u_plus = _infer_throttle(yp, sc)
    if u_minus is None or u_plus is None:
        raise ValueError("throttle regime ambiguous at the switch; pass "
                         "u_minus/u_plus explicitly")
    ds, s_dot = switching_gradient(ym, sc)
    if abs(s_dot) < GRAZING_SDOT_TOL:
        raise GrazingSwitchError(f"|S-dot| = {abs(s_dot)} below tolerance")
    dy_minus = _rates_with_throttle(ym, u_minus, sc)
    dy_plus = _rates_with_throttle(yp, u_plus, sc)
    return np.eye(14) + np.outer(dy_plus - dy_minus, ds / s_dot)


def _raise_for_status(status):
    if status == _core.STATUS_OK:
        return
    if status == _core.ERR_SINGULARITY:
        raise SingularityError("state within the singularity guard radius of "
                               "a primary")
    if status == _core.ERR_DEGENERATE_PRIMER:
        raise DegeneratePrimerError("|lam_v| below direction threshold with "
                                    "positive throttle")
    raise RuntimeError(f"unexpected core status {status}")
