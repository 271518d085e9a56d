"""Non-dimensional CR3BP kinematics and force model.

All quantities use the standard synodic non-dimensionalization: the primary
separation is 1 LU, the rotation period is 2*pi TU, and the primaries sit at
(-mu, 0, 0) and (1-mu, 0, 0).  Mass is scaled by the initial spacecraft mass.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _core
from .errors import RootBracketingError, SingularityError

STANDARD_GRAVITY = 9.81  # m/s^2
SINGULARITY_RADIUS = _core.SINGULARITY_RADIUS


@dataclass(frozen=True)
class SystemConstants:
    """Non-dimensionalization constants of one CR3BP system instance.

    mu is the dimensionless mass parameter; tu, lu, vu are the time [s],
    length [km], and velocity [km/s] units; mu_mass [kg] equals the
    scenario's initial spacecraft mass.
    """

    mu: float
    tu: float
    lu: float
    vu: float
    mu_mass: float

    def __post_init__(self):
        if not 0.0 < self.mu < 0.5:
            raise ValueError(f"mass parameter out of range: {self.mu}")
        if abs(self.vu - self.lu / self.tu) / self.vu >= 1e-6:
            raise ValueError("velocity unit inconsistent with lu/tu")


@dataclass(frozen=True)
class SpacecraftParams:
    """Spacecraft propulsion constants plus the system they are scaled by.

    c_nd and t_max_nd are the exhaust velocity and maximum thrust divided by
    the velocity unit and the force unit mu_mass*lu/tu^2 (lu in meters).
    """

    m_i: float
    t_max: float
    isp: float
    constants: SystemConstants
    g0: float = STANDARD_GRAVITY
    c_nd: float = field(init=False)
    t_max_nd: float = field(init=False)

    def __post_init__(self):
        if self.m_i <= 0 or self.isp <= 0 or self.g0 <= 0:
            raise ValueError("spacecraft parameters must be positive")
        if self.t_max < 0:
            # zero thrust is allowed for degenerate test scenarios
            raise ValueError("maximum thrust must be non-negative")
        k = self.constants
        object.__setattr__(self, "c_nd", self.isp * self.g0 / (k.vu * 1000.0))
        object.__setattr__(
            self, "t_max_nd",
            self.t_max * k.tu ** 2 / (self.m_i * k.lu * 1000.0))

    @property
    def exhaust_velocity(self):
        """Dimensional exhaust velocity isp*g0 in m/s."""
        return self.isp * self.g0


def primary_distances(r, mu):
    """Distances of position r from the first and second primary."""
    r = np.asarray(r, dtype=float)
    return _core.distances(r[0], r[1], r[2], mu)


def gravity_accel(r, mu):
    """Gravity plus centrifugal acceleration g(r) in the rotating frame."""
    r = np.asarray(r, dtype=float)
    r1, r2 = _core.distances(r[0], r[1], r[2], mu)
    if r1 < SINGULARITY_RADIUS or r2 < SINGULARITY_RADIUS:
        raise SingularityError(f"position within guard radius: r1={r1}, r2={r2}")
    out = np.empty(3)
    _core.gravity(r[0], r[1], r[2], mu, out)
    return out


def coriolis_term(v):
    """Rotating-frame velocity coupling h(v) = (2 vy, -2 vx, 0)."""
    v = np.asarray(v, dtype=float)
    return np.array([2.0 * v[1], -2.0 * v[0], 0.0])


def gravity_gradient(r, mu):
    """3x3 Jacobian of gravity_accel at r (symmetric)."""
    r = np.asarray(r, dtype=float)
    r1, r2 = _core.distances(r[0], r[1], r[2], mu)
    if r1 < SINGULARITY_RADIUS or r2 < SINGULARITY_RADIUS:
        raise SingularityError(f"position within guard radius: r1={r1}, r2={r2}")
    G = np.empty((3, 3))
    _core.gravity_gradient(r[0], r[1], r[2], mu, G)
    return G


def coriolis_jacobian():
    """Constant Jacobian of coriolis_term."""
    H = np.zeros((3, 3))
    H[0, 1] = 2.0
    H[1, 0] = -2.0
    return H


def _collinear_residual(x, mu):
    d1 = x + mu
    d2 = x + mu - 1.0
    return (x - (1.0 - mu) * d1 / abs(d1) ** 3 - mu * d2 / abs(d2) ** 3)


def collinear_equilibrium(mu, index):
    """x-coordinate of the collinear equilibrium L1, L2, or L3.

    Bracketed bisection carried to float resolution; raises if the bracket
    does not straddle a sign change.
    """
    if not 0.0 < mu < 0.5:
        raise ValueError(f"mass parameter out of range: {mu}")
    pad = 1e-9
    if index == 1:
        lo, hi = -mu + pad, 1.0 - mu - pad
    elif index == 2:
        lo, hi = 1.0 - mu + pad, 2.5
    elif index == 3:
        lo, hi = -2.5, -mu - pad
    else:
        raise ValueError(f"collinear point index must be 1, 2, or 3: {index}")
    flo = _collinear_residual(lo, mu)
    fhi = _collinear_residual(hi, mu)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise RootBracketingError(
            f"no sign change for L{index} in [{lo}, {hi}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        fmid = _collinear_residual(mid, mu)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    return 0.5 * (lo + hi)


def jacobi_constant(r, v, mu):
    """Jacobi integral C = x^2 + y^2 + 2(1-mu)/r1 + 2 mu/r2 - |v|^2."""
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    r1, r2 = _core.distances(r[0], r[1], r[2], mu)
    if r1 < SINGULARITY_RADIUS or r2 < SINGULARITY_RADIUS:
        raise SingularityError(f"position within guard radius: r1={r1}, r2={r2}")
    return (r[0] ** 2 + r[1] ** 2 + 2.0 * (1.0 - mu) / r1 + 2.0 * mu / r2
            - float(v @ v))
