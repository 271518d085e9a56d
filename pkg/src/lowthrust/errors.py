"""Exception types raised across the package."""


class LowThrustError(Exception):
    """Base class for all package errors."""


class SingularityError(LowThrustError):
    """State evaluated inside the singularity guard radius of a primary."""


class DegeneratePrimerError(LowThrustError):
    """Thrust direction requested while the velocity co-state is (near) zero."""


class OnSwitchSurfaceError(LowThrustError):
    """Throttle-regime Jacobian requested exactly at a switching kink."""


class GrazingSwitchError(LowThrustError):
    """Tangential switching-surface crossing: the jump matrix is singular."""


class PropagationError(LowThrustError):
    """Numerical integration could not be completed."""


class MaxStepsExceededError(PropagationError):
    """Step budget exhausted before reaching the final time."""


class StepSizeUnderflowError(PropagationError):
    """Required step size fell below time resolution."""


class HaltedTrajectoryError(LowThrustError):
    """A physical halt (collision, mass floor) interrupted an evaluation that
    required the full arc."""

    def __init__(self, reason):
        super().__init__(f"trajectory halted: {reason}")
        self.reason = reason


class RootBracketingError(LowThrustError):
    """A bracketing root search failed to isolate a sign change."""


class ScenarioFormatError(LowThrustError):
    """Scenario configuration file is malformed."""
