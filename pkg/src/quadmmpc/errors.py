"""Exception types shared across the package."""


class QuadmmpcError(Exception):
    """Base class for all package-specific failures."""


class NumericsError(QuadmmpcError):
    """A numerical routine could not produce a trustworthy result."""


class GimbalLockError(QuadmmpcError):
    """Pitch angle too close to +/-pi/2 for the Euler kinematics to be valid."""


class QpInfeasibleError(QuadmmpcError):
    """Quadratic program has an empty feasible set."""
