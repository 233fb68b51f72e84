"""Exception hierarchy."""


class PHSError(Exception):
    """Base class for workbench errors."""


class ValidationError(PHSError, ValueError):
    """Input data violates a stated invariant."""


class BoundaryError(PHSError):
    """Boundary matrices do not satisfy the structural hypotheses."""


class DiagonalizationError(PHSError):
    """Pointwise diagonalization of P1 H is not smooth."""


class StabilityError(PHSError):
    """A quantity requiring a stable generator was requested for an unstable one."""


class SolverError(PHSError):
    """A linear, eigenvalue or ODE solve broke down."""
