"""Exception types shared across the package."""


class PalignError(Exception):
    """Base class for package errors."""


class CollisionError(PalignError):
    """Two particles occupy the same position while the kernel is singular."""


class NonFiniteError(PalignError):
    """A computed quantity is NaN or infinite."""


class StepStallError(PalignError):
    """The adaptive stepper needs a step below ``dt_min``."""


class EmptyClusterError(PalignError):
    """Cluster diagnostics requested for fewer than two indices."""


class DomainError(PalignError):
    """Parameters outside the validity region of a closed-form result."""


class DegenerateSupportError(PalignError):
    """Initial density support has zero volume for the requested kind."""


class LPInfeasibleError(PalignError):
    """Linear program has no feasible point (cannot happen for the
    bounded-Lipschitz program, which always admits the zero function)."""


class LPUnboundedError(PalignError):
    """Linear program objective is unbounded above."""


class SolverToleranceError(PalignError):
    """LP solve finished with residuals above the accepted tolerance."""
