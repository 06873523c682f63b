"""Exception types shared across the package."""


class KernelSpectraError(Exception):
    """Base class for all package-specific errors."""


class EnvelopeError(KernelSpectraError):
    """Envelope produced a non-finite value; carries the offending entry."""

    def __init__(self, message: str, i: int | None = None, j: int | None = None,
                 x: float | None = None):
        super().__init__(message)
        self.i = i
        self.j = j
        self.x = x


class CapabilityError(KernelSpectraError):
    """Requested computation is not available for the given inputs."""


class DerivativeError(CapabilityError):
    """Derivative value unavailable and numeric differentiation failed."""


class DegeneracyError(KernelSpectraError):
    """Moment problem degenerate: measure supported on too few points."""


class SolverError(KernelSpectraError):
    """Fixed-point solver failed to converge or left the Herglotz domain."""

    def __init__(self, message: str, z: complex | None = None,
                 residual: float | None = None):
        super().__init__(message)
        self.z = z
        self.residual = residual


class NumericalError(KernelSpectraError):
    """A dense linear-algebra routine failed; carries matrix provenance."""
