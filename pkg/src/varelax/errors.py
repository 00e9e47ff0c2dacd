"""Exception hierarchy shared across the package."""


class VarelaxError(Exception):
    """Base class for all package-specific failures."""


class DegenerateInputError(VarelaxError):
    """Input has too few points or is geometrically degenerate."""


class OutOfDomainError(VarelaxError):
    """Query point lies outside the discrete envelope's domain."""


class InfeasibleError(VarelaxError):
    """No admissible trajectory connects the prescribed endpoints."""


class CertificateError(VarelaxError):
    """A numerical certificate could not be established or is inconsistent."""


class NotAutonomousError(VarelaxError):
    """Operation requires a time-independent problem."""


class SchemaError(VarelaxError):
    """Problem file or trajectory file violates the input contract."""
