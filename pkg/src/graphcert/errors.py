"""Exception hierarchy shared by every module."""


class GraphCertError(Exception):
    """Base class for all errors raised by graphcert."""


class ValidationError(GraphCertError, ValueError):
    """An argument violates a documented precondition."""


class DimensionError(ValidationError):
    """Operands act on a different number of qubits."""


class CapacityError(GraphCertError):
    """A dense representation would exceed one of the configured size caps."""

    def __init__(self, what: str, size: int, limit: int):
        self.what = what
        self.size = size
        self.limit = limit
        super().__init__(f"{what}: {size} qubits exceeds the cap of {limit}")


class PatternFlowError(GraphCertError):
    """A measurement pattern does not induce a map proportional to a unitary."""


class InsufficientSharesError(GraphCertError):
    """Fewer shares than the reconstruction threshold were supplied."""
