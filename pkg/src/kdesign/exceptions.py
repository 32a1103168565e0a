"""
Custom exceptions for design construction and auditing.
"""


class DesignError(Exception):
    """Base exception for kdesign operations."""


class PreconditionError(DesignError):
    """Raised when a documented precondition of an operation is violated."""

    def __init__(self, message: str) -> None:
        self.reason = message
        super().__init__(message)


class ConfigurationError(PreconditionError):
    """Raised when a parameter is outside what the library supports."""

    def __init__(self, parameter: str, value: object, message: str | None = None) -> None:
        self.parameter = parameter
        self.value = value
        super().__init__(message or f"Unsupported {parameter}: {value!r}")


class ContractViolationError(PreconditionError):
    """Raised when an input breaks an operation's contract (e.g. uncovered wires)."""


class FieldMismatchError(DesignError, TypeError):
    """Raised when field operands come from different binary fields."""

    def __init__(self, left_m: int, right_m: int) -> None:
        self.left_m = left_m
        self.right_m = right_m
        super().__init__(f"Field mismatch: GF(2^{left_m}) vs GF(2^{right_m})")


class ResourceLimitError(DesignError):
    """Raised when a dense size or circuit size exceeds its limit."""

    def __init__(self, quantity: str, value: int | float, limit: int | float) -> None:
        self.quantity = quantity
        self.value = value
        self.limit = limit
        super().__init__(f"Resource limit exceeded: {quantity} = {value} > {limit}")


class AncillaNotRestoredError(DesignError):
    """Raised when a reversible circuit leaves ancilla wires dirty."""

    def __init__(self, wires: list[int]) -> None:
        self.wires = wires
        super().__init__(f"Ancilla wires not restored to 0: {wires[:8]}")
