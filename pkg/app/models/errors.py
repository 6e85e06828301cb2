from typing import Any, List, Optional


class TSeqError(Exception):
    """Base class for every failure the library reports. `exit_status` feeds the CLI."""

    exit_status: int = 3

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class InvalidInputError(TSeqError, ValueError):
    """Malformed element text, index out of range, mismatched spaces, bad files."""

    exit_status = 3


class PreconditionError(TSeqError):
    """An operation was called outside its documented precondition."""

    exit_status = 3


class WindowExhaustedError(TSeqError):
    """Base for results that are cut off by the finite window or a budget."""

    exit_status = 2


class TableExhaustedError(WindowExhaustedError):
    def __init__(self, index: int, length: int):
        super().__init__(f"table sequence has {length} terms, term {index} requested")
        self.index = index
        self.length = length


class LayerBudgetExceededError(WindowExhaustedError):
    def __init__(self, depth_reached: int, size: int, cap: int):
        super().__init__(
            f"layer cardinality cap {cap} exceeded while building depth {depth_reached + 1} "
            f"(complete through depth {depth_reached}, {size} elements)"
        )
        self.depth_reached = depth_reached
        self.size = size
        self.cap = cap


class OutsideWindowError(WindowExhaustedError):
    """A word length needed by the operation is UNKNOWN on the built window."""


class LayersTooShallowError(WindowExhaustedError):
    def __init__(self, needed: int, available: int, what: str):
        super().__init__(f"{what} needs layers through depth {needed}, built only to {available}")
        self.needed = needed
        self.available = available


class WindowTooShallowError(WindowExhaustedError):
    pass


class ResourceCapError(WindowExhaustedError):
    pass


class ExtractionExhaustedError(WindowExhaustedError):
    def __init__(self, message: str, partial: Any, position: int):
        super().__init__(message)
        self.partial = partial
        self.position = position


class ChainExhaustedError(WindowExhaustedError):
    def __init__(self, message: str, partial: Any, step: int, side: Optional[str] = None):
        super().__init__(message)
        self.partial = partial
        self.step = step
        self.side = side


def error_payload(exc: TSeqError) -> dict:
    """Flat description of an error for records output"""
    payload = {"error": type(exc).__name__, "message": exc.message, "exit_status": exc.exit_status}
    for attr in ("depth_reached", "size", "needed", "available", "position", "step", "index"):
        if hasattr(exc, attr):
            payload[attr] = getattr(exc, attr)
    return payload


__all__: List[str] = [
    "TSeqError",
    "InvalidInputError",
    "PreconditionError",
    "WindowExhaustedError",
    "TableExhaustedError",
    "LayerBudgetExceededError",
    "OutsideWindowError",
    "LayersTooShallowError",
    "WindowTooShallowError",
    "ResourceCapError",
    "ExtractionExhaustedError",
    "ChainExhaustedError",
    "error_payload",
]
