"""Exception hierarchy shared across towerbench."""


class TowerbenchError(Exception):
    """Base class for all package errors."""


# level model
class SchemaError(TowerbenchError):
    """The level or catalog document is malformed."""


class ValidationError(TowerbenchError):
    """A level invariant is violated; ``field`` names the offending path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnknownUnit(TowerbenchError):
    """A unit or enemy id does not resolve in the catalog."""


class RangeError(TowerbenchError, ValueError):
    """A numeric argument lies outside its permitted range."""


# simulator
class TerminalStateError(TowerbenchError):
    """The game has already ended."""


class PlacementError(TowerbenchError):
    """Base class for rejected unit placements."""


class InsufficientSun(PlacementError):
    pass


class CooldownActive(PlacementError):
    pass


class CellOccupied(PlacementError):
    pass


class TerrainIncompatible(PlacementError):
    pass


class OutOfBounds(PlacementError):
    pass


# environment
class MaskedActionError(TowerbenchError):
    """The submitted action is not available under the current mask."""


class TerminalUseError(TowerbenchError):
    """``step`` was called after the episode terminated."""


# learning
class ShapeError(TowerbenchError, ValueError):
    pass


class LengthMismatch(TowerbenchError, ValueError):
    pass


class NonFiniteLoss(TowerbenchError, FloatingPointError):
    pass


class CheckpointError(TowerbenchError):
    pass
