"""Exception types raised across the toolkit."""


class MrfError(Exception):
    """Base class for all toolkit errors."""


class PreconditionError(MrfError, ValueError):
    """An operation was called outside its documented domain."""


class OutOfDomainError(MrfError, ValueError):
    """A query point lies outside the grid box."""


class RangeError(MrfError, ValueError):
    """A table lookup or inverse falls outside the tabulated range."""


class IntegrationDivergedError(MrfError, ArithmeticError):
    """The state became non-finite during integration."""

    def __init__(self, message, last_time):
        super().__init__(message)
        self.last_time = last_time


class DegenerateStencilError(MrfError):
    """Every control moves every interior node out of the box."""


class StuckError(MrfError):
    """No control keeps the one-step stencil inside the box."""

    def __init__(self, message, position):
        super().__init__(message)
        self.position = position


class SynthesisStalledError(MrfError):
    """Greedy control failed to halve the level within the safety window."""

    def __init__(self, message, segment=None):
        super().__init__(message)
        self.segment = segment


class ConstructionError(MrfError):
    """A majorant or table construction failed its own verification."""


class GeometryError(MrfError):
    """A sampled region (annulus, strip) turned out to be empty."""


class ControllerInadequateError(MrfError):
    """A supplied controller did not advance a strip within the time cap."""

    def __init__(self, message, start):
        super().__init__(message)
        self.start = start


class InvalidKLError(MrfError, ValueError):
    """A function expected to be of class KL violates a monotonicity axiom."""


class ConfigError(MrfError, ValueError):
    """Malformed run configuration."""


class StageError(MrfError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
