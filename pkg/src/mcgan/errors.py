"""Exception types raised across the package."""


class McganError(Exception):
    """Base class for all package errors."""


class EmptyGlyph(McganError, ValueError):
    pass


class EmptyObservationSet(McganError, ValueError):
    pass


class ShapeError(McganError, ValueError):
    pass


class ManifestError(McganError):
    pass


class CheckpointError(McganError):
    pass


class ConfigError(McganError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DivergenceError(McganError, FloatingPointError):
    pass


class UntrainedStateError(McganError, RuntimeError):
    pass
