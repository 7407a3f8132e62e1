"""Exception types raised across the package."""


class ProtoPruneError(Exception):
    """Base class for all package errors."""


class ZeroVector(ProtoPruneError, ValueError):
    """A vector too close to zero to be projected onto the sphere."""


class DimensionMismatch(ProtoPruneError, ValueError):
    pass


class BadLabel(ProtoPruneError, ValueError):
    """A class index outside ``[0, n_classes)``."""


class SingleClass(ProtoPruneError, ValueError):
    """An operation that needs at least two classes got one."""


class ModeError(ProtoPruneError, RuntimeError):
    pass


class BudgetExceedsPool(ProtoPruneError, ValueError):
    """Requested more samples than the pool holds."""


class EmptyGraph(ProtoPruneError, ValueError):
    pass


class EmptyClass(ProtoPruneError, ValueError):
    pass


class ParseError(ProtoPruneError, ValueError):
    def __init__(self, path, lineno, message):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class InconsistentIndicator(ProtoPruneError, ValueError):
    pass


class ConfigError(ProtoPruneError, ValueError):
    """Invalid run configuration; ``flag`` names the offending option."""

    def __init__(self, flag, message):
        self.flag = flag
        super().__init__(f"{flag}: {message}")
