"""Exception hierarchy shared across the package."""


class FbstError(Exception):
    """Base class for all errors raised by gpfbst."""


class NumericalError(FbstError):
    """Base class for numerical failures (CLI exit code 3)."""


class NotPositiveDefinite(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class NoBracket(NumericalError):
    pass


class IntegrationFailure(NumericalError):
    pass


class NumericalFailure(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class DimensionMismatch(FbstError, ValueError):
    pass


class DuplicateAtoms(FbstError, ValueError):
    pass


class NegativeRadicand(FbstError, ValueError):
    def __init__(self, t, value):
        super().__init__(f"negative radicand {value:.6g} at t={t}")
        self.t = t
        self.value = value


class DataError(FbstError):
    """Base class for dataset problems (CLI exit code 2)."""


class ParseError(DataError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyDataset(DataError):
    pass


class ConfigError(FbstError):
    """Invalid or unknown configuration (CLI exit code 1)."""
