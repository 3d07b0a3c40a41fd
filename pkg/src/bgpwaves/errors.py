"""Exception hierarchy shared by the solver modules and the CLI."""


class BgpWavesError(Exception):
    """Base class; the CLI maps subclasses to exit codes via ``exit_code``."""

    exit_code = 1


class ConfigError(BgpWavesError, ValueError):
    exit_code = 1


class DomainError(BgpWavesError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 1


class UnresolvedTail(DomainError):
    """The wave has not decayed to the resolution floor at the right end of the grid."""


class DivergenceError(BgpWavesError, ArithmeticError):
    """An improper integral does not converge given the tail descriptors."""

    exit_code = 1


class FitError(BgpWavesError, ValueError):
    exit_code = 1


class NoWave(BgpWavesError):
    """No traveling wave exists at the requested speed."""

    exit_code = 2


class NoWaveAtHeight(NoWave):
    """The speed admits waves, but none passes through the requested height."""

    def __init__(self, msg, theta_c=None):
        super().__init__(msg)
        self.theta_c = theta_c


class RangeError(NoWave):
    exit_code = 2


class FeasibilityError(BgpWavesError):
    exit_code = 2


class ToleranceError(BgpWavesError, ArithmeticError):
    def __init__(self, msg, gap=None):
        super().__init__(msg)
        self.gap = gap

    exit_code = 4


class NonConvergence(BgpWavesError, ArithmeticError):
    exit_code = 4

    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


class BracketError(BgpWavesError, ArithmeticError):
    exit_code = 4

    def __init__(self, msg, endpoints=None):
        super().__init__(msg)
        self.endpoints = endpoints


class NumericError(BgpWavesError, ArithmeticError):
    exit_code = 4
