"""Exception hierarchy shared by all modules."""


class DislocoreError(Exception):
    """Base class for every error raised by the package."""


class DomainError(DislocoreError, ValueError):
    """Argument outside the domain of a function (e.g. x = 0 for a singular potential)."""


class OrderError(DislocoreError, ValueError):
    """Derivative order beyond what is supported (k > 4)."""


class StabilityError(DislocoreError, ValueError):
    """A positivity requirement (alpha > 0, gamma''(0) > 0) is violated."""


class ConvergenceError(DislocoreError, RuntimeError):
    """An iterative solver did not converge."""


class SingularGammaError(DislocoreError, ValueError):
    """The misfit density vanishes inside (0, 1)."""


class ToleranceError(DislocoreError, RuntimeError):
    """A requested accuracy could not be met."""


class WindowError(DislocoreError, ValueError):
    """The atomistic window is too small for the interaction cutoff."""


class NonPositiveCurvatureError(ConvergenceError):
    """Conjugate gradients met a direction with <Hp, p> <= 0."""


class ConfigError(DislocoreError, ValueError):
    """Malformed or missing run configuration; ``key`` names the culprit."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
