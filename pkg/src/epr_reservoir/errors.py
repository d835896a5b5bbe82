"""Exception and warning types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class RegimeError(ValueError):
    """Physical parameters outside the regime where the model is defined."""


class DegenerateDriveError(RegimeError):
    """Drive sits at (or numerically next to) |tan(theta)| = 1, i.e. mu -> 1."""


class NumericalError(RuntimeError):
    """A numerical self-check failed (matrix exponential, integrator, leakage)."""


class RegimeWarning(UserWarning):
    """A validity condition of the approximations (g << Omega, Omega_b tau << 1, ...) is violated."""


class TruncationWarning(UserWarning):
    """Population in the top Fock level exceeds the leakage threshold.

    Attributes
    ----------
    leakage : float
        Offending top-level population.
    threshold : float
        Threshold that was exceeded.
    """

    def __init__(self, message, leakage=float("nan"), threshold=float("nan")):
        super().__init__(message)
        self.leakage = leakage
        self.threshold = threshold
