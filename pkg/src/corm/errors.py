"""Exception hierarchy shared by every module."""


class CormError(Exception):
    """Base class for all errors raised by the package."""


class NonPositiveParameter(CormError, ValueError):
    pass


class UnsupportedFamily(CormError, ValueError):
    pass


class InvalidIndex(CormError, ValueError):
    """Stability index outside (0, 1)."""


class IntegrabilityFailure(CormError):
    """A directing measure does not satisfy int min(1, z) rho(dz) < inf."""


class NonConvergentMoment(CormError):
    pass


class EvaluationFailure(CormError):
    """Integrand produced NaN inside the integration domain."""


class NonPositiveSamples(CormError, ValueError):
    pass


class StepUnderflow(CormError):
    pass


class NoisePlateau(CormError):
    """Richardson extrapolation did not settle to the requested accuracy."""


class DegenerateGrid(CormError, ValueError):
    pass


class IllPosedSpec(CormError):
    pass


class TruncationBudgetExceeded(CormError):
    pass


class TruncationBias(CormError):
    pass


class NonExponentialScores(CormError, ValueError):
    pass


class DivergentIntensity(CormError):
    """A marginal or multivariate intensity integral does not converge."""


class SpecParseError(CormError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
