"""Exception hierarchy for relaxcrb."""


class RelaxCrbError(Exception):
    """Base class for all relaxcrb errors."""


class ProtocolError(RelaxCrbError, ValueError):
    """A sequence protocol violates its construction invariants."""


class NonFiniteModel(RelaxCrbError, ArithmeticError):
    """The signal model produced NaN or infinite values."""


class DegenerateStep(RelaxCrbError, ValueError):
    """Finite-difference step is outside the usable range."""


class SingularInformation(RelaxCrbError, ArithmeticError):
    """The Fisher information matrix is singular or ill-conditioned."""


class CollinearVectors(RelaxCrbError, ArithmeticError):
    """Weighting and sensitivity vectors are (numerically) collinear."""


class NoFeasiblePoint(RelaxCrbError):
    """No restart of the protocol optimizer produced a usable protocol."""


class FitDiverged(RelaxCrbError):
    """A least-squares fit hit its evaluation budget or returned non-finite values."""


class AllTrialsFailed(RelaxCrbError):
    """Every Monte Carlo fit at a tissue point failed."""


class ConfigError(RelaxCrbError, ValueError):
    """Invalid run configuration."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class MissingField(ConfigError):
    """A required configuration field is absent."""


class UnitError(ConfigError):
    """A timing/angle field lacks (or has an unknown) unit."""


class PhysicalPlausibilityWarning(UserWarning):
    """Tissue parameters are legal but physically unusual (e.g. T2 > T1)."""
