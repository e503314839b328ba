"""Exception hierarchy.

Two broad classes matter to callers: input problems (bad files, bad
configuration) and model-domain problems (a request the model itself cannot
satisfy, such as relaxing a market with unequal demand and supply rates).
The CLI maps the former to exit code 1 and the latter to exit code 2; the
HTTP service maps them to 400 and 409.
"""


class StockvolveError(Exception):
    """Base class for all library errors."""


class InputError(StockvolveError):
    """Bad input data or configuration (CLI exit 1, HTTP 400)."""


class ModelDomainError(StockvolveError):
    """The model cannot satisfy the request (CLI exit 2, HTTP 409)."""


# --- kinetics ---

class StepTooLarge(ModelDomainError):
    """Integrator step would overshoot the nonnegativity constraint."""


class NoStationaryState(ModelDomainError):
    """Demand and supply rates differ, so the kinetics have no fixed point."""


class NotConverged(ModelDomainError):
    """Relaxation exhausted its step budget before reaching tolerance."""


# --- price distribution / curves ---

class NoIntersection(ModelDomainError):
    """Demand and supply curves do not cross on the grid."""


class DegenerateCurves(ModelDomainError):
    """Purchase density cannot be normalized (zero overlap)."""


# --- return fitting ---

class InvalidParameters(ModelDomainError):
    """Distribution parameters outside the family's domain."""


class FitFailed(ModelDomainError):
    """Likelihood maximization produced no usable optimum."""


class TooFewObservations(ModelDomainError):
    """Not enough data points to fit a distribution."""


class TooFewDistinctReturns(FitFailed):
    """Input collapses to (nearly) a single return value."""


class QuadratureFailure(ModelDomainError):
    """Numerical integration did not converge to the requested accuracy."""


class NonPositivePrice(InputError):
    """Price series must be strictly positive."""


class NonPositiveValue(ModelDomainError):
    """Logarithm requested of a non-positive value."""


# --- empirical analysis ---

class ParseError(InputError):
    """Malformed CSV input; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptySeries(InputError):
    """No usable rows remain after parsing."""


class NoOverlap(ModelDomainError):
    """Two series share no dates."""


class TooShort(ModelDomainError):
    """Series too short for the requested segmentation."""


class InvalidPenalty(InputError):
    """Per-breakpoint penalty must be positive."""


class InsufficientData(ModelDomainError):
    """Regression needs at least three points."""
