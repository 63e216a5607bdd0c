"""Exception types shared across the package."""


class RatbonesError(Exception):
    """Base class for all package errors."""


class DegenerateParameterError(RatbonesError, ValueError):
    """Parameters at which the map drops degree (v1 == v2, a == 0)."""


class PoleEncounterError(RatbonesError, ArithmeticError):
    """An orbit came within tolerance of the pole z = 0."""


class NearParabolicError(RatbonesError, ArithmeticError):
    """A fixed-point multiplier is too close to 1 for the fixed-point formula."""


class AdmissibilityError(RatbonesError, ValueError):
    """(mu, t) outside the unimodal normal-form wedge."""


class CoincidentPointsError(RatbonesError, ValueError):
    """Möbius frame requested from points that are not pairwise distinct."""


class RegionMismatchError(RatbonesError, ValueError):
    """Operation needs a unimodal parameter but got something else."""


class ModelError(RatbonesError, ValueError):
    """An interval model violates its monotone-branch contract."""


class NotMarkovError(RatbonesError, ValueError):
    """A proposed partition does not give a Markov system."""


class ConvergenceError(RatbonesError, RuntimeError):
    """An iterative method failed to converge."""


class MinimalityError(RatbonesError, ValueError):
    """A converged critical relation is not minimal."""


class VanishingDerivativeError(RatbonesError, ArithmeticError):
    """An orbit derivative vanished where the relation requires it nonzero."""


class RankDropError(RatbonesError, ArithmeticError):
    """The residual gradient vanished, so no tangent direction exists."""


class InconsistentJacobianError(RatbonesError, ArithmeticError):
    """Finite-difference Jacobian levels disagree beyond tolerance."""
