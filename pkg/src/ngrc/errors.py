"""Exception hierarchy shared across the package.

CLI exit codes key off the two main branches: ConfigError (and plain
ValueError) map to usage errors, NumericalError to runtime numerical
failures.
"""


class NgrcError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(NgrcError):
    """Invalid configuration, arguments, or input files."""


class ModelFileError(ConfigError):
    """Model file is missing, corrupt, or structurally invalid."""


class UnsupportedModelVersionError(ModelFileError):
    """Model file was written with an unsupported format version."""


class PlanExhaustedError(ConfigError):
    """Requested more features than distinct index pairs exist."""


class NumericalError(NgrcError):
    """Numerical failure during integration, fitting, or rollout."""


class IntegrationError(NumericalError):
    """State became non-finite during integration.

    ``step_index`` is the sample step (transient included) at which the
    blow-up was detected.
    """

    def __init__(self, step_index, message=None):
        self.step_index = step_index
        super().__init__(message or f"non-finite state at sample step {step_index}")


class DegenerateChannelError(NumericalError):
    """A channel has zero range; normalization is undefined."""


class ProjectionDomainError(NumericalError):
    """Projection input left the open unit interval (missing normalization?)."""


class SingularFitError(NumericalError):
    """Normal equations are numerically singular beyond rescue.

    Carries the standard advice: inject measurement noise into the
    training data or increase the ridge parameter.
    """

    ADVICE = (
        "feature Gram matrix is numerically singular; "
        "add measurement noise to the training data or increase the ridge parameter"
    )

    def __init__(self, message=None):
        super().__init__(message or self.ADVICE)


class DivergenceError(NumericalError):
    """Closed-loop prediction diverged.

    ``step_index`` is the failing step (0-based); ``partial`` optionally
    holds the trajectory produced before the failure.
    """

    def __init__(self, step_index, partial=None, message=None):
        self.step_index = step_index
        self.partial = partial
        super().__init__(message or f"prediction diverged at step {step_index}")


class PhaseConvergenceError(NumericalError):
    """Free run did not settle onto a limit cycle within the step budget."""
