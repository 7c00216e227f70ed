"""Exception hierarchy shared by the numerical modules and the CLI."""


class KreinLabError(Exception):
    """Base class for numerical failures raised by kreinlab."""


class ShiftError(KreinLabError):
    """The shifted pencil F - z M is not positive definite at the requested z."""

    def __init__(self, message, z=None, lower_bound=None):
        super().__init__(message)
        self.z = z
        self.lower_bound = lower_bound


class EigenSolverError(KreinLabError):
    """Eigensolver did not converge; carries the residual it reached."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DecompositionError(KreinLabError):
    """A deficiency direction could not be split along dom(nu_hat) + N_eta'."""


class DivergentIntegralError(KreinLabError):
    """The uncapped singular form was requested on functions with a trace at 0."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
