"""Exception hierarchy shared by the solvers, precoders and experiment harness."""


class LseLabError(Exception):
    """Base class for all errors raised by :mod:`lse_lab`."""


class ConvergenceError(LseLabError):
    """An iterative solver stopped without meeting its tolerance.

    ``trace`` carries whatever per-start or per-equation residual information
    the solver collected, so callers can report why it failed.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else {}


class DivergedRSError(LseLabError):
    """The replica-symmetric branch has no finite solution (chi grows without bound)."""

    def __init__(self, message, alpha_star=None):
        super().__init__(message)
        self.alpha_star = alpha_star


class DomainError(LseLabError, ValueError):
    """A quantity left its admissible domain (negative squared scale, pole, ...)."""


class BracketError(LseLabError):
    """A bracketing root finder could not enclose a sign change."""

    def __init__(self, message, interval=None, samples=None):
        super().__init__(message)
        self.interval = interval
        self.samples = samples if samples is not None else []


class EnumerationLimitError(LseLabError):
    """Exhaustive search was asked to enumerate more candidates than allowed."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class ExperimentError(LseLabError):
    """A Monte Carlo experiment lost too many trials to be trusted."""
