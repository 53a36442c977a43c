"""Exception types shared across the package.

Every error raised by covertplan derives from :class:`CovertPlanError`, so
callers (and the CLI) can distinguish model/solver failures from bugs.
"""


class CovertPlanError(Exception):
    """Base class for all covertplan errors."""


class DimensionMismatch(CovertPlanError):
    """Array shapes are inconsistent with each other or with the model."""


class InfeasibleLp(CovertPlanError):
    """The occupation-measure LP reported infeasibility (signals a solver bug
    for a valid model, whose polytope is never empty)."""


class SolverStall(CovertPlanError):
    """An iterative solver hit its iteration cap without a usable answer."""


class ZeroStateMass(CovertPlanError):
    """A state marginal of an occupation measure is zero."""


class NoConvergence(CovertPlanError):
    """Value iteration failed to converge within the iteration cap."""


class NotIrreducible(CovertPlanError):
    """A chain violates the strict-positivity precondition for a unique
    stationary distribution."""


class NonPositiveEntry(CovertPlanError):
    """A probability entering a logarithm is zero or below 1e-300."""


class StepTooLarge(CovertPlanError):
    """A finite-difference step is incompatible with the evaluation point."""


class Infeasible(CovertPlanError):
    """A linear program or projection target set is empty."""


class Unbounded(CovertPlanError):
    """A linear program is unbounded below."""


class InfeasibleStart(CovertPlanError):
    """A nonlinear solve was started from an infeasible point."""


class BcdNoProgress(CovertPlanError):
    """A block-coordinate-descent round increased the full objective."""


class EmptySample(CovertPlanError):
    """A trajectory contains no transitions to estimate from."""


class UnvisitedRow(CovertPlanError):
    """An estimate was requested for a state-action row with no visits."""


class CalibrationError(CovertPlanError):
    """A multiplier bisection could not bracket the requested target."""


class ConfigError(CovertPlanError):
    """An experiment configuration violates its schema or an invariant."""
