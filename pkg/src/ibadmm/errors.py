"""Exception types raised by the solvers and the probability layer."""


class ValidationError(ValueError):
    """Input is not a valid distribution, encoder or configuration."""


class InfiniteDivergenceError(ValueError):
    """KL divergence with p_i > 0 where q_i = 0."""


class PositivityError(ValidationError):
    """A table that must be strictly positive has a zero entry."""


class GradientSingularityError(ValueError):
    """A gradient was requested at a point with a zero probability."""


class DegenerateClusterError(ValueError):
    """Every cluster of an encoder lost its mass."""


class TraceIncompleteError(ValueError):
    """An iteration trace lacks the snapshots needed for a diagnostic."""
