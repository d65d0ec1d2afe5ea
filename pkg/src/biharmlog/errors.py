"""Exception types shared across the toolkit.

ValueError is reserved for violated preconditions (bad dimensions, bad
flags, malformed grids).  Genuine numerical failures -- non-convergence,
oracle disagreement, degenerate inputs discovered mid-computation --
derive from NumericsError so the CLI can map them to a distinct exit
code.
"""


class NumericsError(RuntimeError):
    """A computation failed numerically rather than structurally."""


class ConvergenceError(NumericsError):
    """An iteration hit its cap with the stopping test unmet."""


class OracleMismatch(NumericsError):
    """Two independent routes to the same quantity disagree."""


class DegenerateProfile(NumericsError):
    """A profile is too close to zero (or otherwise unusable) for the
    requested operation."""
