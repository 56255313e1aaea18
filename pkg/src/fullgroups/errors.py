"""Error taxonomy shared across the library.

Everything user-facing is a ValueError subclass so that plain argument
validation and domain-specific failures can be caught uniformly, while the
CLI can still map each class to its own exit code.
"""


class InfeasibleError(ValueError):
    """A request that no object can satisfy (e.g. splitting off more mass
    than a set has)."""


class ResolutionError(ValueError):
    """The request is meaningful but not representable at the current dyadic
    depth.  ``required_depth``, when known, tells the caller how far to
    refine."""

    def __init__(self, message, required_depth=None):
        super().__init__(message)
        self.required_depth = required_depth


class NotInFullGroupError(ValueError):
    """An element was expected to preserve the classes of a partition and
    does not."""
