from __future__ import annotations


class GWPercError(Exception):
    """Base class for errors raised by gwperc."""


class PreconditionError(GWPercError, ValueError):
    """An operation was called outside its domain."""


class InvalidSpecError(PreconditionError):
    """Offspring law is malformed or violates the supercritical, Z >= 1 assumptions."""


class InsufficientDepthError(PreconditionError):
    """The tree has not been generated deep enough for an exact computation."""


class DepthBudgetError(PreconditionError):
    """Explicit generation would exceed the configured vertex budget."""

    def __init__(self, depth: int, needed: int, budget: int):
        self.depth = depth
        self.needed = needed
        self.budget = budget
        super().__init__(
            f"generating depth {depth} needs {needed} vertices, budget is {budget}"
        )


class TreeFormatError(GWPercError, ValueError):
    """A serialized tree could not be parsed."""


class AttemptCapError(GWPercError, RuntimeError):
    """Rejection sampling or a simulation guard hit its cap."""
