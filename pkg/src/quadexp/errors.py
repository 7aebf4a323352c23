"""Exception types shared across the package.

Two failure families matter to callers: input that does not parse or
violates a declared schema (``ScenarioError``), and computations that
start from valid input but break down numerically (``NumericalFailure``).
The command line maps the former to exit code 2 and the latter to 3.
"""


class NumericalFailure(RuntimeError):
    """A computation failed a numerical contract (residual, bound, budget)."""


class ScenarioError(ValueError):
    """A scenario or model file violates the documented schema."""
