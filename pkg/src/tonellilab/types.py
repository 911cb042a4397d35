"""Common types and the error hierarchy used across tonellilab modules."""

from typing import Any

import click
import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

# Exit codes of the command-line front end
EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_THEOREM = 4


class TonelliError(click.ClickException):
    """Base class for all tonellilab errors.

    Raising one inside a command prints the message on standard error and exits
    with the class's exit code.
    """

    exit_code = 1

    def show(self, file: Any = None) -> None:
        """Print the error together with its category."""
        click.echo(f"Error ({type(self).__name__}): {self.format_message()}", err=True, file=file)


class InvalidInput(TonelliError):
    """Input outside the domain of an operation."""

    exit_code = EXIT_INVALID


class AmbiguousLift(InvalidInput):
    """Consecutive torus samples are too far apart to be lifted uniquely."""

    def __init__(self, index: int, jump: float, max_step: float):
        self.index = index
        self.jump = jump
        super().__init__(
            f"Step {index} jumps by {jump:.6g} (mod 1), which is not below the step bound {max_step:.6g}; "
            "sample the path more finely"
        )


class InvalidStep(InvalidInput):
    """Time step or stencil reach incompatible with the grid."""


class Extrapolation(InvalidInput):
    """A query falls on or outside the boundary of a tabulation."""


class Infeasible(InvalidInput):
    """A linear program has no feasible point."""


class SemiconjugacyViolated(InvalidInput):
    """A supplied torus map does not intertwine the supplied flows."""

    def __init__(self, defect: float, tol: float):
        self.defect = defect
        super().__init__(f"Semi-conjugacy defect {defect:.6g} exceeds tolerance {tol:.6g}")


class ScenarioError(InvalidInput):
    """A scenario file failed validation."""


class NumericalFailure(TonelliError):
    """A numerical procedure failed to produce a trustworthy result."""

    exit_code = EXIT_NUMERICAL


class NoConvergence(NumericalFailure):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, what: str, iterations: int, last_residual: float):
        self.iterations = iterations
        self.last_residual = last_residual
        super().__init__(f"{what} did not converge in {iterations} iterations (last residual {last_residual:.6g})")


class LiftViolation(NumericalFailure):
    """An integrator step moved too far to keep the lifted path continuous."""


class LPError(NumericalFailure):
    """The linear programming backend failed."""


class TheoremViolation(TonelliError):
    """A computed verdict contradicts a structural property of Tonelli systems."""

    exit_code = EXIT_THEOREM
