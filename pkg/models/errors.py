"""
Exception types raised by the solvers and simulators.
The CLI maps each family to its own exit status.
"""


class ParameterError(ValueError):
    """A model parameter or configuration value violates its constraint."""


class GridError(ValueError):
    """A space or time grid does not conform to the domain it discretises."""


class StabilityError(ArithmeticError):
    """A step size violates the stability bound of the chosen scheme."""


class UnboundedDerivativeError(ArithmeticError):
    """A derivative is requested at a point where it diverges (dz f at z = 0)."""


class NoInteriorRootError(ArithmeticError):
    """The first-order condition stays positive up to the incentive cap."""


class ArtifactWriteError(OSError):
    """An output file could not be written."""

    def __init__(self, path, reason):
        super().__init__(f"Could not write {path}: {reason}")
        self.path = path
