"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Operand shapes do not fit together."""


class GridMismatch(ValueError):
    """Two signals live on different time grids."""


class SingularMatrixError(ArithmeticError):
    def __init__(self, pivot_index, message=None):
        self.pivot_index = pivot_index
        super().__init__(message or f"matrix is singular to working precision at pivot {pivot_index}")


class NotHermitianError(ValueError):
    pass


class ConvergenceError(ArithmeticError):
    def __init__(self, cap, message=None):
        self.cap = cap
        super().__init__(message or f"no convergence after {cap} iterations")


class GeneratorError(ValueError):
    """Base class for rejected generator matrices; carries the offending eigenvalue."""

    def __init__(self, eigenvalue, message):
        self.eigenvalue = complex(eigenvalue)
        super().__init__(message)


class NotStable(GeneratorError):
    def __init__(self, eigenvalue):
        super().__init__(eigenvalue, f"eigenvalue {complex(eigenvalue):.6g} has Re <= 0")


class NotSectorial(GeneratorError):
    def __init__(self, eigenvalue, angle):
        self.angle = angle
        super().__init__(
            eigenvalue,
            f"eigenvalue {complex(eigenvalue):.6g} has |arg| = {angle:.12g}, not below pi/2",
        )


class NoValidContour(ValueError):
    def __init__(self, pole, message=None):
        self.pole = None if pole is None else complex(pole)
        super().__init__(message or f"no admissible circle; blocked by pole {self.pole}")


class NotBisectorial(ValueError):
    def __init__(self, eigenvalue, message=None):
        self.eigenvalue = complex(eigenvalue)
        super().__init__(message or f"eigenvalue {self.eigenvalue:.6g} violates the bisector condition")
