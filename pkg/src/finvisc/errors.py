"""Exception types shared by the solvers."""


class InvalidDeformationError(ValueError):
    """Non-positive Jacobian or otherwise inadmissible kinematics."""


class ContractError(ValueError):
    """Operation called outside its parameter contract."""


class GeometryError(ValueError):
    """Shell or mesh geometry violates its admissibility conditions."""


class StepTooLargeError(RuntimeError):
    """Time step rejected even after the allowed number of halvings."""


class NonConvergenceError(RuntimeError):
    """Iterative solve failed; ``history`` holds the residual norms."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class SingularSystemError(RuntimeError):
    """Linear solve failed on a singular or ill-posed system."""
