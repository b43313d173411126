"""Exception hierarchy.

Two families matter to callers: bad input (``InputError``) and numerical
failure during estimation (``EstimationError``). The command-line layer maps
them to exit codes 1 and 2.
"""


class CausalSurvivalError(Exception):
    pass


class InputError(CausalSurvivalError, ValueError):
    pass


class EstimationError(CausalSurvivalError, RuntimeError):
    pass


class ConvergenceError(EstimationError):
    """Raised when an iterative fit exhausts its iteration budget.

    The last iterate is kept on ``last_params`` for inspection.
    """

    def __init__(self, message, last_params=None, iterations=None):
        super().__init__(message)
        self.last_params = last_params
        self.iterations = iterations


class SeparationError(EstimationError):
    pass


class SingularMatrixError(EstimationError):
    pass


class PositivityError(EstimationError):
    pass
