"""Exception hierarchy shared by all modules."""


class DriftFEMError(Exception):
    """Base class for package errors."""


class InputError(DriftFEMError, ValueError):
    """Invalid user input (domain, preset parameters, config)."""


class MeshError(InputError):
    """Domain cannot be meshed as requested."""

    def __init__(self, message, axis=None):
        super().__init__(message)
        self.axis = axis


class NonFiniteFieldError(DriftFEMError, ValueError):
    """A coefficient evaluated to inf/nan at a quadrature point or element."""

    def __init__(self, message, point=None, element=None):
        super().__init__(message)
        self.point = point
        self.element = element


class NumericalError(DriftFEMError, RuntimeError):
    """Base for failures of the discrete problem itself."""


class SolverError(NumericalError):
    """Iteration broke down or stagnated. Carries the best iterate."""

    def __init__(self, message, x=None, residual=None):
        super().__init__(message)
        self.x = x
        self.residual = residual


class SingularMatrixError(NumericalError):
    """Direct factorization hit an exactly singular pivot."""


class PositivityFailure(NumericalError):
    """The weight construction produced a nodal value below the positivity floor."""

    def __init__(self, message, node=None, point=None, value=None):
        super().__init__(message)
        self.node = node
        self.point = point
        self.value = value


class NegativeCoefficientWarning(UserWarning):
    """Zero-order coefficient sampled negative somewhere."""
