"""Exception hierarchy shared by all splinemove modules."""


class SplineMoveError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SplineMoveError, ValueError):
    """A parameter lies outside the domain of a knot vector or patch."""


class ArgumentError(SplineMoveError, ValueError):
    """An argument is invalid (bad derivative order, knot outside range, ...)."""


class GeometryError(SplineMoveError):
    """Input geometry is inconsistent (mismatched endpoints, no containment, zero area)."""


class DegenerateTangentError(SplineMoveError):
    """A Jacobian column vanished, so the scaled Jacobian is undefined."""

    def __init__(self, xi, patch=None):
        self.xi = tuple(float(v) for v in xi)
        self.patch = patch
        super().__init__(f"zero tangent column at xi={self.xi} on patch {patch}")


class BarrierViolationError(SplineMoveError):
    """The Winslow integrand was requested on a configuration with det J <= 0."""

    def __init__(self, min_det):
        self.min_det = float(min_det)
        super().__init__(f"non-positive Jacobian determinant {self.min_det:.3e}; rerun stage 1")


class ParameterizationError(SplineMoveError):
    """Stage 1 of the barrier method did not reach a fold-free configuration."""

    def __init__(self, message, e_fold=None, min_det=None, patch=None, theta=None):
        self.e_fold = e_fold
        self.min_det = min_det
        self.patch = patch
        self.theta = theta
        super().__init__(message)


class PairingError(SplineMoveError):
    """Two snapshots do not share patch topology / control-net layout."""


class InterfaceError(SplineMoveError):
    """Interface control points do not match the expected spline space."""


class CapabilityError(SplineMoveError):
    """The requested operator is not available for this discretization."""


class SolverError(SplineMoveError):
    """A linear system could not be solved."""
