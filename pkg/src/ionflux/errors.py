"""Exception hierarchy shared by all ionflux modules."""


class IonFluxError(Exception):
    """Base class for every error raised by ionflux."""


class InvalidConfig(IonFluxError, ValueError):
    """A configuration value violates a precondition."""


class NonPositiveProfile(InvalidConfig):
    pass


class OutOfDomain(InvalidConfig):
    pass


class DegenerateInput(IonFluxError):
    """Input for which the closed forms are undefined."""


class DegenerateBoundary(DegenerateInput):
    """|ln L - ln R| is too small for the expansion formulas."""


class DegenerateGeometryB(DegenerateInput):
    """alpha == beta, so A vanishes and B is undefined."""


class BEqualsOne(DegenerateInput):
    """B == 1, the critical voltages do not exist."""


class SingularSecondOrderSystem(DegenerateInput):
    pass


class NegativePredictedConcentration(IonFluxError):
    """A truncated series predicts a nonpositive concentration."""


class NonPositiveConcentration(IonFluxError):
    pass


class NonFinite(IonFluxError):
    pass


class SingularJacobian(IonFluxError):
    pass


class NoConvergence(IonFluxError):
    """Newton failed; carries the best state seen and its residual norm."""

    def __init__(self, message, best_state=None, residual_norm=float("nan"), step=None):
        super().__init__(message)
        self.best_state = best_state
        self.residual_norm = residual_norm
        self.step = step
