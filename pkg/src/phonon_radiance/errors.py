"""Exception and warning types shared across the package."""


class ValidationError(ValueError):
    """A parameter set violates a documented invariant.

    ``invariant`` names the violated condition so the CLI can report it in
    machine-readable form.
    """

    def __init__(self, message: str, invariant: str = ""):
        super().__init__(message)
        self.invariant = invariant or message


class DimensionError(ValueError):
    """A requested basis or operator exceeds the configured size cap."""


class NoResonanceError(ValueError):
    """No bound state satisfies the two-spin resonance condition."""


class ConvergenceError(RuntimeError):
    """A lattice sum did not converge under grid refinement."""


class IntegrationError(RuntimeError):
    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class PositivityError(RuntimeError):
    """A density matrix left the physical set beyond tolerance."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NoCrossingError(ValueError):
    pass


class MarkovValidityWarning(UserWarning):
    """Group velocity is not large compared to g^2/J."""


class AdiabaticityWarning(UserWarning):
    pass
