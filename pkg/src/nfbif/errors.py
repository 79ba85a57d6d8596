"""Exception hierarchy shared by the numerics modules, the service and the CLI."""


class NFError(Exception):
    """Base class for all package errors."""


class ConfigError(NFError, ValueError):
    """Invalid configuration or parameters (CLI exit code 2)."""


class NumericalError(NFError, ArithmeticError):
    """A numerical procedure failed (CLI exit code 3)."""


class BracketError(NumericalError):
    """No sign change found in the expected bracket."""


class DomainError(NumericalError):
    """Function evaluated outside its domain (e.g. psi for kappa <= kappa_c)."""


class AliasingError(NumericalError):
    """Requested Fourier mode is not resolved by the sampling grid."""


class MissingDerivativeError(NumericalError):
    """The gain function does not provide the requested derivative."""


class StepCollapseError(NumericalError):
    """Richardson-extrapolated finite differences disagree beyond tolerance."""


class CFLError(NumericalError):
    """Explicit time step exceeds the stability bound."""


class NegativityError(NumericalError):
    """Density became negative beyond round-off."""


class NoCrossingError(NumericalError):
    """No mode crosses the threshold function in the searched range."""
