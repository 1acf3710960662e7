"""Exception types raised across the package."""


class HeisenfluxError(Exception):
    """Base class for all package errors."""


class DomainError(HeisenfluxError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class InputError(HeisenfluxError, ValueError):
    """Malformed or inconsistent input data (paths, grids, configs)."""


class UnsupportedRepresentationError(HeisenfluxError, ValueError):
    """The operation needs the connection in the pure-flux gauge."""


class FreeParticleError(HeisenfluxError, ValueError):
    """A discrete-spectrum quantity was requested with omega = 0."""


class CoverageError(HeisenfluxError, ValueError):
    """A radial grid truncates a non-negligible part of a state's norm."""


class CausticError(HeisenfluxError, ValueError):
    """Real-time oscillator request too close to sin(omega*dt) = 0."""


class ConvergenceError(HeisenfluxError, ValueError):
    """The requested time contour does not give an absolutely convergent result."""


class ResolutionError(HeisenfluxError, RuntimeError):
    """The quadrature grid does not resolve the short-time kernel."""
