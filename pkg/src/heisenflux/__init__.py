"""Quantum mechanics on the punctured plane with a flat U(1) connection.

Modules: ``specfun`` (Gamma, Bessel, Laguerre), ``bundle`` (connections and
holonomies), ``hilbert`` (radial grids and operators), ``models`` (closed-form
spectra and modes), ``propagators`` (spectral and time-sliced propagators)
and ``cli``.
"""

from .bundle import DiscretePath, FlatConnection, GaugeFunction, PolarPoint, holonomy, winding_number
from .errors import (CausticError, ConvergenceError, CoverageError, DomainError, FreeParticleError,
                     HeisenfluxError, InputError, ResolutionError, UnsupportedRepresentationError)
from .hilbert import HamiltonianParams, RadialGrid, RadialMode
from .propagators import PropagatorRequest, TimeContour

__version__ = "0.1.0"

__all__ = [
    "PolarPoint", "FlatConnection", "GaugeFunction", "DiscretePath", "holonomy", "winding_number",
    "HamiltonianParams", "RadialGrid", "RadialMode", "PropagatorRequest", "TimeContour",
    "HeisenfluxError", "DomainError", "InputError", "UnsupportedRepresentationError",
    "FreeParticleError", "CoverageError", "CausticError", "ConvergenceError", "ResolutionError",
]
