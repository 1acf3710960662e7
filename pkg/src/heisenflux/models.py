"""Closed-form solutions: free Bessel modes and the flux-pierced oscillator.

Effective order |alpha| = sqrt((ell + lambda)**2 + 4 mu**2). The oscillator
spectrum is E = hbar omega (2 n_r + 1 + |alpha|) with n_r the radial quantum
number, and the normalized eigenmodes are

    f(r) = sqrt(m omega / (pi hbar)) sqrt(n_r! / Gamma(|alpha| + n_r + 1))
           u**(-2 i nu) u**|alpha| exp(-u**2 / 2) L_{n_r}^{|alpha|}(u**2),
    u = r sqrt(m omega / hbar).

Free modes (omega = 0) are sqrt(m / (2 pi hbar**2)) (k r)**(-2 i nu) J_|alpha|(k r)
with k = sqrt(2 m E) / hbar. For lambda != 0 they extend the lambda = 0
solutions using the sector operator with ell -> ell + lambda.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CoverageError, DomainError, FreeParticleError, InputError
from .hilbert import HamiltonianParams, RadialGrid, RadialMode
from .specfun import bessel_j, laguerre, log_gamma

__all__ = [
    "OscillatorLevel",
    "ScatteringLabel",
    "FlowBlock",
    "alpha_abs",
    "oscillator_energy",
    "oscillator_radial",
    "oscillator_wavefunction",
    "free_radial",
    "free_wavefunction",
    "plane_wave_expansion",
    "spectral_flow",
    "flow_to_csv",
    "flow_to_json",
]

COVERAGE_TOL = 1e-10


@dataclass(frozen=True)
class OscillatorLevel:
    n_r: int
    ell: int
    energy: float


@dataclass(frozen=True)
class ScatteringLabel:
    energy: float
    ell: int

    def __post_init__(self):
        if not (math.isfinite(self.energy) and self.energy >= 0.0):
            raise DomainError(f"scattering energy must be >= 0, got {self.energy!r}")


def alpha_abs(ell: int, lam: float = 0.0, mu: float = 0.0) -> float:
    """Effective Bessel/Laguerre order sqrt((ell + lam)**2 + 4 mu**2)."""
    return math.hypot(ell + lam, 2.0 * mu)


def oscillator_energy(n_r: int, ell: int, params: HamiltonianParams, lam: float = 0.0) -> float:
    if params.omega == 0.0:
        raise FreeParticleError("omega = 0: the spectrum is continuous")
    if int(n_r) != n_r or n_r < 0:
        raise DomainError("n_r must be a non-negative integer")
    return params.hbar * params.omega * (2 * n_r + 1 + alpha_abs(ell, lam, params.mu))


def oscillator_radial(n_r: int, ell: int, params: HamiltonianParams, lam, r) -> np.ndarray:
    """Normalized oscillator radial function f(r) at arbitrary radii r > 0."""
    if params.omega == 0.0:
        raise FreeParticleError("omega = 0: no bound states")
    if int(n_r) != n_r or n_r < 0:
        raise DomainError("n_r must be a non-negative integer")
    n_r = int(n_r)
    a = alpha_abs(ell, lam, params.mu)
    r = np.asarray(r, float)
    k = params.mass * params.omega / params.hbar
    u = r * math.sqrt(k)
    log_u = np.log(u)
    log_c = 0.5 * (math.log(k / math.pi) + log_gamma(n_r + 1.0) - log_gamma(a + n_r + 1.0))
    mag = np.exp(log_c + a * log_u - 0.5 * u * u) * laguerre(a, n_r, u * u)
    if params.nu != 0.0:
        return mag * np.exp(-2j * params.nu * log_u)
    return mag.astype(complex)


def _tail_mass(n_r, ell, params, lam, grid: RadialGrid) -> float:
    """Norm missed outside the grid, from Gaussian and power-law asymptotics."""
    a = alpha_abs(ell, lam, params.mu)
    L2 = params.hbar / (params.mass * params.omega)
    f_max = abs(oscillator_radial(n_r, ell, params, lam, grid.r_max))
    u_max = grid.r_max / math.sqrt(L2)
    # integral of u**(2p) exp(-u**2) u du beyond u_max ~ exp(-u_max**2) u_max**(2p) / 2 (1 + p/u_max**2 + ...)
    p = a + 2 * n_r
    outer = 2.0 * math.pi * f_max ** 2 * L2 * 0.5 * (1.0 + 2.0 * p / max(u_max ** 2, 1.0))
    f_min = abs(oscillator_radial(n_r, ell, params, lam, grid.r_min))
    inner = 2.0 * math.pi * f_min ** 2 * grid.r_min ** 2 / (2.0 + 2.0 * a)
    return outer + inner


def oscillator_wavefunction(n_r: int, ell: int, params: HamiltonianParams, lam: float,
                            grid: RadialGrid) -> RadialMode:
    """Sampled oscillator eigenmode; raises CoverageError if the grid misses > 1e-10 of the norm."""
    tail = _tail_mass(n_r, ell, params, lam, grid)
    if tail > COVERAGE_TOL:
        raise CoverageError(f"grid misses about {tail:.3g} of the norm for (n_r={n_r}, ell={ell})")
    return RadialMode(grid, ell, oscillator_radial(n_r, ell, params, lam, grid.nodes))


def free_radial(energy: float, ell: int, params: HamiltonianParams, lam, r) -> np.ndarray:
    """Free radial mode at arbitrary radii; at E = 0 the phase factor (kr)**(-2i nu) is taken as 1."""
    if not (math.isfinite(energy) and energy >= 0.0):
        raise DomainError("free modes need E >= 0")
    a = alpha_abs(ell, lam, params.mu)
    r = np.asarray(r, float)
    norm = math.sqrt(params.mass / (2.0 * math.pi * params.hbar ** 2))
    k = math.sqrt(2.0 * params.mass * energy) / params.hbar
    x = k * r
    vals = norm * bessel_j(a, x) * np.ones_like(r)
    if params.nu != 0.0 and k > 0.0:
        return vals * np.exp(-2j * params.nu * np.log(x))
    return vals.astype(complex)


def free_wavefunction(label: ScatteringLabel, params: HamiltonianParams, lam: float,
                      grid: RadialGrid) -> RadialMode:
    return RadialMode(grid, label.ell, free_radial(label.energy, label.ell, params, lam, grid.nodes))


def plane_wave_expansion(x, y, p_x, p_y, hbar: float = 1.0, ell_max: int = 40):
    """Partial-wave sum for exp(i (x p_x + y p_y) / hbar), truncated at |ell| <= ell_max.

    sum_ell i**|ell| exp(i ell (theta - phi)) J_|ell|(r p / hbar). Arguments may
    be arrays of equal shape.
    """
    if int(ell_max) != ell_max or ell_max < 0:
        raise InputError("ell_max must be a non-negative integer")
    x, y, p_x, p_y = np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, p_x, p_y)))
    r = np.hypot(x, y)
    p = np.hypot(p_x, p_y)
    dphi = np.arctan2(y, x) - np.arctan2(p_y, p_x)
    z = np.atleast_1d(r * p / hbar)
    dphi = np.atleast_1d(dphi)
    total = bessel_j(0, z).astype(complex)
    for ell in range(1, int(ell_max) + 1):
        # ell and -ell share i**|ell| J_|ell|; their angular factors add to 2 cos
        total = total + (1j ** ell) * 2.0 * np.cos(ell * dphi) * bessel_j(ell, z)
    return complex(total[0]) if r.ndim == 0 else total.reshape(r.shape)


@dataclass(frozen=True)
class FlowBlock:
    """Levels of one lambda value; the spectrum below ``complete_below`` is complete."""

    lam: float
    levels: tuple[OscillatorLevel, ...]
    complete_below: float

    @property
    def energies(self) -> np.ndarray:
        return np.array([lv.energy for lv in self.levels])

    def interior(self, cutoff: float | None = None) -> np.ndarray:
        """Sorted energies strictly below the cutoff (default: own completeness bound)."""
        c = self.complete_below if cutoff is None else min(cutoff, self.complete_below)
        e = self.energies
        return e[e < c]


def _flow_block(lam: float, params: HamiltonianParams, n_r_max: int, ell_window: int) -> FlowBlock:
    hw = params.hbar * params.omega
    ells = range(-ell_window, ell_window + 1)
    levels = [OscillatorLevel(n, ell, oscillator_energy(n, ell, params, lam))
              for ell in ells for n in range(n_r_max + 1)]
    levels.sort(key=lambda lv: (lv.energy, lv.ell, lv.n_r))
    # lowest level any sector outside the window could contribute
    outside = min(alpha_abs(-ell_window - 1, lam, params.mu), alpha_abs(ell_window + 1, lam, params.mu))
    # lowest level cut off by the n_r cap inside the window
    a_min = min(alpha_abs(ell, lam, params.mu) for ell in ells)
    cap = 2 * (n_r_max + 1) + 1 + a_min
    complete = hw * min(1.0 + outside, cap)
    # keep a tiny guard so rounding in |alpha| cannot move a level across the bound
    return FlowBlock(float(lam), tuple(levels), complete * (1.0 - 1e-9))


def spectral_flow(lambda_grid: Iterable[float], params: HamiltonianParams, n_r_max: int = 12,
                  ell_window: int = 20) -> list[FlowBlock]:
    """Oscillator levels over the window n_r <= n_r_max, |ell| <= ell_window for each lambda."""
    if params.omega == 0.0:
        raise FreeParticleError("spectral flow needs omega > 0")
    lams = [float(v) for v in lambda_grid]
    if not lams or n_r_max < 0 or ell_window < 0:
        raise InputError("spectral_flow needs a non-empty lambda grid and window")
    return [_flow_block(lam, params, int(n_r_max), int(ell_window)) for lam in lams]


def flow_to_rows(blocks: Sequence[FlowBlock]) -> list[tuple[float, int, int, float]]:
    return [(b.lam, lv.n_r, lv.ell, lv.energy) for b in blocks for lv in b.levels]


def flow_to_csv(blocks: Sequence[FlowBlock]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "n_r", "ell", "energy"])
    for lam, n, ell, e in flow_to_rows(blocks):
        w.writerow([f"{lam:.17g}", n, ell, f"{e:.17g}"])
    return buf.getvalue()


def flow_to_json(blocks: Sequence[FlowBlock]) -> str:
    return json.dumps([
        {"lambda": b.lam, "complete_below": b.complete_below,
         "levels": [{"n_r": lv.n_r, "ell": lv.ell, "energy": lv.energy} for lv in b.levels]}
        for b in blocks
    ])
