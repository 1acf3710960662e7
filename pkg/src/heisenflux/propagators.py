"""Propagators <r_f, theta_f| exp(-i dt H_{mu,nu} / hbar) |r_i, theta_i>.

Two independent routes are implemented:

* spectral: the resummed eigen-expansion (oscillator) or the momentum
  integral over Bessel modes (free particle);
* time slicing: the phase-space path integral reduced to one radial kernel
  per angular sector, composed numerically on a log-radial grid.

Closed forms (Mehler kernel, free Gaussian) and a truncated double eigen-sum
serve as further cross-checks.

Time contours. ``real`` uses dt as given, ``wick`` uses dt (1 - i delta) and
``euclidean`` uses -i tau (the request's ``delta_t`` is then tau). Real-time
answers can be recovered from a ladder of wick values by Richardson
extrapolation (:func:`wick_extrapolate`).

Conventions in the oscillator sum: s = omega dt', u = r sqrt(m omega / hbar),
alpha = |alpha|(ell, lambda, mu) and

    K = m omega / (2 i pi hbar sin s) (u_i/u_f)**(2 i nu) exp(i cot(s) (u_f**2 + u_i**2) / 2)
        * sum_ell exp(-i pi alpha / 2) exp(i ell dtheta) J_alpha(u_f u_i / sin s).

The formula is used with Re s in [0, pi); other times are reduced by k pi
using K_ell(s + k pi) = exp(-i k pi (1 + alpha)) K_ell(s), which follows from
the equally spaced spectrum of each sector.
"""

from __future__ import annotations

import cmath
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bundle import FlatConnection, PolarPoint, holonomy, standard_path
from .errors import CausticError, ConvergenceError, DomainError, InputError, ResolutionError
from .hilbert import HamiltonianParams, RadialGrid
from .models import alpha_abs, oscillator_energy, oscillator_radial
from .specfun import bessel_i_scaled, bessel_j_scaled, log_gamma

__all__ = [
    "TimeContour",
    "PropagatorRequest",
    "PropagatorResult",
    "PathIntegralResult",
    "CAUSTIC_MARGIN",
    "DEFAULT_WICK_LADDER",
    "propagator_spectral_oscillator",
    "oscillator_sector",
    "propagator_direct_sum_oscillator",
    "propagator_closed_oscillator",
    "propagator_spectral_free",
    "free_sector",
    "propagator_closed_free",
    "h_matrix_elements",
    "slice_kernel",
    "pathintegral_sector",
    "spectral_radial_kernel",
    "propagator_pathintegral",
    "pathintegral_grid",
    "wick_extrapolate",
]

CAUSTIC_MARGIN = 1e-3


def _near_caustic(s: float) -> bool:
    # omega dt = k pi with k != 0; k = 0 is the short-time limit, not a caustic
    return round(s / math.pi) != 0 and abs(math.sin(s)) < CAUSTIC_MARGIN
DEFAULT_WICK_LADDER = (4e-5, 2e-5, 1e-5)
_CONTOURS = ("real", "wick", "euclidean")


@dataclass(frozen=True)
class TimeContour:
    """How the time argument is continued: real, wick (dt (1 - i delta)) or euclidean (-i tau)."""

    kind: str = "euclidean"
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in _CONTOURS:
            raise InputError(f"contour kind must be one of {_CONTOURS}, got {self.kind!r}")
        d = float(self.delta)
        if not math.isfinite(d) or d < 0.0:
            raise InputError("contour delta must be finite and >= 0")
        if self.kind == "wick" and d <= 0.0:
            raise InputError("a wick contour needs delta > 0")
        object.__setattr__(self, "delta", d)

    def effective(self, delta_t: float) -> complex:
        """Complex time dt' fed to the propagator formulas."""
        if self.kind == "real":
            return complex(delta_t)
        if self.kind == "wick":
            return complex(delta_t) * complex(1.0, -self.delta)
        return complex(0.0, -delta_t)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "delta": self.delta}


@dataclass(frozen=True)
class PropagatorRequest:
    """Arguments of one propagator evaluation."""

    q_i: PolarPoint
    q_f: PolarPoint
    delta_t: float
    params: HamiltonianParams = field(default_factory=HamiltonianParams)
    lam: float = 0.0
    contour: TimeContour = field(default_factory=TimeContour)
    ell_cutoff: int | None = None

    def __post_init__(self):
        dt = float(self.delta_t)
        if not math.isfinite(dt) or dt == 0.0:
            raise DomainError("delta_t must be finite and non-zero")
        if self.contour.kind == "euclidean" and dt <= 0.0:
            raise DomainError("euclidean time tau must be positive")
        object.__setattr__(self, "delta_t", dt)
        object.__setattr__(self, "lam", float(self.lam))
        if self.ell_cutoff is not None:
            if int(self.ell_cutoff) != self.ell_cutoff or self.ell_cutoff < 0:
                raise InputError("ell_cutoff must be a non-negative integer")
            object.__setattr__(self, "ell_cutoff", int(self.ell_cutoff))

    @property
    def dt_eff(self) -> complex:
        return self.contour.effective(self.delta_t)

    def replace(self, **kw) -> "PropagatorRequest":
        data = dict(q_i=self.q_i, q_f=self.q_f, delta_t=self.delta_t, params=self.params,
                    lam=self.lam, contour=self.contour, ell_cutoff=self.ell_cutoff)
        data.update(kw)
        return PropagatorRequest(**data)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "r_i": self.q_i.r, "theta_i": self.q_i.theta,
            "r_f": self.q_f.r, "theta_f": self.q_f.theta,
            "delta_t": self.delta_t,
            "mass": p.mass, "omega": p.omega, "mu": p.mu, "nu": p.nu, "hbar": p.hbar,
            "lambda": self.lam,
            "contour": self.contour.to_dict(),
            "ell_cutoff": self.ell_cutoff,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PropagatorRequest":
        allowed = {"r_i", "theta_i", "r_f", "theta_f", "delta_t", "mass", "omega", "mu", "nu",
                   "hbar", "lambda", "contour", "ell_cutoff"}
        extra = set(data) - allowed
        if extra:
            raise InputError(f"unknown request keys: {sorted(extra)}")
        try:
            params = HamiltonianParams(**{k: data[k] for k in ("mass", "omega", "mu", "nu", "hbar") if k in data})
            c = data.get("contour", {"kind": "euclidean"})
            if isinstance(c, str):
                c = {"kind": c}
            contour = TimeContour(c.get("kind", "euclidean"), c.get("delta", 0.0))
            return cls(PolarPoint(data["r_i"], data.get("theta_i", 0.0)),
                       PolarPoint(data["r_f"], data.get("theta_f", 0.0)),
                       data["delta_t"], params, data.get("lambda", 0.0), contour,
                       data.get("ell_cutoff"))
        except KeyError as exc:
            raise InputError(f"request misses {exc}") from None
        except TypeError as exc:
            raise InputError(f"malformed request: {exc}") from None


@dataclass(frozen=True)
class PropagatorResult:
    value: complex
    ell_cutoff: int
    tail_bound: float
    contour: TimeContour

    def record(self, request: PropagatorRequest) -> dict:
        return {
            "request": request.to_dict(),
            "value_re": self.value.real,
            "value_im": self.value.imag,
            "ell_cutoff": self.ell_cutoff,
            "tail_bound": self.tail_bound,
            "contour": self.contour.to_dict(),
        }

    def to_json(self, request: PropagatorRequest) -> str:
        return json.dumps(self.record(request))


def _dtheta(req: PropagatorRequest) -> float:
    return req.q_f.theta - req.q_i.theta


def _ell_order(L: int) -> list[int]:
    """0, 1, -1, 2, -2, ... so partial sums are symmetric."""
    out = [0]
    for k in range(1, L + 1):
        out += [k, -k]
    return out


# ---------------------------------------------------------------------------
# oscillator, spectral route

def _reduce_branch(s: complex) -> tuple[complex, int]:
    k = math.floor(s.real / math.pi)
    return s - k * math.pi, k


class _OscillatorSum:
    """Shared pieces of the resummed oscillator propagator for one request."""

    def __init__(self, req: PropagatorRequest):
        p = req.params
        if p.omega <= 0.0:
            raise DomainError("the oscillator propagator needs omega > 0")
        s = p.omega * req.dt_eff
        if s.imag > 0.0:
            raise ConvergenceError("the time contour must not leave the lower half-plane")
        if req.contour.kind == "real" and _near_caustic(s.real):
            raise CausticError(f"|sin(omega dt)| = {abs(math.sin(s.real)):.3g} is below the caustic margin")
        self.req = req
        self.s_red, self.k = _reduce_branch(s)
        sin_s = cmath.sin(self.s_red)
        if sin_s == 0:
            raise CausticError("sin(omega dt) vanishes")
        kk = p.mass * p.omega / p.hbar
        self.u_i = req.q_i.r * math.sqrt(kk)
        self.u_f = req.q_f.r * math.sqrt(kk)
        self.w = self.u_f * self.u_i / sin_s
        cot = cmath.cos(self.s_red) / sin_s
        self.log_pref = (cmath.log(p.mass * p.omega / (2j * math.pi * p.hbar * sin_s))
                         + 0.5j * cot * (self.u_f ** 2 + self.u_i ** 2)
                         + 2j * p.nu * math.log(self.u_i / self.u_f))
        self.abs_im_w = abs(self.w.imag)
        self.dtheta = _dtheta(req)

    def alpha(self, ell: int) -> float:
        return alpha_abs(ell, self.req.lam, self.req.params.mu)

    def radial_term(self, ell: int) -> complex:
        """Sector term without exp(i ell dtheta)."""
        a = self.alpha(ell)
        jv = complex(bessel_j_scaled(a, self.w))
        phase = -0.5j * math.pi * a - 1j * self.k * math.pi * (1.0 + a)
        return cmath.exp(self.log_pref + phase + self.abs_im_w) * jv

    def term(self, ell: int) -> complex:
        return self.radial_term(ell) * cmath.exp(1j * ell * self.dtheta)

    def bound(self, ell: int) -> float:
        """|J_a(w)| <= |w/2|**a exp(|Im w|) / Gamma(a + 1), times the prefactor."""
        a = self.alpha(ell)
        aw = abs(self.w) / 2.0
        log_b = self.log_pref.real + self.abs_im_w - log_gamma(a + 1.0)
        if a > 0.0:
            if aw == 0.0:
                return 0.0
            log_b += a * math.log(aw)
        return math.exp(log_b) if log_b > -745.0 else 0.0

    def tail(self, L: int) -> float:
        """Bound on the sum of |terms| with |ell| > L."""
        total = 0.0
        for sgn in (1, -1):
            ell = sgn * (L + 1)
            prev = math.inf
            for _ in range(100000):
                b = self.bound(ell)
                total += b
                # once past the Bessel turning point the bounds shrink geometrically
                if b == 0.0 or (b < prev and b <= 1e-17 * (total + 1e-300) and abs(ell) > abs(self.w)):
                    break
                prev = b
                ell += sgn
        return total

    def auto_cutoff(self, rtol: float = 1e-16) -> int:
        scale = abs(self.term(0)) + 1e-300
        L = int(math.ceil(abs(self.w))) + 2
        while self.tail(L) > rtol * scale and L < 100000:
            L = int(L * 1.25) + 2
        return L


def propagator_spectral_oscillator(req: PropagatorRequest) -> PropagatorResult:
    """Resummed eigen-expansion of the oscillator propagator with a certified ell tail."""
    osc = _OscillatorSum(req)
    L = req.ell_cutoff if req.ell_cutoff is not None else osc.auto_cutoff()
    total = 0j
    for ell in _ell_order(L):
        total += osc.term(ell)
    return PropagatorResult(total, L, osc.tail(L), req.contour)


def oscillator_sector(req: PropagatorRequest, ell: int) -> complex:
    """Sector ell of the spectral oscillator sum (without exp(i ell dtheta))."""
    return _OscillatorSum(req).radial_term(ell)


def propagator_direct_sum_oscillator(req: PropagatorRequest, n_r_cutoff: int = 60) -> PropagatorResult:
    """Truncated double sum over (n_r, ell) of exp(-i dt' E / hbar) psi(q_f) conj(psi(q_i)).

    The reported tail bound is the magnitude of the last radial shell and
    angular sector included, which dominates the remainder for damped
    contours.
    """
    if req.contour.kind == "real":
        raise ConvergenceError("the eigen-sum does not converge absolutely on the real contour")
    p = req.params
    if p.omega <= 0.0:
        raise DomainError("the oscillator propagator needs omega > 0")
    dt = req.dt_eff
    L = req.ell_cutoff if req.ell_cutoff is not None else 40
    dtheta = _dtheta(req)
    r = np.array([req.q_f.r, req.q_i.r])
    total = 0j
    last_shell = 0.0
    last_sector = 0.0
    for ell in _ell_order(L):
        sector = 0j
        shell = 0.0
        for n in range(n_r_cutoff + 1):
            e = oscillator_energy(n, ell, p, req.lam)
            f = oscillator_radial(n, ell, p, req.lam, r)
            t = cmath.exp(-1j * dt * e / p.hbar) * f[0] * np.conj(f[1])
            sector += t
            shell = abs(t)
        last_shell = max(last_shell, shell)
        if abs(ell) == L:
            last_sector = max(last_sector, abs(sector))
        total += sector * cmath.exp(1j * ell * dtheta)
    return PropagatorResult(complex(total), L, last_shell * (n_r_cutoff + 1) + 2 * last_sector, req.contour)


def propagator_closed_oscillator(q_f: PolarPoint, q_i: PolarPoint, delta_t: complex,
                                 params: HamiltonianParams, contour: TimeContour | None = None) -> complex:
    """Mehler kernel (lambda = 0, mu = nu = 0).

    ``delta_t`` is continued through ``contour`` when given; otherwise it is
    used as is (complex values allowed).
    """
    p = params
    dt = contour.effective(delta_t) if contour is not None else complex(delta_t)
    s = p.omega * dt
    if dt.imag == 0.0 and _near_caustic(s.real):
        raise CausticError("the Mehler kernel is singular at caustics")
    sin_s = cmath.sin(s)
    cos_s = cmath.cos(s)
    ph = (p.mass * p.omega / (2.0 * p.hbar * sin_s)) * (
        cos_s * (q_f.r ** 2 + q_i.r ** 2) - 2.0 * q_f.r * q_i.r * math.cos(q_f.theta - q_i.theta))
    return p.mass * p.omega / (2j * math.pi * p.hbar * sin_s) * cmath.exp(1j * ph)


# ---------------------------------------------------------------------------
# free particle

class _FreeSum:
    """Bessel-mode momentum integral evaluated with Weber's second exponential integral.

    int_0^inf p exp(-a p**2) J_n(b p) J_n(c p) dp = exp(-(b**2 + c**2) / (4a)) I_n(b c / (2a)) / (2a),
    valid for Re a > 0.
    """

    def __init__(self, req: PropagatorRequest):
        p = req.params
        if p.omega != 0.0:
            raise DomainError("the free propagator needs omega = 0")
        if req.contour.kind == "real":
            raise ConvergenceError("the momentum integral needs a damped contour (wick or euclidean)")
        self.req = req
        a = 1j * req.dt_eff / (2.0 * p.mass * p.hbar)
        if a.real <= 0.0:
            raise ConvergenceError("the Gaussian parameter must have a positive real part")
        b = req.q_f.r / p.hbar
        c = req.q_i.r / p.hbar
        self.z = b * c / (2.0 * a)
        # exp(-(b^2 + c^2) / 4a) * exp(z) = exp(-(b - c)^2 / 4a)
        self.log_pref = (-math.log(2.0 * math.pi * p.hbar ** 2) - cmath.log(2.0 * a)
                         - (b - c) ** 2 / (4.0 * a)
                         + 2j * p.nu * math.log(req.q_i.r / req.q_f.r))
        self.dtheta = _dtheta(req)

    def alpha(self, ell: int) -> float:
        return alpha_abs(ell, self.req.lam, self.req.params.mu)

    def radial_term(self, ell: int) -> complex:
        return cmath.exp(self.log_pref) * complex(bessel_i_scaled(self.alpha(ell), self.z))

    def term(self, ell: int) -> complex:
        return self.radial_term(ell) * cmath.exp(1j * ell * self.dtheta)

    def bound(self, ell: int) -> float:
        # |e^{-z} I_a(z)| <= |z/2|^a e^{|Re z| - Re z} / Gamma(a+1) for Re z >= 0
        a = self.alpha(ell)
        az = abs(self.z) / 2.0
        log_b = self.log_pref.real - log_gamma(a + 1.0)
        if a > 0.0:
            if az == 0.0:
                return 0.0
            log_b += a * math.log(az)
        return math.exp(log_b) if log_b > -745.0 else 0.0

    def tail(self, L: int) -> float:
        total = 0.0
        for sgn in (1, -1):
            ell = sgn * (L + 1)
            prev = math.inf
            for _ in range(100000):
                b = self.bound(ell)
                total += b
                if b == 0.0 or (b < prev and b <= 1e-17 * (total + 1e-300) and abs(ell) > abs(self.z)):
                    break
                prev = b
                ell += sgn
        return total

    def auto_cutoff(self, rtol: float = 1e-16) -> int:
        scale = abs(self.term(0)) + 1e-300
        L = int(math.ceil(abs(self.z))) + 2
        while self.tail(L) > rtol * scale and L < 100000:
            L = int(L * 1.25) + 2
        return L


def propagator_spectral_free(req: PropagatorRequest) -> PropagatorResult:
    """Free propagator as a sum over angular sectors of Bessel-mode momentum integrals."""
    fs = _FreeSum(req)
    L = req.ell_cutoff if req.ell_cutoff is not None else fs.auto_cutoff()
    total = 0j
    for ell in _ell_order(L):
        total += fs.term(ell)
    return PropagatorResult(total, L, fs.tail(L), req.contour)


def free_sector(req: PropagatorRequest, ell: int) -> complex:
    """Sector ell of the free spectral sum (without exp(i ell dtheta))."""
    return _FreeSum(req).radial_term(ell)


def propagator_closed_free(q_f: PolarPoint, q_i: PolarPoint, delta_t: complex,
                           params: HamiltonianParams, contour: TimeContour | None = None) -> complex:
    """Gaussian free propagator m/(2 i pi hbar dt) exp(i m |x_f - x_i|**2 / (2 hbar dt))."""
    dt = contour.effective(delta_t) if contour is not None else complex(delta_t)
    if dt == 0:
        raise DomainError("delta_t must be non-zero")
    p = params
    d2 = q_f.r ** 2 + q_i.r ** 2 - 2.0 * q_f.r * q_i.r * math.cos(q_f.theta - q_i.theta)
    return p.mass / (2j * math.pi * p.hbar * dt) * cmath.exp(1j * p.mass * d2 / (2.0 * p.hbar * dt))


# ---------------------------------------------------------------------------
# time slicing

def h_matrix_elements(p_r: float, ell: int, r: float, params: HamiltonianParams, lam: float = 0.0) -> complex:
    """Normalized phase-space matrix element h = <p, ell|H|r, theta> / <p, ell|r, theta>."""
    if not r > 0.0:
        raise DomainError("r must be positive")
    hb, m = params.hbar, params.mass
    c = (ell + lam) ** 2 - 0.25 + 4.0 * (params.mu ** 2 + params.nu ** 2) - 2j * params.nu
    return (p_r ** 2 + 4.0 * hb * params.nu * p_r / r + hb ** 2 / r ** 2 * c) / (2.0 * m) \
        + 0.5 * m * params.omega ** 2 * r ** 2


def _slice_eta(req: PropagatorRequest, n_slices: int) -> complex:
    """i * epsilon, the slice time with positive real part on damped contours."""
    if req.contour.kind == "real":
        raise ConvergenceError("time slicing needs a damped contour (wick or euclidean)")
    eta = 1j * req.dt_eff / n_slices
    if eta.real <= 0.0:
        raise ConvergenceError("slice time must have a positive real part")
    return eta


def slice_kernel(r_new, r_old, ell: int, eta: complex, params: HamiltonianParams, lam: float = 0.0,
                 kind: str = "bessel") -> np.ndarray:
    """One-slice radial kernel T(r_new, r_old) for slice time eta = i epsilon.

    All forms share the Gaussian (m / 2 pi hbar eta)**(1/2) exp(-m (r' - r)**2 / (2 hbar eta))
    and the potential factor exp(-eta m omega**2 r**2 / (2 hbar)) at the pre-point r.
    They differ in the centrifugal part (alpha**2 - 1/4) / r**2 and in the
    nu-dependent factors:

    * ``naive``: exp(-(eta/hbar) hbar**2 (alpha**2 - 1/4 - 2 i nu) / (2 m r**2)) times
      exp(-2 i nu (r'/r - 1)), the literal short-time form. The centrifugal
      factor is unbounded near r = 0 when alpha < 1/2.
    * ``bessel_linear``: the centrifugal factor becomes
      sqrt(2 pi z) exp(-z) I_alpha(z) with z = m r r' / (hbar eta), which
      reproduces the free sector kernel exactly and agrees with the naive
      factor to first order in eta; the nu factors are kept as in ``naive``.
    * ``bessel`` (default): Bessel centrifugal factor and the phase
      (r/r')**(2 i nu), of which the two nu factors above are the first-order
      expansion. The expansion is not uniform for r below the slice width,
      where it slows convergence for small alpha.
    """
    hb, m = params.hbar, params.mass
    rn = np.asarray(r_new, float)
    ro = np.asarray(r_old, float)
    rn, ro = np.broadcast_arrays(rn, ro)
    a = alpha_abs(ell, lam, params.mu)
    if kind not in ("bessel", "bessel_linear", "naive"):
        raise InputError(f"unknown slice kernel {kind!r}")
    expo = -m * (rn - ro) ** 2 / (2.0 * hb * eta) - eta * 0.5 * m * params.omega ** 2 * ro * ro / hb
    if kind == "bessel":
        expo = expo - 2j * params.nu * np.log(rn / ro)
    else:
        expo = expo + 1j * params.nu * hb * eta / (m * ro * ro) - 2j * params.nu * (rn / ro - 1.0)
    out = np.zeros(rn.shape, complex)
    live = expo.real > -745.0
    pref = np.sqrt(m / (2.0 * math.pi * hb * eta))
    if kind == "naive":
        cent = -eta * hb * (a * a - 0.25) / (2.0 * m * ro[live] ** 2)
        out[live] = pref * np.exp(expo[live] + cent)
    else:
        z = m * rn[live] * ro[live] / (hb * eta)
        zz = z.real if eta.imag == 0.0 else z
        out[live] = pref * np.exp(expo[live]) * np.sqrt(2.0 * math.pi * z) * bessel_i_scaled(a, zz)
    return out


def pathintegral_grid(params: HamiltonianParams, eta: complex | None = None, n_nodes: int | None = None,
                      r_min: float | None = None, r_max: float | None = None) -> RadialGrid:
    """Log grid for kernel composition, about 1e-5 to 8 oscillator lengths.

    Without ``n_nodes`` the node count is chosen so that the spacing near
    r_max stays below 0.8 slice widths sqrt(hbar |eta| / m).
    """
    L = params.length_scale if params.omega > 0.0 else 1.0
    lo = r_min if r_min is not None else 1e-5 * L
    hi = r_max if r_max is not None else 8.0 * L
    if n_nodes is None:
        if eta is None:
            n_nodes = 900
        else:
            width = math.sqrt(params.hbar * abs(eta) / params.mass)
            n_nodes = max(400, int(math.ceil(math.log(hi / lo) * hi / (0.8 * width))))
    return RadialGrid(lo, hi, n_nodes, order=2, max_step=0.0)


def _dr_weights(grid: RadialGrid) -> np.ndarray:
    """Quadrature weights for f(r) dr on the log grid."""
    return grid.weights / grid.nodes


def _check_resolution(grid: RadialGrid, eta: complex, params: HamiltonianParams, tol: float = 1e-6) -> None:
    """Gaussian slice factor must integrate to 1 at nodes away from both ends."""
    r = grid.nodes
    w = _dr_weights(grid)
    width = math.sqrt(params.hbar * abs(eta) / params.mass)
    sel = np.where((r > r[0] + 8.0 * width) & (r < r[-1] - 8.0 * width))[0]
    if sel.size == 0:
        raise ResolutionError("radial grid too short for the slice width")
    sel = sel[:: max(1, sel.size // 40)]
    gauss = np.sqrt(params.mass / (2.0 * math.pi * params.hbar * eta)) * np.exp(
        -params.mass * (r[None, :] - r[sel, None]) ** 2 / (2.0 * params.hbar * eta))
    err = np.max(np.abs(gauss @ w - 1.0))
    if not err <= tol:
        raise ResolutionError(f"slice kernel under-resolved on the radial grid (row-sum error {err:.3g})")


def pathintegral_sector(req: PropagatorRequest, ell: int, n_slices: int, grid: RadialGrid | None = None,
                        kind: str = "bessel", check: bool = True) -> complex:
    """Composed radial kernel [T^N](r_f, r_i) for one angular sector."""
    if int(n_slices) != n_slices or n_slices < 1:
        raise InputError("n_slices must be a positive integer")
    n_slices = int(n_slices)
    p = req.params
    eta = _slice_eta(req, n_slices)
    rf, ri = req.q_f.r, req.q_i.r
    if n_slices == 1:
        return complex(slice_kernel(rf, ri, ell, eta, p, req.lam, kind))
    grid = grid if grid is not None else pathintegral_grid(p, eta)
    if check:
        _check_resolution(grid, eta, p)
    r = grid.nodes
    w = _dr_weights(grid)
    T = slice_kernel(r[:, None], r[None, :], ell, eta, p, req.lam, kind) * w[None, :]
    v = slice_kernel(r, ri, ell, eta, p, req.lam, kind)
    for _ in range(n_slices - 2):
        v = T @ v
    last = slice_kernel(rf, r, ell, eta, p, req.lam, kind)
    return complex(np.sum(last * w * v))


def spectral_radial_kernel(req: PropagatorRequest, ell: int) -> complex:
    """Sector kernel R_ell normalized like the composed slices: 2 pi sqrt(r_f r_i) K_ell."""
    scale = 2.0 * math.pi * math.sqrt(req.q_f.r * req.q_i.r)
    if req.params.omega > 0.0:
        return scale * oscillator_sector(req, ell)
    return scale * free_sector(req, ell)


@dataclass(frozen=True)
class PathIntegralResult:
    value: complex
    sectors: dict
    ell_cutoff: int
    n_slices: int
    kind: str
    contour: TimeContour


def _holonomy_ratio(req: PropagatorRequest) -> complex:
    """Omega[P(q0 -> q_f)] / Omega[P(q0 -> q_i)] along the standard radial-then-arc paths."""
    conn = FlatConnection(req.lam)
    hb = req.params.hbar
    return holonomy(conn, standard_path(req.q_f), hb) / holonomy(conn, standard_path(req.q_i), hb)


def propagator_pathintegral(req: PropagatorRequest, n_slices: int, grid: RadialGrid | None = None,
                            kind: str = "bessel", workers: int = 1) -> PathIntegralResult:
    """Time-sliced propagator assembled from per-sector kernels.

    K = Omega_f / Omega_i / (2 pi sqrt(r_f r_i)) sum_ell exp(i (ell + lambda) dtheta) [T^N]_ell(r_f, r_i).
    Sectors run concurrently when ``workers > 1``; the sum is always taken in
    a fixed sector order, so the value does not depend on the worker count.
    """
    p = req.params
    if req.ell_cutoff is not None:
        L = req.ell_cutoff
    elif p.omega > 0.0:
        L = _OscillatorSum(req).auto_cutoff(1e-12)
    else:
        L = _FreeSum(req).auto_cutoff(1e-12)
    eta = _slice_eta(req, n_slices)
    grid = grid if grid is not None else pathintegral_grid(p, eta)
    _check_resolution(grid, eta, p)
    ells = _ell_order(L)

    def run(ell):
        return pathintegral_sector(req, ell, n_slices, grid, kind, check=False)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(run, ells))
    else:
        vals = [run(ell) for ell in ells]
    sectors = dict(zip(ells, vals))
    dth = _dtheta(req)
    total = 0j
    for ell in ells:
        total += cmath.exp(1j * (ell + req.lam) * dth) * sectors[ell]
    total *= _holonomy_ratio(req) / (2.0 * math.pi * math.sqrt(req.q_f.r * req.q_i.r))
    return PathIntegralResult(complex(total), sectors, L, int(n_slices), kind, req.contour)


# ---------------------------------------------------------------------------
# contour extrapolation

def wick_extrapolate(fn: Callable[[PropagatorRequest], complex], req: PropagatorRequest,
                     deltas: Sequence[float] = DEFAULT_WICK_LADDER) -> tuple[complex, float]:
    """Richardson extrapolation delta -> 0 of fn over a halving ladder of wick contours.

    Returns the extrapolated value and the size of the last correction as an
    error estimate. ``deltas`` must be decreasing by factors of two.
    """
    ds = [float(d) for d in deltas]
    if len(ds) < 2 or any(d <= 0 for d in ds):
        raise InputError("need at least two positive deltas")
    for a, b in zip(ds, ds[1:]):
        if not math.isclose(a, 2.0 * b, rel_tol=1e-12):
            raise InputError("wick ladder must halve at each step")
    vals = [complex(fn(req.replace(contour=TimeContour("wick", d)))) for d in ds]
    table = [vals]
    for level in range(1, len(ds)):
        prev = table[-1]
        f = 2.0 ** level
        table.append([(f * prev[j + 1] - prev[j]) / (f - 1.0) for j in range(len(prev) - 1)])
    best = table[-1][0]
    err = abs(best - table[-2][-1])
    return best, err
