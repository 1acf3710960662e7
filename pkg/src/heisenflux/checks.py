"""Invariant suite run by ``heisenflux check``.

Each check returns a residual that must not exceed its tolerance. Checks
that involve the holonomy parameter accept a ``lam_sign`` used on the
candidate side of the comparison only; setting it to -1 plants a known
fault so the harness itself can be tested.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import specfun
from .bundle import (DiscretePath, FlatConnection, PolarPoint, flatness_residual, gauge_transform,
                     holonomy, winding_number)
from .errors import InputError
from .hilbert import (HamiltonianParams, RadialGrid, RadialMode, apply_hamiltonian, apply_p_r,
                      current_divergence, inner_product, norm, probability_current, quantum_correction,
                      surface_term)
from .models import (oscillator_energy, oscillator_wavefunction, plane_wave_expansion, spectral_flow)
from .propagators import (PropagatorRequest, TimeContour, free_sector, oscillator_sector, pathintegral_sector,
                          propagator_closed_free, propagator_closed_oscillator,
                          propagator_direct_sum_oscillator, propagator_spectral_free,
                          propagator_spectral_oscillator, spectral_radial_kernel, wick_extrapolate)

__all__ = ["CheckResult", "CHECKS", "run_checks"]

_STATES = ((0.0, 0.0, 0.0), (0.25, 0.0, 0.3), (0.2, 0.15, 0.5))


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def to_dict(self) -> dict:
        return {"name": self.name, "residual": self.residual, "tolerance": self.tolerance,
                "passed": self.passed, "seconds": self.seconds}


# --- specfun ----------------------------------------------------------------

def _gamma_recurrence(rng, lam_sign):
    x = rng.uniform(1e-3, 30.0, 200)
    return max(abs(specfun.gamma_fn(v + 1.0) / (v * specfun.gamma_fn(v)) - 1.0) for v in x)


def _laguerre_recurrence(rng, lam_sign):
    worst = 0.0
    for _ in range(200):
        a = rng.uniform(-0.9, 10.0)
        n = int(rng.integers(1, 20))
        x = rng.uniform(0.0, 30.0)
        l_m, l_0, l_p = (specfun.laguerre(a, k, x) for k in (n - 1, n, n + 1))
        lhs = (n + 1) * l_p
        rhs = (2 * n + 1 + a - x) * l_0 - (n + a) * l_m
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return worst


def _bessel_half_order(rng, lam_sign):
    x = np.linspace(1e-3, 30.0, 400)
    j12 = np.sqrt(2.0 / (np.pi * x)) * np.sin(x)
    j32 = np.sqrt(2.0 / (np.pi * x)) * (np.sin(x) / x - np.cos(x))
    return float(max(np.max(np.abs(specfun.bessel_j(0.5, x) - j12)),
                     np.max(np.abs(specfun.bessel_j(1.5, x) - j32))))


# --- bundle -------------------------------------------------------------------

def _loops():
    return [DiscretePath.circle(1.0, 64, 1), DiscretePath.circle(0.5, 48, 2),
            DiscretePath.circle(2.0, 64, -1), DiscretePath.circle(1.3, 80, -3)]


def _holonomy_winding(rng, lam_sign):
    worst = 0.0
    for lam in (0.3, 0.37, -1.25, 2.6):
        conn = FlatConnection(lam_sign * lam)
        for c in _loops():
            expected = np.exp(-2j * math.pi * lam * winding_number(c))
            worst = max(worst, abs(holonomy(conn, c) - expected))
    return worst


def _gauge_invariance(rng, lam_sign):
    worst = 0.0
    for chi in ("sin(theta)", "r*r", "r*cos(theta) + pow(r, 3)*sin(2*theta)"):
        conn = FlatConnection(0.37)
        moved = gauge_transform(FlatConnection(lam_sign * 0.37), chi)
        for c in _loops():
            worst = max(worst, abs(holonomy(moved, c) - holonomy(conn, c)))
    return worst


def _flatness(rng, lam_sign):
    r = np.linspace(0.3, 3.0, 12)
    t = np.linspace(0.0, 2.0 * math.pi, 13)
    return max(flatness_residual(gauge_transform(FlatConnection(0.7), chi), r, t)
               for chi in ("sin(theta)", "r*r", "r*cos(theta)"))


# --- hilbert ------------------------------------------------------------------

def _grid(params):
    return RadialGrid.for_oscillator(params, 2000)


def _orthonormality(rng, lam_sign):
    worst = 0.0
    for mu, nu, lam in _STATES:
        p = HamiltonianParams(mu=mu, nu=nu)
        g = _grid(p)
        for ell in (-2, 0, 1, 3):
            ref = [oscillator_wavefunction(n, ell, p, lam, g) for n in range(7)]
            cand = [oscillator_wavefunction(n, ell, p, lam_sign * lam, g) for n in range(7)]
            for i, a in enumerate(ref):
                for j, b in enumerate(cand):
                    worst = max(worst, abs(inner_product(a, b) - (i == j)))
    return worst


def _eigen_residual(rng, lam_sign):
    worst = 0.0
    for mu, nu, lam in _STATES:
        p = HamiltonianParams(mu=mu, nu=nu)
        g = _grid(p)
        conn = FlatConnection(lam_sign * lam)
        for ell in (-2, 0, 1, 3):
            for n in range(7):
                psi = oscillator_wavefunction(n, ell, p, lam, g)
                e = oscillator_energy(n, ell, p, lam)
                worst = max(worst, norm(apply_hamiltonian(p, conn, psi) - psi * e) / norm(psi))
    return worst


def _smooth_modes(g: RadialGrid):
    r = g.nodes
    return [RadialMode(g, 0, r ** 2 * np.exp(-r ** 2)),
            RadialMode(g, 1, r ** 2 * np.exp(-r ** 2 / 2) * (1 + r)),
            RadialMode(g, -2, r ** 3 * np.exp(-r ** 2) * np.cos(r)),
            RadialMode(g, 3, r ** 2 / (1 + r ** 2) ** 3),
            RadialMode(g, 0, r ** 2.5 * np.exp(-0.5 * r ** 2) * (1 + 0.3j * r))]


def _operator_identity(rng, lam_sign):
    p0 = HamiltonianParams()
    g = _grid(p0)
    worst = 0.0
    for mu, nu in ((0.25, 0.0), (0.0, 0.2), (0.3, -0.1), (0.2, 0.15)):
        p = p0.replace(mu=mu, nu=nu)
        for lam in (0.0, 0.37):
            for psi in _smooth_modes(g):
                d = (apply_hamiltonian(p, FlatConnection(lam_sign * lam), psi)
                     - apply_hamiltonian(p0, FlatConnection(lam), psi) - quantum_correction(p, psi))
                worst = max(worst, float(np.max(np.abs(d.samples))))
    return worst


def _surface_terms(rng, lam_sign):
    worst = 0.0
    for mu, nu, lam in _STATES:
        p = HamiltonianParams(mu=mu, nu=nu)
        g = _grid(p)
        for ell in range(-4, 5):
            for n in range(7):
                worst = max(worst, *map(abs, surface_term(oscillator_wavefunction(n, ell, p, lam, g))))
    return worst


def _current_divergence(rng, lam_sign):
    worst = 0.0
    for mu, nu, lam in _STATES:
        p = HamiltonianParams(mu=mu, nu=nu)
        g = _grid(p)
        for ell in range(-4, 5):
            for n in range(7):
                j_r, _ = probability_current(oscillator_wavefunction(n, ell, p, lam, g), p, FlatConnection(lam))
                worst = max(worst, float(np.max(np.abs(current_divergence(j_r)))))
    return worst


def _momentum_symmetry(rng, lam_sign):
    worst = 0.0
    for mu, nu, lam in _STATES:
        p = HamiltonianParams(mu=mu, nu=nu)
        g = _grid(p)
        for ell in (-1, 0, 2):
            ms = [oscillator_wavefunction(n, ell, p, lam, g) for n in range(5)]
            for a in ms:
                for b in ms:
                    worst = max(worst, abs(inner_product(apply_p_r(a), b) - inner_product(a, apply_p_r(b))))
    return worst


# --- models -------------------------------------------------------------------

def _flow_periodicity(rng, lam_sign):
    # no fault hook: the spectrum at -lambda is the one at lambda with ell -> -ell
    p = HamiltonianParams()
    worst = 0.0
    for lam in (0.17, 0.5, 0.83):
        a, b = spectral_flow([lam, lam + 1.0], p, n_r_max=12, ell_window=20)
        cut = min(a.complete_below, b.complete_below)
        ea, eb = a.interior(cut), b.interior(cut)
        if ea.size != eb.size:
            return math.inf
        worst = max(worst, float(np.max(np.abs(ea - eb))))
    return worst


def _plane_wave(rng, lam_sign):
    n = 100
    r = rng.uniform(0.0, 5.0, n)
    p = rng.uniform(0.0, 2.0, n)
    th, ph = rng.uniform(0.0, 2 * math.pi, (2, n))
    x, y = r * np.cos(th), r * np.sin(th)
    px, py = p * np.cos(ph), p * np.sin(ph)
    approx = plane_wave_expansion(x, y, px, py, 1.0, 40)
    return float(np.max(np.abs(approx - np.exp(1j * (x * px + y * py)))))


# --- propagators --------------------------------------------------------------

def _random_points(rng, r_hi=2.5):
    return (PolarPoint(rng.uniform(0.1, r_hi), rng.uniform(0, 2 * math.pi)),
            PolarPoint(rng.uniform(0.1, r_hi), rng.uniform(0, 2 * math.pi)))


def _mehler(rng, lam_sign):
    p = HamiltonianParams()
    worst = 0.0
    for _ in range(8):
        dt = rng.uniform(0.1, 6.0)
        while abs(math.sin(dt)) < 0.1:
            dt = rng.uniform(0.1, 6.0)
        qi, qf = _random_points(rng)
        req = PropagatorRequest(qi, qf, dt, p, 0.0, TimeContour("wick", 1e-5))
        val, _ = wick_extrapolate(lambda q: propagator_spectral_oscillator(q).value, req)
        ex = propagator_closed_oscillator(qf, qi, dt, p)
        worst = max(worst, abs(val - ex) / abs(ex))
    return worst


def _resummation(rng, lam_sign):
    p = HamiltonianParams(mu=0.2, nu=0.1)
    worst = 0.0
    for tau in (0.5, 1.0, 2.0):
        qi, qf = _random_points(rng, 2.0)
        req = PropagatorRequest(qi, qf, tau, p, 0.4, TimeContour("euclidean"))
        a = propagator_spectral_oscillator(req).value
        b = propagator_direct_sum_oscillator(req.replace(lam=lam_sign * 0.4), 60).value
        worst = max(worst, abs(a - b) / abs(a))
    return worst


def _free(rng, lam_sign):
    p = HamiltonianParams(omega=0.0)
    worst = 0.0
    for _ in range(8):
        dt = rng.uniform(0.2, 3.0)
        qi, qf = _random_points(rng, 3.0)
        req = PropagatorRequest(qi, qf, dt, p, 0.0, TimeContour("wick", 1e-5))
        val, _ = wick_extrapolate(lambda q: propagator_spectral_free(q).value, req)
        ex = propagator_closed_free(qf, qi, dt, p)
        worst = max(worst, abs(val - ex) / abs(ex))
    return worst


class _Conjugate(TimeContour):
    """Contour giving -conj(dt (1 - i delta)), used by the Hermiticity check."""

    def effective(self, delta_t):
        return -complex(delta_t) * complex(1.0, self.delta)


def _hermiticity(rng, lam_sign):
    p = HamiltonianParams(mu=0.2, nu=0.1)
    worst = 0.0
    for dt in (0.7, 2.5, 4.0):
        qi, qf = _random_points(rng)
        fwd = PropagatorRequest(qi, qf, dt, p, 0.4, TimeContour("wick", 1e-3))
        back = PropagatorRequest(qf, qi, dt, p, lam_sign * 0.4, _Conjugate("wick", 1e-3))
        a = propagator_spectral_oscillator(fwd).value
        b = propagator_spectral_oscillator(back).value
        worst = max(worst, abs(a.conjugate() - b) / abs(a))
    return worst


def _semigroup(rng, lam_sign):
    """Sector form: S_ell(t1 + t2) = 2 pi int S_ell(t1)(r_f, r) S_ell(t2)(r, r_i) r dr."""
    worst = 0.0
    g = RadialGrid(1e-4, 9.0, 600, order=2, max_step=0.0)
    for p in (HamiltonianParams(mu=0.2, nu=0.1), HamiltonianParams(omega=0.0, mu=0.2, nu=0.1)):
        rf, ri = 0.9, 1.3
        for ell in (0, 1, -2):
            def sector(a, b, tau, lam):
                req = PropagatorRequest(PolarPoint(b, 0.0), PolarPoint(a, 0.0), tau, p, lam,
                                        TimeContour("euclidean"))
                return oscillator_sector(req, ell) if p.omega > 0 else free_sector(req, ell)
            left = np.array([sector(rf, r, 0.4, 0.4) for r in g.nodes])
            right = np.array([sector(r, ri, 0.6, lam_sign * 0.4) for r in g.nodes])
            comp = 2 * math.pi * np.sum(g.weights * left * right)
            direct = sector(rf, ri, 1.0, 0.4)
            worst = max(worst, abs(comp - direct) / abs(direct))
    return worst


def _single_valued(rng, lam_sign):
    p = HamiltonianParams(mu=0.2, nu=0.1)
    qi, qf = _random_points(rng)
    req = PropagatorRequest(qi, qf, 1.0, p, 0.37, TimeContour("euclidean"))
    a = propagator_spectral_oscillator(req).value
    moved = req.replace(q_f=PolarPoint(qf.r, qf.theta + 2 * math.pi), lam=lam_sign * 0.37)
    b = propagator_spectral_oscillator(moved).value
    return abs(a - b) / abs(a)


def _tail_bound(rng, lam_sign):
    """Doubling the cutoff changes the sum by less than the reported bound (ratio <= 1)."""
    p = HamiltonianParams(mu=0.2, nu=0.1)
    worst = 0.0
    for L in (3, 5, 8):
        qi, qf = _random_points(rng)
        req = PropagatorRequest(qi, qf, 0.8, p, 0.4, TimeContour("euclidean"), ell_cutoff=L)
        a = propagator_spectral_oscillator(req)
        b = propagator_spectral_oscillator(req.replace(ell_cutoff=2 * L))
        worst = max(worst, abs(a.value - b.value) / a.tail_bound)
    return worst


def _lambda_periodicity(rng, lam_sign):
    """K_{lambda+1} = exp(-i dtheta) K_lambda in the gauge A = hbar lambda dtheta."""
    p = HamiltonianParams(mu=0.2, nu=0.1)
    qi, qf = _random_points(rng)
    req = PropagatorRequest(qi, qf, 1.0, p, 0.4, TimeContour("euclidean"), ell_cutoff=30)
    a = propagator_spectral_oscillator(req).value
    b = propagator_spectral_oscillator(req.replace(lam=lam_sign * 0.4 + 1.0, ell_cutoff=31)).value
    return abs(b - np.exp(-1j * (qf.theta - qi.theta)) * a) / abs(a)


def _pathint_order(rng, lam_sign):
    """Distance of the observed slicing order from 1 on two sectors, N in {4, 8, 16}."""
    p = HamiltonianParams(mu=0.2, nu=0.1)
    # radii far enough apart that the first-order term dominates from N = 4 on
    req = PropagatorRequest(PolarPoint(0.6, 0.3), PolarPoint(1.3, 1.4), 0.5, p, 0.4, TimeContour("euclidean"))
    worst = 0.0
    for ell in (0, 1):
        ref = spectral_radial_kernel(req, ell)
        cand = req.replace(lam=lam_sign * 0.4)
        errs = [abs(pathintegral_sector(cand, ell, n) - ref) for n in (4, 8, 16)]
        for e1, e2 in zip(errs, errs[1:]):
            worst = max(worst, abs(math.log2(e1 / e2) - 1.05))
    return worst


# name -> (function, tolerance, has lambda dependence)
CHECKS: dict[str, tuple[Callable, float, bool]] = {
    "specfun.gamma_recurrence": (_gamma_recurrence, 1e-12, False),
    "specfun.laguerre_recurrence": (_laguerre_recurrence, 1e-10, False),
    "specfun.bessel_half_order": (_bessel_half_order, 1e-12, False),
    "bundle.holonomy_winding": (_holonomy_winding, 1e-12, True),
    "bundle.gauge_invariance": (_gauge_invariance, 1e-10, True),
    "bundle.flatness": (_flatness, 1e-10, False),
    "hilbert.orthonormality": (_orthonormality, 1e-8, True),
    "hilbert.eigen_residual": (_eigen_residual, 1e-6, True),
    "hilbert.operator_identity": (_operator_identity, 1e-6, True),
    "hilbert.surface_terms": (_surface_terms, 1e-10, False),
    "hilbert.current_divergence": (_current_divergence, 1e-7, False),
    "hilbert.momentum_symmetry": (_momentum_symmetry, 1e-8, False),
    "models.flow_periodicity": (_flow_periodicity, 1e-12, False),
    "models.plane_wave": (_plane_wave, 1e-8, False),
    "propagators.mehler": (_mehler, 1e-6, False),
    "propagators.resummation": (_resummation, 1e-6, True),
    "propagators.free": (_free, 1e-4, False),
    "propagators.hermiticity": (_hermiticity, 1e-10, True),
    "propagators.semigroup": (_semigroup, 1e-5, True),
    "propagators.single_valued": (_single_valued, 1e-12, True),
    "propagators.tail_bound": (_tail_bound, 1.0, False),
    "propagators.lambda_periodicity": (_lambda_periodicity, 1e-12, True),
    "propagators.pathint_order": (_pathint_order, 0.25, True),
}


def run_checks(names=None, tolerances: dict | None = None, inject_fault: str | None = None,
               seed: int = 0) -> list[CheckResult]:
    """Run the selected checks (all by default) in a fixed order."""
    tolerances = dict(tolerances or {})
    selected = list(CHECKS) if names is None else list(names)
    unknown = [n for n in selected + list(tolerances) if n not in CHECKS]
    if inject_fault is not None and inject_fault not in CHECKS:
        unknown.append(inject_fault)
    if unknown:
        raise InputError(f"unknown checks: {sorted(set(unknown))}")
    if inject_fault is not None and not CHECKS[inject_fault][2]:
        raise InputError(f"check {inject_fault!r} does not depend on lambda; cannot inject a sign fault")
    out = []
    order = list(CHECKS)
    for name in selected:
        fn, tol, _ = CHECKS[name]
        i = order.index(name)
        tol = float(tolerances.get(name, tol))
        rng = np.random.default_rng([seed, i])
        t0 = time.perf_counter()
        res = float(fn(rng, -1.0 if name == inject_fault else 1.0))
        out.append(CheckResult(name, res if math.isfinite(res) else math.inf, tol, time.perf_counter() - t0))
    return out
