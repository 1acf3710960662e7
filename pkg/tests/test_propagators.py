import cmath
import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heisenflux.bundle import PolarPoint
from heisenflux.errors import CausticError, ConvergenceError, DomainError, InputError
from heisenflux.hilbert import HamiltonianParams, RadialGrid
from heisenflux.models import oscillator_energy, oscillator_radial
from heisenflux.propagators import (PropagatorRequest, TimeContour, free_sector, h_matrix_elements,
                                    oscillator_sector, propagator_closed_free, propagator_closed_oscillator,
                                    propagator_direct_sum_oscillator, propagator_spectral_free,
                                    propagator_spectral_oscillator, wick_extrapolate)

P0 = HamiltonianParams()
PG = HamiltonianParams(mu=0.2, nu=0.1)
FREE = HamiltonianParams(omega=0.0)
EUC = TimeContour("euclidean")

# generic arguments and values frozen from a 40-digit mpmath transcription
QF, QI = PolarPoint(1.2, 0.7), PolarPoint(0.5, 2.9)
PX = HamiltonianParams(mass=1.3, omega=0.9, hbar=1.1)
MEHLER_GENERIC = complex(0.24887016379624341199, -0.011816188909451084864)
FREE_GENERIC = complex(0.22455056064664686671, 0.030534612104041113525)


class _Conjugate(TimeContour):
    def effective(self, delta_t):
        return -complex(delta_t) * complex(1.0, self.delta)


def test_contour_validation():
    with pytest.raises(InputError):
        TimeContour("wick", 0.0)
    with pytest.raises(InputError):
        TimeContour("imaginary")
    assert TimeContour("wick", 0.1).effective(2.0) == complex(2.0, -0.2)
    assert EUC.effective(0.5) == -0.5j


def test_closed_forms_generic():
    assert propagator_closed_oscillator(QF, QI, 0.83, PX) == pytest.approx(MEHLER_GENERIC, rel=1e-13)
    assert propagator_closed_free(QF, QI, 0.83, PX) == pytest.approx(FREE_GENERIC, rel=1e-13)


def test_closed_form_limits():
    q = PolarPoint(1.3, 0.4)
    assert propagator_closed_free(q, q, 0.7, FREE) == pytest.approx(1 / (2j * math.pi * 0.7))
    k = propagator_closed_free(QF, QI, 0.7, FREE, EUC)
    assert k.imag == pytest.approx(0.0, abs=1e-16) and k.real > 0
    diag = propagator_closed_oscillator(q, q, 0.9, P0, EUC)
    assert abs(diag.imag) < 1e-16 and diag.real > 0
    slow = P0.replace(omega=1e-6)
    assert propagator_closed_oscillator(QF, QI, 0.8, slow) == pytest.approx(
        propagator_closed_free(QF, QI, 0.8, slow), rel=1e-9)
    with pytest.raises(CausticError):
        propagator_closed_oscillator(QF, QI, math.pi, P0)
    with pytest.raises(DomainError):
        propagator_closed_free(QF, QI, 0.0, FREE)


@pytest.mark.parametrize("dt", [0.4, 1.3, 2.9, 4.0, 7.5, -1.1])
def test_spectral_matches_mehler_on_real_axis(dt):
    # branch reduction handles omega dt outside [0, pi)
    req = PropagatorRequest(QI, QF, dt, P0, 0.0, TimeContour("real"))
    val = propagator_spectral_oscillator(req).value
    assert val == pytest.approx(propagator_closed_oscillator(QF, QI, dt, P0), rel=1e-10)


def test_caustic_guard():
    with pytest.raises(CausticError):
        propagator_spectral_oscillator(PropagatorRequest(QI, QF, math.pi + 5e-4, P0, 0.0, TimeContour("real")))


def test_wick_extrapolation_recovers_real_time():
    req = PropagatorRequest(QI, QF, 2.2, P0, 0.0, TimeContour("wick", 1e-5))
    val, err = wick_extrapolate(lambda q: propagator_spectral_oscillator(q).value, req)
    ex = propagator_closed_oscillator(QF, QI, 2.2, P0)
    assert abs(val - ex) / abs(ex) < 1e-8
    assert err < 1e-6
    with pytest.raises(InputError):
        wick_extrapolate(lambda q: 0j, req, (1e-3, 4e-4))


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
def test_resummation_matches_direct_sum(tau):
    req = PropagatorRequest(PolarPoint(0.7, 0.3), PolarPoint(1.3, 2.1), tau, PG, 0.4, EUC)
    a = propagator_spectral_oscillator(req)
    b = propagator_direct_sum_oscillator(req, 60)
    assert abs(a.value - b.value) <= 1e-6 * abs(a.value)
    assert a.tail_bound < 1e-15


def test_ground_state_dominance():
    # within one sector the first gap is 2 hbar omega
    qi, qf = PolarPoint(0.7, 0.3), PolarPoint(1.1, 1.0)
    f = oscillator_radial(0, 0, PG, 0.4, np.array([qf.r, qi.r]))
    e0 = oscillator_energy(0, 0, PG, 0.4)
    for tau in (4.0, 8.0):
        req = PropagatorRequest(qi, qf, tau, PG, 0.4, EUC)
        lead = math.exp(-tau * e0) * f[0] * np.conj(f[1])
        assert abs(oscillator_sector(req, 0) / lead - 1.0) < 2 * math.exp(-2 * tau)


def test_short_time_diagonal():
    q = PolarPoint(1.1, 0.2)
    for tau in (0.05, 0.02):
        req = PropagatorRequest(q, q, tau, P0, 0.0, EUC)
        val = propagator_spectral_oscillator(req).value
        assert val == pytest.approx(propagator_closed_oscillator(q, q, tau, P0, EUC), rel=1e-10)
        assert val.real * 2 * math.pi * tau == pytest.approx(1.0, rel=2 * tau)


def test_direct_sum_requires_damping():
    with pytest.raises(ConvergenceError):
        propagator_direct_sum_oscillator(PropagatorRequest(QI, QF, 1.0, P0, 0.0, TimeContour("real")))


def test_tail_bound_certifies_truncation():
    for L in (2, 4, 7):
        req = PropagatorRequest(QI, QF, 0.6, PG, 0.4, EUC, ell_cutoff=L)
        a = propagator_spectral_oscillator(req)
        b = propagator_spectral_oscillator(req.replace(ell_cutoff=2 * L))
        assert abs(a.value - b.value) <= a.tail_bound


@pytest.mark.parametrize("dt", [0.7, 2.5, 4.0])
def test_hermiticity(dt):
    fwd = PropagatorRequest(QI, QF, dt, PG, 0.4, TimeContour("wick", 1e-3))
    back = PropagatorRequest(QF, QI, dt, PG, 0.4, _Conjugate("wick", 1e-3))
    a = propagator_spectral_oscillator(fwd).value
    b = propagator_spectral_oscillator(back).value
    assert abs(a.conjugate() - b) <= 1e-10 * abs(a)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-3.0, max_value=3.0), st.floats(min_value=0.0, max_value=2 * math.pi))
def test_lambda_shift_is_a_gauge_phase(lam, theta_f):
    # lambda -> lambda + 1 relabels ell and multiplies by exp(-i dtheta) in the flux gauge
    qf = PolarPoint(1.1, theta_f)
    req = PropagatorRequest(QI, qf, 0.9, PG, lam, EUC, ell_cutoff=40)
    a = propagator_spectral_oscillator(req).value
    b = propagator_spectral_oscillator(req.replace(lam=lam + 1.0)).value
    assert abs(b - cmath.exp(-1j * (qf.theta - QI.theta)) * a) <= 1e-12 * abs(a) + 1e-300


def test_single_valued_in_theta():
    req = PropagatorRequest(QI, QF, 1.0, PG, 0.37, EUC)
    a = propagator_spectral_oscillator(req).value
    for k in (1, -1, 3):
        b = propagator_spectral_oscillator(req.replace(q_f=PolarPoint(QF.r, QF.theta + 2 * math.pi * k),
                                                       q_i=PolarPoint(QI.r, QI.theta - 2 * math.pi * k))).value
        assert abs(a - b) <= 1e-12 * abs(a)


def test_free_spectral_matches_gaussian():
    req = PropagatorRequest(QI, QF, 0.8, FREE, 0.0, TimeContour("wick", 1e-5))
    val, _ = wick_extrapolate(lambda q: propagator_spectral_free(q).value, req)
    ex = propagator_closed_free(QF, QI, 0.8, FREE)
    assert abs(val - ex) <= 1e-8 * abs(ex)


def test_free_heat_kernel_diagonal():
    q = PolarPoint(1.2, 0.5)
    val = propagator_spectral_free(PropagatorRequest(q, q, 0.8, FREE, 0.0, EUC)).value
    assert val == pytest.approx(1 / (2 * math.pi * 0.8), rel=1e-13)


@pytest.mark.parametrize("ell", [0, 2, -3])
def test_free_sector_against_quadrature(ell):
    p = HamiltonianParams(omega=0.0, mu=0.2, nu=0.1)
    req = PropagatorRequest(PolarPoint(0.9, 0), PolarPoint(1.4, 0), 0.7, p, 0.4, EUC)
    a = math.hypot(ell + 0.4, 0.4)
    integral = mp.quad(lambda k: k * mp.exp(-k ** 2 * 0.7 / 2) * mp.besselj(a, 1.4 * k) * mp.besselj(a, 0.9 * k),
                       [0, mp.inf])
    ref = complex(integral / (2 * mp.pi) * mp.exp(0.2j * mp.log(0.9 / 1.4)))
    assert abs(free_sector(req, ell) - ref) <= 1e-8 * abs(ref)


def test_free_requires_damped_contour_and_zero_omega():
    with pytest.raises(ConvergenceError):
        propagator_spectral_free(PropagatorRequest(QI, QF, 1.0, FREE, 0.0, TimeContour("real")))
    with pytest.raises(DomainError):
        propagator_spectral_free(PropagatorRequest(QI, QF, 1.0, P0, 0.0, EUC))


@pytest.mark.parametrize("params", [PG, HamiltonianParams(omega=0.0, mu=0.2, nu=0.1)], ids=["osc", "free"])
def test_semigroup(params):
    g = RadialGrid(1e-4, 9.0, 600, order=2, max_step=0.0)
    sector = oscillator_sector if params.omega > 0 else free_sector

    def s(a, b, tau, ell):
        return sector(PropagatorRequest(PolarPoint(b, 0), PolarPoint(a, 0), tau, params, 0.4, EUC), ell)

    for ell in (0, 1, -2):
        left = np.array([s(0.9, r, 0.4, ell) for r in g.nodes])
        right = np.array([s(r, 1.3, 0.6, ell) for r in g.nodes])
        comp = 2 * math.pi * np.sum(g.weights * left * right)
        direct = s(0.9, 1.3, 1.0, ell)
        assert abs(comp - direct) <= 1e-5 * abs(direct)


def test_h_matrix_elements():
    p = HamiltonianParams(mass=1.5, omega=0.8)
    r, pr = 1.3, 0.7
    assert h_matrix_elements(pr, 0, r, p) == pytest.approx(
        (pr ** 2 - 0.25 / r ** 2) / 3.0 + 0.75 * 0.64 * r ** 2, rel=1e-15)
    q = p.replace(nu=0.2, mu=0.1)
    assert h_matrix_elements(pr, 1, r, q, 0.3).imag == pytest.approx(-0.2 / (1.5 * r ** 2), rel=1e-14)
    big = h_matrix_elements(2.0, 3, 1e4, HamiltonianParams(omega=0.0))
    assert big == pytest.approx(2.0, rel=1e-6)
    with pytest.raises(DomainError):
        h_matrix_elements(1.0, 0, 0.0, p)


def test_request_roundtrip_and_record():
    req = PropagatorRequest(QI, QF, 0.6, PG, 0.4, TimeContour("wick", 1e-3), ell_cutoff=12)
    back = PropagatorRequest.from_dict(json.loads(json.dumps(req.to_dict())))
    assert back == req
    res = propagator_spectral_oscillator(req)
    rec = json.loads(res.to_json(req))
    assert set(rec) == {"request", "value_re", "value_im", "ell_cutoff", "tail_bound", "contour"}
    assert rec["ell_cutoff"] == 12
    with pytest.raises(InputError):
        PropagatorRequest.from_dict({**req.to_dict(), "extra": 1})
    with pytest.raises(DomainError):
        PropagatorRequest(QI, QF, -1.0, P0, 0.0, EUC)
