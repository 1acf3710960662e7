"""Configuration-space representation on the punctured plane in polar coordinates.

States are handled one angular sector at a time: a :class:`RadialMode` holds
samples of f(r) for psi(r, theta) = f(r) exp(i*ell*theta). All radial work
happens on a logarithmic grid, r = exp(s), where power laws r**a near the
origin are smooth and the radial measure r dr becomes r**2 ds.

Operators (metric g = diag(1, r**2), so sqrt(g) = r):

    p_r      = -i hbar (d/dr + 1/(2r))
    p_theta  = hbar (ell + lambda)
    H_{mu,nu} f = -hbar**2/(2m) [f'' + (1 + 4i nu) f'/r - (4(mu**2 + nu**2) + (ell + lambda)**2) f/r**2]
                  + m omega**2 r**2 f / 2

In the log variable the bracket times r**2 reads f_ss + 4i nu f_s - c f, which
is what the code differentiates.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .bundle import DiscretePath, FlatConnection, PolarPoint, holonomy
from .errors import DomainError, InputError, UnsupportedRepresentationError

__all__ = [
    "RadialGrid",
    "RadialMode",
    "HamiltonianParams",
    "inner_product",
    "norm",
    "apply_p_r",
    "apply_p_theta",
    "apply_hamiltonian",
    "quantum_correction",
    "surface_term",
    "probability_current",
    "current_divergence",
    "momentum_wavefunction",
]


@dataclass(frozen=True)
class HamiltonianParams:
    """Physical parameters of H_{mu,nu}; omega = 0 is the free particle."""

    mass: float = 1.0
    omega: float = 1.0
    mu: float = 0.0
    nu: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("mass", "omega", "mu", "nu", "hbar"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise InputError(f"{name} must be finite")
            object.__setattr__(self, name, val)
        if self.mass <= 0.0 or self.hbar <= 0.0:
            raise InputError("mass and hbar must be positive")
        if self.omega < 0.0:
            raise InputError("omega must be >= 0")

    @property
    def length_scale(self) -> float:
        """Oscillator length sqrt(hbar / (m omega))."""
        if self.omega == 0.0:
            raise DomainError("the free particle has no oscillator length")
        return math.sqrt(self.hbar / (self.mass * self.omega))

    def replace(self, **kw) -> "HamiltonianParams":
        data = dict(mass=self.mass, omega=self.omega, mu=self.mu, nu=self.nu, hbar=self.hbar)
        data.update(kw)
        return HamiltonianParams(**data)


def _fd_weights(offsets: tuple[int, ...], m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at 0 from unit-spaced offsets."""
    x = np.asarray(offsets, float)
    npts = len(x)
    vander = np.array([x ** i / math.factorial(i) for i in range(npts)])
    rhs = np.zeros(npts)
    rhs[m] = 1.0
    return np.linalg.solve(vander, rhs)


class _Stencil:
    """Per-node gather indices and weights for one derivative order."""

    def __init__(self, index: np.ndarray, weight: np.ndarray):
        self.index = index
        self.weight = weight

    def apply(self, f: np.ndarray) -> np.ndarray:
        return np.sum(f[..., self.index] * self.weight, axis=-1)


class RadialGrid:
    """Log-spaced radial nodes with quadrature weights for integrals of f(r) r dr.

    Nodes are r_k = r_min exp(k h), k = 1..n_nodes, so they lie in (r_min,
    r_max]. Weights are h r_k**2 times the fourth-order end-corrected
    trapezoid factors (3/8, 7/6, 23/24, 1, ..., 1, 23/24, 7/6, 3/8).

    Derivatives in s = log r use central stencils of ``order`` (one-sided of
    the same order at the edges). Close to the origin the stencil stride grows
    so that its step in s is about ``max_step``: samples there are nearly flat
    and an unstrided second difference would amplify their rounding errors by
    1/(h r)**2.
    """

    def __init__(self, r_min: float, r_max: float, n_nodes: int, order: int = 6,
                 max_step: float = 0.06):
        r_min, r_max, n_nodes = float(r_min), float(r_max), int(n_nodes)
        if not (0.0 < r_min < r_max) or not math.isfinite(r_max):
            raise InputError("need 0 < r_min < r_max")
        if n_nodes < 8:
            raise InputError("a radial grid needs at least 8 nodes")
        if order not in (2, 4, 6, 8):
            raise InputError("stencil order must be 2, 4, 6 or 8")
        self.r_min = r_min
        self.r_max = r_max
        self.n_nodes = n_nodes
        self.order = int(order)
        self.max_step = float(max_step)
        self.h = math.log(r_max / r_min) / n_nodes
        self.s = math.log(r_min) + self.h * np.arange(1, n_nodes + 1)
        r = np.exp(self.s)
        r[-1] = r_max
        self.nodes = r
        c = np.ones(n_nodes)
        c[:3] = c[-3:][::-1] = (3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0)
        self.weights = self.h * r * r * c
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)
        self.stride = self._strides()
        self._d1 = self._build(1)
        self._d2 = self._build(2)

    def _strides(self) -> np.ndarray:
        # target step max_step below r_ref, shrinking like 1/r above it
        r_ref = 1e3 * self.r_min
        target = self.max_step * np.minimum(1.0, r_ref / self.nodes)
        q = np.maximum(1, np.rint(target / self.h)).astype(int)
        q[q * self.order > self.n_nodes // 2] = 1
        return q

    def _build(self, m: int) -> _Stencil:
        n, p = self.n_nodes, self.order
        half = p // 2
        edge_pts = p + 1 if m == 1 else p + 2
        index = []
        weight = []
        cache: dict[tuple[tuple[int, ...], int], np.ndarray] = {}
        width = edge_pts
        for k in range(n):
            q = int(self.stride[k])
            if k - half * q >= 0 and k + half * q <= n - 1:
                offs = tuple(range(-half, half + 1))
            else:
                lo = -(k // q)
                hi = (n - 1 - k) // q
                start = max(lo, min(-half, hi - edge_pts + 1))
                offs = tuple(range(start, start + edge_pts))
                if offs[-1] > hi:
                    q = 1
                    start = max(-k, min(-half, n - 1 - k - edge_pts + 1))
                    offs = tuple(range(start, start + edge_pts))
            key = (offs, m)
            if key not in cache:
                cache[key] = _fd_weights(offs, m)
            w = cache[key] / (q * self.h) ** m
            idx = k + q * np.asarray(offs)
            # pad to a common width with zero weights
            pad = width - len(offs)
            index.append(np.concatenate([idx, np.full(pad, k)]))
            weight.append(np.concatenate([w, np.zeros(pad)]))
        return _Stencil(np.array(index), np.array(weight))

    def d_ds(self, f) -> np.ndarray:
        """First derivative in s = log r."""
        return self._d1.apply(np.asarray(f))

    def d2_ds2(self, f) -> np.ndarray:
        """Second derivative in s = log r."""
        return self._d2.apply(np.asarray(f))

    @classmethod
    def for_oscillator(cls, params: HamiltonianParams, n_nodes: int = 2000, u_min: float = 8e-6,
                       u_max: float = 12.0, **kw) -> "RadialGrid":
        """Grid in units of the oscillator length: r from u_min*L to u_max*L."""
        L = params.length_scale
        return cls(u_min * L, u_max * L, n_nodes, **kw)

    def descriptor(self) -> dict:
        return {"r_min": self.r_min, "r_max": self.r_max, "n_nodes": self.n_nodes, "spacing": "log"}

    def to_json(self) -> str:
        return json.dumps(self.descriptor())

    @classmethod
    def from_json(cls, text: str | dict) -> "RadialGrid":
        data = json.loads(text) if isinstance(text, str) else dict(text)
        extra = set(data) - {"r_min", "r_max", "n_nodes", "spacing"}
        if extra:
            raise InputError(f"unknown grid keys: {sorted(extra)}")
        if data.get("spacing", "log") != "log":
            raise InputError("only log spacing is supported")
        try:
            return cls(data["r_min"], data["r_max"], data["n_nodes"])
        except KeyError as exc:
            raise InputError(f"grid descriptor misses {exc}") from None

    def integrate(self, values) -> complex | float:
        """Quadrature of values(r) * r dr over the grid."""
        return np.sum(self.weights * np.asarray(values))

    def calibration_error(self) -> float:
        """|grid integral of r exp(-r^2) - (1 - exp(-r_max^2))/2|, should be below 1e-10."""
        r = self.nodes
        exact = 0.5 * (-math.expm1(-self.r_max ** 2))
        return abs(float(self.integrate(np.exp(-r * r))) - exact)

    def same_as(self, other: "RadialGrid") -> bool:
        return (self is other) or (self.r_min == other.r_min and self.r_max == other.r_max
                                   and self.n_nodes == other.n_nodes and self.order == other.order
                                   and self.max_step == other.max_step)

    def __eq__(self, other):
        return isinstance(other, RadialGrid) and self.same_as(other)

    def __hash__(self):
        return hash((self.r_min, self.r_max, self.n_nodes, self.order))

    def __repr__(self):
        return f"RadialGrid(r_min={self.r_min!r}, r_max={self.r_max!r}, n_nodes={self.n_nodes})"


@dataclass(frozen=True)
class RadialMode:
    """Angular sector ell with radial samples f(r_k) on a grid."""

    grid: RadialGrid
    ell: int
    samples: np.ndarray

    def __post_init__(self):
        vals = np.array(self.samples, dtype=complex)
        if vals.shape != (self.grid.n_nodes,):
            raise InputError(f"expected {self.grid.n_nodes} samples, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise InputError("mode samples must be finite")
        if int(self.ell) != self.ell:
            raise InputError("ell must be an integer")
        vals.setflags(write=False)
        object.__setattr__(self, "samples", vals)
        object.__setattr__(self, "ell", int(self.ell))

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def with_samples(self, values) -> "RadialMode":
        return RadialMode(self.grid, self.ell, values)

    def __add__(self, other: "RadialMode") -> "RadialMode":
        _check_same(self, other)
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other: "RadialMode") -> "RadialMode":
        _check_same(self, other)
        return self.with_samples(self.samples - other.samples)

    def __mul__(self, c) -> "RadialMode":
        return self.with_samples(self.samples * c)

    __rmul__ = __mul__

    def evaluate(self, theta) -> np.ndarray:
        """psi(r_k, theta) for each node (theta scalar)."""
        return self.samples * np.exp(1j * self.ell * theta)

    # serialization
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "re_f", "im_f"])
        for r, v in zip(self.grid.nodes, self.samples):
            w.writerow([f"{r:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "grid": self.grid.descriptor(),
            "ell": self.ell,
            "re": [float(v) for v in self.samples.real],
            "im": [float(v) for v in self.samples.imag],
        })

    @classmethod
    def from_json(cls, text: str | dict) -> "RadialMode":
        data = json.loads(text) if isinstance(text, str) else dict(text)
        grid = RadialGrid.from_json(data["grid"])
        vals = np.asarray(data["re"], float) + 1j * np.asarray(data["im"], float)
        return cls(grid, int(data["ell"]), vals)

    @classmethod
    def from_csv(cls, text: str, ell: int, grid: RadialGrid) -> "RadialMode":
        rows = list(csv.reader(io.StringIO(text)))
        body = rows[1:] if rows and rows[0][0] == "r" else rows
        r = np.array([float(x[0]) for x in body])
        if r.shape != grid.nodes.shape or not np.allclose(r, grid.nodes, rtol=1e-14, atol=0):
            raise InputError("CSV radii do not match the grid")
        vals = np.array([float(x[1]) + 1j * float(x[2]) for x in body])
        return cls(grid, ell, vals)


def _check_same(a: RadialMode, b: RadialMode) -> None:
    if not a.grid.same_as(b.grid):
        raise InputError("modes live on different grids")
    if a.ell != b.ell:
        raise InputError("modes belong to different angular sectors")


# ---------------------------------------------------------------------------
# operators

def inner_product(psi: RadialMode, phi: RadialMode) -> complex:
    """<psi|phi> = 2 pi delta_{ell, ell'} (sum_k w_k conj(psi_k) phi_k + inner cap)."""
    if not psi.grid.same_as(phi.grid):
        raise InputError("inner_product needs modes on the same grid")
    if psi.ell != phi.ell:
        return 0j
    g = psi.grid
    vals = np.conj(psi.samples) * phi.samples
    total = np.sum(g.weights * vals)
    # cap (0, r_1]: integrand ~ r**s near the origin, s from the two innermost nodes.
    # Products of domain functions (s >= 0) and f p_r g terms (s >= -1) qualify;
    # steeper growth only comes from rounding noise and is left out.
    v1, v2 = vals[0], vals[1]
    if v1 != 0 and v2 != 0:
        s = math.log(abs(v2) / abs(v1)) / math.log(g.nodes[1] / g.nodes[0])
        if s >= -1.25:
            total += v1 * g.nodes[0] ** 2 / (max(s, -1.0) + 2.0)
    return complex(2.0 * math.pi * total)


def norm(psi: RadialMode) -> float:
    return math.sqrt(max(inner_product(psi, psi).real, 0.0))


def apply_p_r(psi: RadialMode, hbar: float = 1.0) -> RadialMode:
    """Radial momentum -i hbar (f' + f/(2r))."""
    g = psi.grid
    f = psi.samples
    return psi.with_samples(-1j * hbar * (g.d_ds(f) + 0.5 * f) / g.nodes)


def _check_flux_gauge(conn: FlatConnection) -> None:
    if conn.pure_gauge is not None:
        raise UnsupportedRepresentationError(
            "operators act sector by sector only in the gauge A = hbar*lambda dtheta; "
            "drop the pure-gauge part (it is unitarily removable)"
        )


def apply_p_theta(psi: RadialMode, conn: FlatConnection, hbar: float = 1.0) -> RadialMode:
    """Angular momentum hbar (ell + lambda)."""
    _check_flux_gauge(conn)
    return psi * (hbar * (psi.ell + conn.lam))


def _centrifugal(params: HamiltonianParams, ell: int, lam: float) -> float:
    return 4.0 * (params.mu ** 2 + params.nu ** 2) + (ell + lam) ** 2


def apply_hamiltonian(params: HamiltonianParams, conn: FlatConnection, psi: RadialMode) -> RadialMode:
    """H_{mu,nu} on one angular sector (see module docstring for the operator)."""
    _check_flux_gauge(conn)
    g = psi.grid
    f = psi.samples
    r = g.nodes
    c = _centrifugal(params, psi.ell, conn.lam)
    bracket = g.d2_ds2(f) + 4j * params.nu * g.d_ds(f) - c * f
    kin = -(params.hbar ** 2 / (2.0 * params.mass)) * bracket / (r * r)
    pot = 0.5 * params.mass * params.omega ** 2 * r * r * f
    return psi.with_samples(kin + pot)


def quantum_correction(params: HamiltonianParams, psi: RadialMode) -> RadialMode:
    """Delta_{mu,nu} for g = r**2, the difference H_{mu,nu} - H_{0,0}.

    Sum of three terms: hbar**2 4 mu**2 / (2m r**2), hbar**2 nu**2 4 / (2m r**2)
    and the symmetrized (hbar nu / 2m) [(2/r) p_r + p_r (2/r)]. The second
    ordering is evaluated with the exact commutator p_r (h f) = h p_r f - i hbar h' f.
    """
    hb, m = params.hbar, params.mass
    r = psi.grid.nodes
    f = psi.samples
    two_over_r = 2.0 / r
    pf = apply_p_r(psi, hb).samples
    t1 = hb * hb * 4.0 * params.mu ** 2 / (2.0 * m * r * r) * f
    t2 = hb * hb * params.nu ** 2 * 4.0 / (2.0 * m * r * r) * f
    # p_r((2/r) f) = (2/r) p_r f - i hbar (-2/r**2) f
    sym = two_over_r * pf + (two_over_r * pf + 1j * hb * (2.0 / (r * r)) * f)
    t3 = hb * params.nu / (2.0 * m) * sym
    return psi.with_samples(t1 + t2 + t3)


def surface_term(psi: RadialMode) -> tuple[float, float]:
    """Boundary values of r |f|**2: extrapolated to r -> 0, and at r_max."""
    r = psi.grid.nodes
    g = r * np.abs(psi.samples) ** 2
    # quadratic through the three innermost nodes, evaluated at r = 0
    r0, r1, r2 = r[:3]
    g0, g1, g2 = g[:3]
    at0 = (g0 * r1 * r2 / ((r0 - r1) * (r0 - r2))
           + g1 * r0 * r2 / ((r1 - r0) * (r1 - r2))
           + g2 * r0 * r1 / ((r2 - r0) * (r2 - r1)))
    return float(at0), float(g[-1])


def probability_current(psi: RadialMode, params: HamiltonianParams, conn: FlatConnection) -> tuple[RadialMode, RadialMode]:
    """Covariant current components (J_r, J_theta) for the sector.

    With the dressed amplitude R = r**(2i nu) f the radial component is
    J_r = (hbar/m) Im(conj(R) R'), equivalently Im(conj(f) f') + 2 nu |f|**2 / r,
    and J_theta = (hbar/m)(ell + lambda)|f|**2. The mu dependence cancels
    between the g**mu dressing and the g**(-2 mu) prefactor. Differentiating R
    rather than f keeps the phase r**(-2i nu) of stationary modes out of the
    stencil.
    """
    _check_flux_gauge(conn)
    g = psi.grid
    f = psi.samples
    r = g.nodes
    dressed = f * np.exp(2j * params.nu * np.log(r)) if params.nu != 0.0 else f
    dens = np.abs(f) ** 2
    jr = params.hbar / params.mass * np.imag(np.conj(dressed) * g.d_ds(dressed)) / r
    jt = params.hbar / params.mass * (psi.ell + conn.lam) * dens
    return psi.with_samples(jr), psi.with_samples(jt)


def current_divergence(j_r: RadialMode) -> np.ndarray:
    """(1/r) d/dr (r J_r); the angular part vanishes inside a sector."""
    g = j_r.grid
    r = g.nodes
    return np.real(g.d_ds(r * j_r.samples)) / (r * r)


def momentum_wavefunction(q: PolarPoint, p: tuple[float, float], conn: FlatConnection,
                          base: PolarPoint, path: DiscretePath, hbar: float = 1.0) -> complex:
    """<q|p> with h(p) = 1 and base phase exp(i q0.p / hbar).

    Equals Omega[P] exp(i q.p / hbar) / (2 pi hbar sqrt(r)), where Omega[P] is the
    holonomy along the supplied path from ``base`` to ``q``.
    """
    if not _close(path.start, base) or not _close(path.end, q):
        raise InputError("path must run from the base point to q")
    px, py = float(p[0]), float(p[1])
    x, y = q.xy
    phase = (x * px + y * py) / hbar
    omega_p = holonomy(conn, path, hbar)
    return omega_p * complex(math.cos(phase), math.sin(phase)) / (2.0 * math.pi * hbar * math.sqrt(q.r))


def _close(a: PolarPoint, b: PolarPoint) -> bool:
    d = (a.theta - b.theta + math.pi) % (2.0 * math.pi) - math.pi
    return abs(a.r - b.r) <= 1e-12 * max(a.r, b.r) and abs(d) <= 1e-12
