"""Flat U(1) connections on the punctured plane.

A connection is stored as ``A = hbar*lambda dtheta + d(chi)``: a flux part fixed
by the holonomy parameter ``lambda`` plus an optional single-valued pure gauge
``chi``. Flatness is therefore structural; :func:`flatness_residual` exists to
verify it numerically and to test raw user-supplied component fields.

Gauge functions can be written in a small expression language::

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | atom
    atom   := NUMBER | 'r' | 'theta' | 'pi'
            | ('sin' | 'cos') '(' expr ')'
            | 'pow' '(' expr ',' NUMBER ')'
            | '(' expr ')'

Example: ``"pow(r, 2) * sin(theta) + 0.5 * cos(2 * theta)"``.

Phase convention for momentum eigenfunctions: the base point is q0 = (r=1,
theta=0), the base phase is exp(i q0.p / hbar) and standard paths from q0 run
radially first and then along a counter-clockwise arc (:func:`standard_path`).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "PolarPoint",
    "GaugeFunction",
    "FlatConnection",
    "DiscretePath",
    "connection_components",
    "flatness_residual",
    "holonomy",
    "winding_number",
    "gauge_transform",
    "holonomy_class",
    "standard_path",
    "wrap_angle",
]

TWO_PI = 2.0 * math.pi


def wrap_angle(d):
    """Map an angle difference into [-pi, pi)."""
    return (np.asarray(d) + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class PolarPoint:
    """Point of the punctured plane; theta is stored in [0, 2*pi)."""

    r: float
    theta: float

    def __post_init__(self):
        r = float(self.r)
        th = float(self.theta)
        if not (math.isfinite(r) and r > 0.0):
            raise InputError(f"PolarPoint needs r > 0, got {self.r!r}")
        if not math.isfinite(th):
            raise InputError(f"PolarPoint needs a finite angle, got {self.theta!r}")
        th = th % TWO_PI
        if th >= TWO_PI:  # -tiny % 2pi rounds to 2pi
            th = 0.0
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", th)

    @property
    def xy(self) -> tuple[float, float]:
        return self.r * math.cos(self.theta), self.r * math.sin(self.theta)


# ---------------------------------------------------------------------------
# expression language for gauge functions

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]+)|(.))")


def _tokenize(text: str) -> list[tuple[str, str]]:
    out = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # pragma: no cover - the pattern matches any character
            raise InputError(f"cannot tokenize {text[pos:]!r}")
        num, name, sym = m.groups()
        if num is not None:
            out.append(("num", num))
        elif name is not None:
            out.append(("name", name))
        elif sym is not None and not sym.isspace():
            out.append(("sym", sym))
        pos = m.end()
    out.append(("end", ""))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            raise InputError(f"expected {want!r} but found {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        self.take("end")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("sym", "+"), ("sym", "-")):
            op = self.take()[1]
            rhs = self.term()
            node = ("add", node, rhs) if op == "+" else ("add", node, ("neg", rhs))
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("sym", "*"):
            self.take()
            node = ("mul", node, self.unary())
        return node

    def unary(self):
        if self.peek() == ("sym", "-"):
            self.take()
            return ("neg", self.unary())
        return self.atom()

    def number(self) -> float:
        sign = 1.0
        if self.peek() == ("sym", "-"):
            self.take()
            sign = -1.0
        return sign * float(self.take("num")[1])

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return ("const", float(val))
        if kind == "name":
            self.take()
            if val in ("r", "theta"):
                return ("var", val)
            if val == "pi":
                return ("const", math.pi)
            if val in ("sin", "cos"):
                self.take("sym", "(")
                arg = self.expr()
                self.take("sym", ")")
                return (val, arg)
            if val == "pow":
                self.take("sym", "(")
                base = self.expr()
                self.take("sym", ",")
                p = self.number()
                self.take("sym", ")")
                return ("pow", base, p)
            raise InputError(f"unknown name {val!r} in gauge expression")
        if (kind, val) == ("sym", "("):
            self.take()
            node = self.expr()
            self.take("sym", ")")
            return node
        raise InputError(f"unexpected token {val!r} in gauge expression")


def _eval(node, r, theta):
    op = node[0]
    if op == "const":
        return node[1] + 0.0 * r
    if op == "var":
        return r + 0.0 * theta if node[1] == "r" else theta + 0.0 * r
    if op == "add":
        return _eval(node[1], r, theta) + _eval(node[2], r, theta)
    if op == "mul":
        return _eval(node[1], r, theta) * _eval(node[2], r, theta)
    if op == "neg":
        return -_eval(node[1], r, theta)
    if op == "sin":
        return np.sin(_eval(node[1], r, theta))
    if op == "cos":
        return np.cos(_eval(node[1], r, theta))
    if op == "pow":
        return np.power(_eval(node[1], r, theta), node[2])
    raise AssertionError(op)  # pragma: no cover


def _diff(node, var):
    """Symbolic derivative of an expression tree."""
    op = node[0]
    if op == "const":
        return ("const", 0.0)
    if op == "var":
        return ("const", 1.0 if node[1] == var else 0.0)
    if op == "add":
        return ("add", _diff(node[1], var), _diff(node[2], var))
    if op == "mul":
        a, b = node[1], node[2]
        return ("add", ("mul", _diff(a, var), b), ("mul", a, _diff(b, var)))
    if op == "neg":
        return ("neg", _diff(node[1], var))
    if op == "sin":
        return ("mul", ("cos", node[1]), _diff(node[1], var))
    if op == "cos":
        return ("neg", ("mul", ("sin", node[1]), _diff(node[1], var)))
    if op == "pow":
        base, p = node[1], node[2]
        if p == 0.0:
            return ("const", 0.0)
        return ("mul", ("mul", ("const", p), ("pow", base, p - 1.0)), _diff(base, var))
    raise AssertionError(op)  # pragma: no cover


@dataclass(frozen=True)
class GaugeFunction:
    """Scalar gauge function chi(r, theta) together with its gradient.

    Build one from an expression string with :meth:`parse`, or from a pair of
    callables ``value(r, theta)`` and ``gradient(r, theta) -> (d_r, d_theta)``.
    Only expression-backed functions can be serialized.
    """

    value: Callable
    gradient: Callable
    expr: str | None = None

    @classmethod
    def parse(cls, text: str) -> "GaugeFunction":
        tree = _Parser(text).parse()
        dr = _diff(tree, "r")
        dth = _diff(tree, "theta")

        def value(r, theta):
            return _eval(tree, np.asarray(r, float), np.asarray(theta, float))

        def gradient(r, theta):
            r = np.asarray(r, float)
            theta = np.asarray(theta, float)
            return _eval(dr, r, theta), _eval(dth, r, theta)

        return cls(value, gradient, text)

    def __add__(self, other: "GaugeFunction") -> "GaugeFunction":
        a, b = self, other

        def value(r, theta):
            return a.value(r, theta) + b.value(r, theta)

        def gradient(r, theta):
            ga, gb = a.gradient(r, theta), b.gradient(r, theta)
            return ga[0] + gb[0], ga[1] + gb[1]

        expr = None
        if a.expr is not None and b.expr is not None:
            expr = f"({a.expr}) + ({b.expr})"
        return GaugeFunction(value, gradient, expr)

    def check_single_valued(self, tol: float = 1e-9) -> None:
        """Raise InputError if chi(r, 0) and chi(r, 2*pi) disagree at sample radii."""
        r = np.array([0.1, 0.5, 1.0, 2.0, 5.0])
        a = np.asarray(self.value(r, np.zeros_like(r)), float)
        b = np.asarray(self.value(r, np.full_like(r, TWO_PI)), float)
        if not np.all(np.abs(a - b) <= tol * (1.0 + np.abs(a))):
            raise InputError("gauge function is not single-valued on the punctured plane")


@dataclass(frozen=True)
class FlatConnection:
    """A = hbar*lam dtheta + d(chi) on the punctured plane."""

    lam: float
    pure_gauge: GaugeFunction | None = field(default=None)

    def __post_init__(self):
        lam = float(self.lam)
        if not math.isfinite(lam):
            raise InputError(f"lambda must be finite, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)

    def to_json(self) -> str:
        chi = None
        if self.pure_gauge is not None:
            if self.pure_gauge.expr is None:
                raise InputError("only expression-backed gauge functions are serializable")
            chi = self.pure_gauge.expr
        return json.dumps({"lambda": self.lam, "chi": chi})

    @classmethod
    def from_json(cls, text: str | dict) -> "FlatConnection":
        data = json.loads(text) if isinstance(text, str) else dict(text)
        extra = set(data) - {"lambda", "chi"}
        if extra:
            raise InputError(f"unknown connection keys: {sorted(extra)}")
        if "lambda" not in data:
            raise InputError("connection JSON needs a 'lambda' entry")
        chi = data.get("chi")
        gauge = None
        if chi is not None:
            gauge = GaugeFunction.parse(str(chi))
            gauge.check_single_valued()
        return cls(float(data["lambda"]), gauge)


def connection_components(conn: FlatConnection, q: PolarPoint, hbar: float = 1.0) -> tuple[float, float]:
    """Coordinate components (A_r, A_theta) of the connection at q."""
    a_r, a_th = 0.0, hbar * conn.lam
    if conn.pure_gauge is not None:
        dr, dth = conn.pure_gauge.gradient(q.r, q.theta)
        a_r += float(dr)
        a_th += float(dth)
    return a_r, a_th


# Gauss-Legendre rule for edge integrals of the plaquette circulation
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _edge_integral(f, a, b):
    """Integral of f over [a, b] along the last axis, vectorized over leading shapes."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    acc = 0.0
    for x, w in zip(_GL_X, _GL_W):
        acc = acc + w * f(mid + half * x)
    return acc * half


def flatness_residual(conn, r_nodes: Sequence[float], theta_nodes: Sequence[float], hbar: float = 1.0) -> float:
    """Max |d_r A_theta - d_theta A_r| over the interior nodes of an (r, theta) grid.

    The field strength at a node is estimated in Stokes form: the circulation
    of A around the coordinate rectangle spanned by the node's two neighbours in
    each direction, divided by the rectangle's coordinate area. This is a
    second-order central difference of edge-averaged components, and it is
    exactly zero (to roundoff) for a gradient field.

    ``conn`` is a :class:`FlatConnection` or a callable ``(r, theta) -> (A_r,
    A_theta)`` accepting numpy arrays.
    """
    r = np.asarray(r_nodes, float)
    th = np.asarray(theta_nodes, float)
    if r.ndim != 1 or th.ndim != 1 or r.size < 3 or th.size < 3:
        raise InputError("flatness_residual needs at least 3 nodes along each axis")
    if np.any(np.diff(r) <= 0) or np.any(np.diff(th) <= 0) or np.any(r <= 0):
        raise InputError("grid nodes must be strictly increasing with r > 0")

    if isinstance(conn, FlatConnection):
        def field_fn(rr, tt):
            a_r = np.zeros(np.broadcast(rr, tt).shape)
            a_t = np.full(a_r.shape, hbar * conn.lam)
            if conn.pure_gauge is not None:
                gr, gt = conn.pure_gauge.gradient(rr, tt)
                a_r = a_r + gr
                a_t = a_t + gt
            return a_r, a_t
    elif callable(conn):
        field_fn = conn
    else:
        raise InputError("flatness_residual expects a FlatConnection or a component callable")

    r0, r1 = r[:-2][:, None], r[2:][:, None]
    t0, t1 = th[:-2][None, :], th[2:][None, :]
    # counter-clockwise in the (r, theta) coordinate plane
    bottom = _edge_integral(lambda s: field_fn(s, t0 + 0.0 * s)[0], r0 + 0.0 * t0, r1 + 0.0 * t0)
    right = _edge_integral(lambda s: field_fn(r1 + 0.0 * s, s)[1], t0 + 0.0 * r1, t1 + 0.0 * r1)
    top = _edge_integral(lambda s: field_fn(s, t1 + 0.0 * s)[0], r0 + 0.0 * t1, r1 + 0.0 * t1)
    left = _edge_integral(lambda s: field_fn(r0 + 0.0 * s, s)[1], t0 + 0.0 * r0, t1 + 0.0 * r0)
    circ = bottom + right - top - left
    area = (r1 - r0) * (t1 - t0)
    return float(np.max(np.abs(circ / area)))


@dataclass(frozen=True)
class DiscretePath:
    """Polygonal path through the punctured plane.

    Consecutive vertices must differ in angle by less than pi (after wrapping),
    which makes the winding of every segment unambiguous and keeps straight
    segments away from the origin.
    """

    vertices: tuple[PolarPoint, ...]
    closed: bool = False

    def __post_init__(self):
        verts = tuple(v if isinstance(v, PolarPoint) else PolarPoint(*v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 2:
            raise InputError("a path needs at least two vertices")
        d = self.angle_steps()
        if np.any(np.abs(d) >= math.pi * (1.0 - 1e-12)):
            raise InputError("path segment sweeps an angle >= pi (crosses or grazes the origin)")
        if self.closed:
            a, b = verts[0], verts[-1]
            if abs(a.r - b.r) > 1e-12 * a.r or abs(float(wrap_angle(a.theta - b.theta))) > 1e-12:
                raise InputError("closed path must end at its first vertex")

    def angle_steps(self) -> np.ndarray:
        th = np.array([v.theta for v in self.vertices])
        return wrap_angle(np.diff(th))

    @property
    def start(self) -> PolarPoint:
        return self.vertices[0]

    @property
    def end(self) -> PolarPoint:
        return self.vertices[-1]

    def concat(self, other: "DiscretePath") -> "DiscretePath":
        a, b = self.end, other.start
        if abs(a.r - b.r) > 1e-12 * a.r or abs(float(wrap_angle(a.theta - b.theta))) > 1e-12:
            raise InputError("paths do not join")
        verts = self.vertices + other.vertices[1:]
        closed = _same_point(verts[0], verts[-1])
        return DiscretePath(verts, closed)

    def reversed(self) -> "DiscretePath":
        return DiscretePath(self.vertices[::-1], self.closed)

    @classmethod
    def circle(cls, r: float = 1.0, n: int = 64, turns: int = 1, theta0: float = 0.0) -> "DiscretePath":
        """Closed polygon on a circle of radius r, winding ``turns`` times (negative = clockwise)."""
        if turns == 0:
            raise InputError("use a non-zero number of turns")
        steps = max(int(n), 3) * abs(turns)
        th = theta0 + np.linspace(0.0, TWO_PI * turns, steps + 1)
        verts = [PolarPoint(r, t) for t in th]
        verts[-1] = verts[0]
        return cls(tuple(verts), True)


def _same_point(a: PolarPoint, b: PolarPoint) -> bool:
    return abs(a.r - b.r) <= 1e-12 * a.r and abs(float(wrap_angle(a.theta - b.theta))) <= 1e-12


def _line_integral(conn: FlatConnection, path: DiscretePath, hbar: float) -> float:
    steps = path.angle_steps()
    total = hbar * conn.lam * float(np.sum(steps))
    if conn.pure_gauge is not None:
        r = np.array([v.r for v in path.vertices])
        th = np.array([v.theta for v in path.vertices])
        # unwrap so chi is followed continuously along the path
        th = th[0] + np.concatenate([[0.0], np.cumsum(steps)])
        chi = np.asarray(conn.pure_gauge.value(r, th), float)
        total += float(chi[-1] - chi[0])
    return total


def holonomy(conn: FlatConnection, path: DiscretePath, hbar: float = 1.0) -> complex:
    """Parallel-transport phase exp(-(i/hbar) * line integral of A along the path).

    The flux part integrates exactly to hbar*lam*(sum of angle steps); the
    gradient part telescopes to chi(end) - chi(start) with chi followed
    continuously. The modulus is 1 by construction.
    """
    phase = -_line_integral(conn, path, hbar) / hbar
    return complex(math.cos(phase), math.sin(phase))


def winding_number(path: DiscretePath) -> int:
    """Number of counter-clockwise turns of a closed path around the origin."""
    if not path.closed:
        raise InputError("winding_number needs a closed path")
    return int(round(float(np.sum(path.angle_steps())) / TWO_PI))


def gauge_transform(conn: FlatConnection, chi: GaugeFunction | str | None) -> FlatConnection:
    """Shift the connection by the gradient of a single-valued function."""
    if chi is None:
        return conn
    if isinstance(chi, str):
        chi = GaugeFunction.parse(chi)
    chi.check_single_valued()
    new = chi if conn.pure_gauge is None else conn.pure_gauge + chi
    return FlatConnection(conn.lam, new)


def holonomy_class(conn: FlatConnection) -> float:
    """lambda mod 1, in [0, 1)."""
    c = conn.lam % 1.0
    return 0.0 if c >= 1.0 else c


def standard_path(q: PolarPoint, base: PolarPoint | None = None, turns: int = 0, n_arc: int = 16) -> DiscretePath:
    """Radial leg from the base point, then a counter-clockwise arc to q.

    ``turns`` adds whole extra loops around the origin to the arc (negative
    values loop clockwise), which changes the homotopy class of the path.
    """
    base = PolarPoint(1.0, 0.0) if base is None else base
    verts = [base]
    if abs(q.r - base.r) > 0.0:
        verts.append(PolarPoint(q.r, base.theta))
    sweep = (q.theta - base.theta) % TWO_PI + TWO_PI * turns
    k = max(int(n_arc), int(math.ceil(abs(sweep) / (0.5 * math.pi))) + 1)
    if sweep != 0.0:
        for j in range(1, k + 1):
            verts.append(PolarPoint(q.r, base.theta + sweep * j / k))
        verts[-1] = q
    if len(verts) == 1:
        verts.append(q)
    return DiscretePath(tuple(verts), False)
