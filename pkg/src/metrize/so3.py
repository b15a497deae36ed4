"""Spherical atlas, rotation generators and the SO(3)-invariant families.

Coordinates are ordered ``(r, theta, phi)`` in 3D and ``(t, r, theta, phi)``
in 4D (the first slot may be named ``u`` and the second ``v`` for isothermal
input).  The second spherical chart is the first one composed with the
rotation ``nu(x, y, z) = (-x, -z, -y)``.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from . import expr
from .calculus import (
    Chart,
    ConnectionField,
    ConstantField,
    Diffeo,
    FunctionField,
    GridSpec,
    MetricField,
    ScalarField,
    VectorFieldDef,
    as_field,
)
from .errors import DegenerateProfile, DomainError
from .expr import Jet2

TWO_PI = 2.0 * math.pi
CUT_EPS = 1e-12
NONZERO_EPS = 1e-12

_INF = math.inf
_ANGLES = ((0.0, math.pi), (0.0, TWO_PI))


def _cartesian_excluded(points):
    return np.all(points == 0.0, axis=1)


CARTESIAN = Chart("cartesian", ("x", "y", "z"), ((-_INF, _INF),) * 3, _cartesian_excluded)
FIRST = Chart("first-spherical", ("r", "theta", "phi"), ((0.0, _INF),) + _ANGLES)
SECOND = Chart("second-spherical", ("r", "theta", "phi"), ((0.0, _INF),) + _ANGLES)


def spherical_chart_4d(names: Sequence[str] = ("u", "v", "theta", "phi"), which: str = "first") -> Chart:
    return Chart(f"{which}-spherical-4d", tuple(names), ((-_INF, _INF), (0.0, _INF)) + _ANGLES)


def spherical_chart_3d(names: Sequence[str] = ("r", "theta", "phi"), which: str = "first") -> Chart:
    base = FIRST if which == "first" else SECOND
    if tuple(names) == base.coord_names:
        return base
    return Chart(base.id, tuple(names), base.bounds)


FIRST_4D = spherical_chart_4d()
SECOND_4D = spherical_chart_4d(which="second")


def angular_offset(chart: Chart) -> int:
    """Index of ``theta`` in the chart (``phi`` follows it)."""
    return chart.dim - 2


def default_grid(chart: Chart, count: int = 20) -> GridSpec:
    axes = []
    for i in range(chart.dim):
        if chart.dim == 4 and i == 0:
            axes.append((-1.0, 1.0, count))
        elif i == angular_offset(chart):
            axes.append((0.2, math.pi - 0.2, count))
        elif i == angular_offset(chart) + 1:
            axes.append((0.1, TWO_PI - 0.1, count))
        else:
            axes.append((0.5, 3.0, count))
    return GridSpec(tuple(axes))


# --------------------------------------------------------------------------
# Chart maps (generic over floats, arrays and jets)
# --------------------------------------------------------------------------

def _wrap_2pi(phi):
    if isinstance(phi, Jet2):
        return Jet2(np.where(phi.value < 0, phi.value + TWO_PI, phi.value), phi.grad, phi.hess)
    if isinstance(phi, np.ndarray):
        return np.where(phi < 0, phi + TWO_PI, phi)
    return phi + TWO_PI if phi < 0 else phi


def _sph_to_cart_env(r, theta, phi):
    st = expr.sin(theta)
    return r * st * expr.cos(phi), r * st * expr.sin(phi), r * expr.cos(theta)


def _cart_to_sph_env(x, y, z):
    r = expr.sqrt(x * x + y * y + z * z)
    theta = expr.acos(z / r)
    phi = _wrap_2pi(expr.atan2(y, x))
    return r, theta, phi


def _nu(x, y, z):
    return -x, -z, -y


def _first_excluded(x, y, z, r):
    return (x >= -CUT_EPS * r) & (np.abs(y) <= CUT_EPS * r)


def _second_excluded(x, y, z, r):
    return (x <= CUT_EPS * r) & (np.abs(z) <= CUT_EPS * r)


def sph_to_cart(p) -> np.ndarray:
    """First-chart spherical coordinates to Cartesian; total on the closed box."""
    p = np.asarray(p, dtype=float)
    r, theta, phi = p[..., 0], p[..., 1], p[..., 2]
    bad = (r <= 0) | (theta < 0) | (theta > math.pi) | (phi < 0) | (phi > TWO_PI)
    if np.any(bad):
        raise DomainError("sph_to_cart", tuple(np.atleast_2d(p)[np.atleast_1d(bad)][0].tolist()))
    return np.stack(_sph_to_cart_env(r, theta, phi), axis=-1)


def sph_to_cart_second(p) -> np.ndarray:
    """Second-chart coordinates to Cartesian (the first-chart formula followed by ``nu``)."""
    c = sph_to_cart(p)
    return np.stack(_nu(c[..., 0], c[..., 1], c[..., 2]), axis=-1)


def cart_to_sph(p, chart: Chart = FIRST) -> np.ndarray:
    """Inverse of :func:`sph_to_cart` (first chart) or of :func:`sph_to_cart_second`."""
    p = np.asarray(p, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    r = np.sqrt(x * x + y * y + z * z)
    second = chart.id.startswith("second")
    cut = _second_excluded(x, y, z, r) if second else _first_excluded(x, y, z, r)
    bad = cut | (r == 0)
    if np.any(bad):
        raise DomainError(f"cart_to_sph[{chart.id}]", tuple(np.atleast_2d(p)[np.atleast_1d(bad)][0].tolist()))
    if second:
        x, y, z = _nu(x, y, z)
    return np.stack(_cart_to_sph_env(x, y, z), axis=-1)


def transition_first_to_second(p) -> np.ndarray:
    """First-chart coordinates of an overlap point to second-chart coordinates.

    Computed by composing the chart maps and cross-checked against the closed
    form ``cos(theta2) = -sin(theta) sin(phi)``,
    ``sin(phi2) = -cos(theta) / sqrt(1 - sin(theta)^2 sin(phi)^2)``.
    """
    p = np.asarray(p, dtype=float)
    out = cart_to_sph(sph_to_cart(p), SECOND)
    theta2 = out[..., 1]
    if np.any(np.sin(theta2) <= CUT_EPS):
        raise DomainError("transition", float(np.min(theta2)))
    out[..., 0] = p[..., 0]
    theta, phi = p[..., 1], p[..., 2]
    st, sp = np.sin(theta), np.sin(phi)
    err = max(
        float(np.max(np.abs(np.cos(theta2) + st * sp))),
        float(np.max(np.abs(np.sin(out[..., 2]) + np.cos(theta) / np.sqrt(1.0 - st * st * sp * sp)))),
    )
    if err > 1e-12:
        raise ArithmeticError(f"transition map disagrees with the closed form by {err:.3e}")
    return out


def _map_fields(n: int, offset: int, fn, passthrough: Sequence[int] = ()) -> tuple[ScalarField, ...]:
    """Component fields of a map acting on the three spherical slots."""

    def component(k):
        return FunctionField(lambda env: fn(*env[offset:offset + 3])[k], n, f"map[{k}]")

    fields: list[ScalarField] = []
    for i in range(n):
        if i < offset:
            fields.append(FunctionField(lambda env, i=i: env[i], n, f"id[{i}]"))
        else:
            fields.append(component(i - offset))
    return tuple(fields)


def _to_second_env(r, theta, phi):
    x, y, z = _nu(*_sph_to_cart_env(r, theta, phi))
    _, theta2, phi2 = _cart_to_sph_env(x, y, z)
    return r, theta2, phi2


def transition_diffeo(dim: int = 3) -> Diffeo:
    """The chart transition first -> second as a :class:`Diffeo` (jets included)."""
    src = FIRST if dim == 3 else FIRST_4D
    dst = SECOND if dim == 3 else SECOND_4D
    off = dim - 3
    # nu is an involution, so the inverse has the same coordinate expression
    fwd = _map_fields(dim, off, _to_second_env)
    inv = _map_fields(dim, off, _to_second_env)
    return Diffeo(src, dst, fwd, inv)


def spherical_diffeo() -> Diffeo:
    """First spherical chart -> Cartesian coordinates, with inverse."""
    fwd = _map_fields(3, 0, _sph_to_cart_env)
    inv = _map_fields(3, 0, _cart_to_sph_env)
    return Diffeo(FIRST, CARTESIAN, fwd, inv)


def rotation_matrix(axis: Sequence[float], angle: float) -> np.ndarray:
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)


def _linear_fields(m: np.ndarray) -> tuple[ScalarField, ...]:
    m = np.asarray(m, dtype=float)
    return tuple(
        FunctionField(lambda env, row=row: row[0] * env[0] + row[1] * env[1] + row[2] * env[2], 3, "linear")
        for row in m
    )


def cartesian_rotation(m: np.ndarray) -> Diffeo:
    """A rotation of R^3 as a diffeomorphism of the Cartesian chart."""
    return Diffeo(CARTESIAN, CARTESIAN, _linear_fields(m), _linear_fields(np.asarray(m).T))


def spherical_rotation(m: np.ndarray) -> Diffeo:
    """A rotation of R^3 written in first spherical coordinates (near points whose
    image stays off the cut half-plane)."""
    m = np.asarray(m, dtype=float)

    def rotated(mat):
        def fn(r, theta, phi):
            x, y, z = _sph_to_cart_env(r, theta, phi)
            xs = [mat[i, 0] * x + mat[i, 1] * y + mat[i, 2] * z for i in range(3)]
            return _cart_to_sph_env(*xs)

        return fn

    return Diffeo(FIRST, FIRST, _map_fields(3, 0, rotated(m)), _map_fields(3, 0, rotated(m.T)))


# --------------------------------------------------------------------------
# Generators
# --------------------------------------------------------------------------

def _coord(i: int, n: int) -> ScalarField:
    return FunctionField(lambda env: env[i], n, f"x{i}")


def generators(chart: Chart) -> tuple[VectorFieldDef, VectorFieldDef, VectorFieldDef]:
    """The rotation generators ``(xi, zeta, lam)`` about the z, x and y axes."""
    n = chart.dim
    zero = ConstantField(0.0, n)
    if chart.id == CARTESIAN.id:
        x, y, z = (_coord(i, 3) for i in range(3))
        return (
            VectorFieldDef(chart, [-y, x, zero], "xi"),
            VectorFieldDef(chart, [zero, -z, y], "zeta"),
            VectorFieldDef(chart, [z, zero, -x], "lam"),
        )
    if not chart.id.startswith("first-spherical"):
        raise ValueError(f"generators are provided for the Cartesian and first spherical charts, not {chart.id}")
    t, p = angular_offset(chart), angular_offset(chart) + 1
    one = ConstantField(1.0, n)
    cos_phi = FunctionField(lambda env: expr.cos(env[p]), n, "cos(phi)")
    cot_cos = FunctionField(lambda env: -expr.cot(env[t]) * expr.cos(env[p]), n, "-cot(theta)cos(phi)")
    cot_sin = FunctionField(lambda env: -expr.cot(env[t]) * expr.sin(env[p]), n, "-cot(theta)sin(phi)")
    neg_sin_phi = FunctionField(lambda env: -expr.sin(env[p]), n, "-sin(phi)")

    def vec(entries: Mapping[int, ScalarField], name):
        comps = [entries.get(i, zero) for i in range(n)]
        return VectorFieldDef(chart, comps, name)

    return (
        vec({p: one}, "xi"),
        vec({t: neg_sin_phi, p: cot_cos}, "zeta"),
        vec({t: cos_phi, p: cot_sin}, "lam"),
    )


# --------------------------------------------------------------------------
# Invariant families
# --------------------------------------------------------------------------

def _times(profile: ScalarField, factor) -> ScalarField:
    """``profile * factor(theta)`` with zero short-circuit."""
    if profile.is_zero:
        return profile
    n = profile.n
    return FunctionField(lambda env: profile._eval(env) * factor(env), n, "times")


def _check_nonzero(values: np.ndarray, what: str, points: np.ndarray) -> None:
    bad = np.abs(values) <= NONZERO_EPS
    if np.any(bad):
        where = tuple(float(v) for v in points[np.argmax(bad)])
        raise DegenerateProfile(f"{what} vanishes at {where}")


def _sample_points(chart: Chart, grid: GridSpec | None) -> np.ndarray:
    grid = grid or default_grid(chart)
    return grid.points()


def make_invariant_metric_3d(P, Q, chart: Chart = FIRST, grid: GridSpec | None = None) -> MetricField:
    """``P dr^2 + Q (dtheta^2 + sin^2(theta) dphi^2)``; P and Q must not vanish on the grid."""
    P, Q = as_field(P, 3), as_field(Q, 3)
    pts = _sample_points(chart, grid)
    _check_nonzero(P.value(pts), "P", pts)
    _check_nonzero(Q.value(pts), "Q", pts)
    zero = ConstantField(0.0, 3)
    q_sin2 = _times(Q, lambda env: expr.sin(env[1]) ** 2)
    return MetricField(chart, [[P, zero, zero], [zero, Q, zero], [zero, zero, q_sin2]])


def sphere_metric_part(Q, chart: Chart = FIRST) -> MetricField:
    """The angular block ``Q (dtheta^2 + sin^2 dphi^2)`` alone (degenerate by design)."""
    n = chart.dim
    Q = as_field(Q, n)
    t = angular_offset(chart)
    zero = ConstantField(0.0, n)
    comps = [[zero] * n for _ in range(n)]
    comps[t][t] = Q
    comps[t + 1][t + 1] = _times(Q, lambda env: expr.sin(env[t]) ** 2)
    return MetricField(chart, comps)


def make_invariant_metric_4d(gtt, gtr, grr, Q, chart: Chart = FIRST_4D, grid: GridSpec | None = None) -> MetricField:
    """Block metric: a (t, r) block plus ``Q`` times the round sphere metric."""
    gtt, gtr, grr, Q = (as_field(f, 4) for f in (gtt, gtr, grr, Q))
    pts = _sample_points(chart, grid)
    a, b, c = gtt.value(pts), gtr.value(pts), grr.value(pts)
    _check_nonzero(np.broadcast_to(a * c - b * b, pts.shape[:1]), "gtt*grr - gtr^2", pts)
    _check_nonzero(np.broadcast_to(Q.value(pts), pts.shape[:1]), "Q", pts)
    zero = ConstantField(0.0, 4)
    q_sin2 = _times(Q, lambda env: expr.sin(env[2]) ** 2)
    return MetricField(
        chart,
        [
            [gtt, gtr, zero, zero],
            [gtr, grr, zero, zero],
            [zero, zero, Q, zero],
            [zero, zero, zero, q_sin2],
        ],
    )


def _sin2(t):
    return lambda env: expr.sin(env[t]) ** 2


def _sin(t):
    return lambda env: expr.sin(env[t])


def _neg_csc(t):
    return lambda env: -1.0 / expr.sin(env[t])


def _sphere_entries(chart: Chart) -> dict:
    n, t = chart.dim, angular_offset(chart)
    p = t + 1
    return {
        (t, p, p): FunctionField(lambda env: -expr.sin(env[t]) * expr.cos(env[t]), n, "-sin*cos"),
        (p, t, p): FunctionField(lambda env: expr.cot(env[t]), n, "cot"),
    }


def make_invariant_connection_3d(A111, A122, A212, A, chart: Chart = FIRST) -> ConnectionField:
    """The general SO(3)-invariant symmetric connection on the first spherical chart.

    Profiles are functions of ``r``; component indices are 0-based
    ``(r, theta, phi)``.
    """
    A111, A122, A212, A = (as_field(f, 3) for f in (A111, A122, A212, A))
    entries = {
        (0, 0, 0): A111,
        (0, 1, 1): A122,
        (0, 2, 2): _times(A122, _sin2(1)),
        (1, 0, 1): A212,
        (1, 0, 2): _times(A, _sin(1)),
        (2, 0, 1): _times(A, _neg_csc(1)),
        (2, 0, 2): A212,
    }
    entries.update(_sphere_entries(chart))
    return ConnectionField.from_entries(chart, entries)


PROFILE_4D_NAMES = (
    "B000", "B010", "B110", "B220",
    "B001", "B011", "B111", "B221",
    "B022", "B032", "B122", "B132",
)


def make_invariant_connection_4d(profiles: Mapping[str, object], chart: Chart = FIRST_4D) -> ConnectionField:
    """The general SO(3)-invariant symmetric connection on ``R x (R^3 minus 0)``.

    ``profiles`` maps ``B{j}{k}{i}`` (lower indices, then upper index) to fields
    of ``(t, r)``; missing names are zero.  Indices are ``(t, r, theta, phi)``.
    """
    unknown = set(profiles) - set(PROFILE_4D_NAMES)
    if unknown:
        raise KeyError(f"unknown profile names: {sorted(unknown)}")
    b = {name: as_field(profiles.get(name, 0.0), 4) for name in PROFILE_4D_NAMES}
    entries = {
        (0, 0, 0): b["B000"],
        (0, 0, 1): b["B010"],
        (0, 1, 1): b["B110"],
        (0, 2, 2): b["B220"],
        (0, 3, 3): _times(b["B220"], _sin2(2)),
        (1, 0, 0): b["B001"],
        (1, 0, 1): b["B011"],
        (1, 1, 1): b["B111"],
        (1, 2, 2): b["B221"],
        (1, 3, 3): _times(b["B221"], _sin2(2)),
        (2, 0, 2): b["B022"],
        (2, 0, 3): _times(b["B032"], _sin(2)),
        (2, 1, 2): b["B122"],
        (2, 1, 3): _times(b["B132"], _sin(2)),
        (3, 0, 2): _times(b["B032"], _neg_csc(2)),
        (3, 0, 3): b["B022"],
        (3, 1, 2): _times(b["B132"], _neg_csc(2)),
        (3, 1, 3): b["B122"],
    }
    entries.update(_sphere_entries(chart))
    return ConnectionField.from_entries(chart, entries)


def chart_consistency_check(g_first: MetricField, g_second: MetricField, points) -> float:
    """Max-abs difference between ``g_first`` and the pullback of ``g_second``
    through the chart transition, over overlap ``points`` (first-chart coordinates)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    off = g_first.n - 3
    transition_first_to_second(pts[:, off:off + 3])
    trans = transition_diffeo(g_first.n)
    y, jac, _ = trans.map_jets(pts)
    pulled = np.einsum("...ai,...ab,...bj->...ij", jac, g_second.values(y), jac)
    return float(np.max(np.abs(pulled - g_first.values(pts))))


def overlap_points(count: int, seed: int = 0, r_range=(0.5, 3.0)) -> np.ndarray:
    """Random first-chart points whose images lie well inside the second chart."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p = np.array([rng.uniform(*r_range), rng.uniform(0.2, math.pi - 0.2), rng.uniform(0.1, TWO_PI - 0.1)])
        c = sph_to_cart(p)
        if abs(c[2]) > 0.05 * p[0] or c[0] > 0.05 * p[0]:
            q = cart_to_sph(c, SECOND)
            if 0.05 < q[1] < math.pi - 0.05 and 0.05 < q[2] < TWO_PI - 0.05:
                out.append(p)
    return np.array(out)


__all__ = [
    "CARTESIAN",
    "FIRST",
    "SECOND",
    "FIRST_4D",
    "SECOND_4D",
    "PROFILE_4D_NAMES",
    "cart_to_sph",
    "cartesian_rotation",
    "chart_consistency_check",
    "default_grid",
    "generators",
    "make_invariant_connection_3d",
    "make_invariant_connection_4d",
    "make_invariant_metric_3d",
    "make_invariant_metric_4d",
    "overlap_points",
    "rotation_matrix",
    "sph_to_cart",
    "sph_to_cart_second",
    "spherical_chart_3d",
    "spherical_chart_4d",
    "spherical_diffeo",
    "spherical_rotation",
    "sphere_metric_part",
    "transition_diffeo",
    "transition_first_to_second",
]
