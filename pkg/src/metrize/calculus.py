"""Chart-based tensor calculus on component arrays of scalar fields.

Every operation takes either one point (shape ``(n,)``) or a batch of points
(shape ``(N, n)``) and returns arrays with the matching leading batch shape.
Index conventions: metric derivatives ``dg[..., a, b, c] = d g_ab / d x^c``;
connection components ``C[..., i, j, k]`` is the coefficient with upper index
``i`` and lower indices ``j, k``; vector field Jacobians
``J[..., i, k] = d xi^i / d x^k``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import expr
from .errors import DomainError, NoConvergence, NonInvertible, SingularMetric
from .expr import ExprAst, Jet2

DET_EPS = 1e-12


# --------------------------------------------------------------------------
# Charts and grids
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Chart:
    """A coordinate chart: ordered coordinate names plus an open box domain.

    ``excluded`` optionally flags points of the box that still lie outside the
    chart (a boolean mask function over a batch of points).
    """

    id: str
    coord_names: tuple[str, ...]
    bounds: tuple[tuple[float, float], ...]
    excluded: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    @property
    def dim(self) -> int:
        return len(self.coord_names)

    def contains(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        ok = np.ones(points.shape[0], dtype=bool)
        for i, (lo, hi) in enumerate(self.bounds):
            ok &= (points[:, i] > lo) & (points[:, i] < hi)
        if self.excluded is not None:
            ok &= ~self.excluded(points)
        return ok

    def require(self, points) -> None:
        ok = self.contains(points)
        if not np.all(ok):
            bad = np.atleast_2d(np.asarray(points, dtype=float))[~ok][0]
            raise DomainError(f"chart {self.id}", tuple(float(v) for v in bad))


@dataclass(frozen=True)
class Tolerances:
    residual: float = 1e-8
    ratio: float = 1e-7
    quadrature: float = 1e-11


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor-product grid: one ``(min, max, count)`` per coordinate."""

    axes: tuple[tuple[float, float, int], ...]
    tolerances: Tolerances = Tolerances()

    def __post_init__(self):
        for lo, hi, count in self.axes:
            if int(count) < 2:
                raise ValueError(f"grid axis count must be >= 2, got {count}")
            if not lo <= hi:
                raise ValueError(f"grid axis bounds reversed: {lo} > {hi}")

    @property
    def dim(self) -> int:
        return len(self.axes)

    def axis(self, i: int) -> np.ndarray:
        lo, hi, count = self.axes[i]
        return np.linspace(lo, hi, int(count))

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*[self.axis(i) for i in range(self.dim)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def chunks(self, size: int = 4096):
        pts = self.points()
        for start in range(0, len(pts), size):
            yield pts[start:start + size]

    def replace_axis(self, i: int, lo: float, hi: float, count: int) -> "GridSpec":
        axes = list(self.axes)
        axes[i] = (float(lo), float(hi), int(count))
        return GridSpec(tuple(axes), self.tolerances)


# --------------------------------------------------------------------------
# Scalar fields
# --------------------------------------------------------------------------

def const_like(c: float, like):
    """A constant with the same kind (float / ndarray / Jet2) as ``like``."""
    if isinstance(like, Jet2):
        return Jet2.constant(c, like.value.shape, like.n)
    if isinstance(like, np.ndarray):
        return np.full(like.shape, float(c))
    return float(c)


def _as_points(points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 0:
        raise ValueError("a point needs at least one coordinate")
    return points


def _env_values(points: np.ndarray) -> list:
    if points.ndim == 1:
        return [float(v) for v in points]
    return [points[..., i] for i in range(points.shape[-1])]


class ScalarField:
    """A real function of the ``n`` chart coordinates.

    Subclasses implement :meth:`_eval`, which receives one entry per coordinate
    (floats, ndarrays or :class:`Jet2` seeds) and must be generic over those
    kinds.  That makes composition with maps plain substitution.
    """

    n: int
    is_zero = False

    def _eval(self, env: Sequence):
        raise NotImplementedError

    def evaluate_env(self, env: Sequence):
        out = self._eval(env)
        if isinstance(env[0], Jet2) and not isinstance(out, Jet2):
            return const_like(out, env[0])
        return out

    def jet(self, points) -> Jet2:
        points = _as_points(points)
        out = self._eval(Jet2.seeds(points))
        if not isinstance(out, Jet2):
            return Jet2.constant(out, points.shape[:-1], points.shape[-1])
        return out

    def value(self, points):
        points = _as_points(points)
        out = self._eval(_env_values(points))
        if points.ndim == 1:
            return float(out)
        return np.broadcast_to(np.asarray(out, dtype=float), points.shape[:-1]).copy()

    def __call__(self, *coords) -> float:
        return self.value(np.array(coords, dtype=float))

    # arithmetic ------------------------------------------------------------
    def _combine(self, other, op, name):
        if not isinstance(other, ScalarField):
            other = ConstantField(float(other), self.n)
        if other.n != self.n:
            raise ValueError("cannot combine fields of different dimension")
        a, b = self, other
        return FunctionField(lambda env: op(a._eval(env), b._eval(env)), self.n, name)

    def __add__(self, other):
        return self._combine(other, lambda x, y: x + y, "add")

    def __radd__(self, other):
        return ConstantField(float(other), self.n) + self

    def __sub__(self, other):
        return self._combine(other, lambda x, y: x - y, "sub")

    def __rsub__(self, other):
        return ConstantField(float(other), self.n) - self

    def __mul__(self, other):
        return self._combine(other, lambda x, y: x * y, "mul")

    def __rmul__(self, other):
        return ConstantField(float(other), self.n) * self

    def __truediv__(self, other):
        return self._combine(other, lambda x, y: expr._binary("div", x, y), "div")

    def __neg__(self):
        a = self
        return FunctionField(lambda env: -a._eval(env), self.n, "neg")


class ConstantField(ScalarField):
    def __init__(self, c: float, n: int):
        self.c = float(c)
        self.n = n
        self.is_zero = self.c == 0.0

    def _eval(self, env):
        return self.c

    def __repr__(self):
        return f"ConstantField({self.c!r}, n={self.n})"


class ExprField(ScalarField):
    """A field backed by a parsed expression over the chart coordinates."""

    def __init__(self, ast: ExprAst):
        self.ast = ast
        self.n = len(ast.variables)
        c = expr._constant_value(ast.root)
        self.is_zero = c is not None and c == 0.0

    @classmethod
    def parse(cls, src: str, coord_names: Sequence[str]) -> "ExprField":
        return cls(expr.parse(src, coord_names))

    def _eval(self, env):
        return expr.evaluate(self.ast, env)

    def __repr__(self):
        return f"ExprField({expr.to_text(self.ast)!r})"


class FunctionField(ScalarField):
    """A field backed by a Python callable ``fn(env)``."""

    def __init__(self, fn: Callable[[Sequence], object], n: int, name: str = "fn"):
        self.fn = fn
        self.n = n
        self.name = name

    def _eval(self, env):
        return self.fn(env)

    def __repr__(self):
        return f"FunctionField({self.name}, n={self.n})"


class SliceField(ScalarField):
    """``source`` with some coordinates pinned: ``fixed`` maps index -> value."""

    def __init__(self, source: ScalarField, fixed: dict[int, float]):
        self.source = source
        self.fixed = dict(fixed)
        self.n = source.n

    def _eval(self, env):
        env = list(env)
        for i, v in self.fixed.items():
            env[i] = const_like(v, env[i])
        return self.source._eval(env)


def compose(field_: ScalarField, maps: Sequence[ScalarField]) -> ScalarField:
    """``field_`` evaluated at the image of the coordinate map ``maps``."""
    maps = tuple(maps)
    if len(maps) != field_.n:
        raise ValueError("map arity does not match field dimension")
    n = maps[0].n
    return FunctionField(lambda env: field_._eval([m.evaluate_env(env) for m in maps]), n, "compose")


ZERO3 = ConstantField(0.0, 3)


def as_field(obj, n: int) -> ScalarField:
    if isinstance(obj, ScalarField):
        return obj
    return ConstantField(float(obj), n)


def _stack_jets(fields: np.ndarray, points: np.ndarray, n: int, order: int = 2):
    """Evaluate an object array of fields; returns value/grad/hess stacks."""
    batch = points.shape[:-1]
    shape = fields.shape
    values = np.zeros(batch + shape)
    grads = np.zeros(batch + shape + (n,)) if order >= 1 else None
    hess = np.zeros(batch + shape + (n, n)) if order >= 2 else None
    seeds = Jet2.seeds(points) if order >= 1 else None
    env_vals = None
    cache: dict[int, object] = {}
    lead = (slice(None),) * len(batch)
    for idx in itertools.product(*[range(s) for s in shape]):
        f = fields[idx]
        at = lead + idx
        if f.is_zero:
            continue
        if isinstance(f, ConstantField):
            values[at] = f.c
            continue
        key = id(f)
        if key not in cache:
            if order >= 1:
                out = f._eval(seeds)
                if not isinstance(out, Jet2):
                    out = Jet2.constant(out, batch, n)
            else:
                if env_vals is None:
                    env_vals = _env_values(points)
                out = f._eval(env_vals)
            cache[key] = out
        out = cache[key]
        if order >= 1:
            values[at] = out.value
            grads[at] = out.grad
            if order >= 2:
                hess[at] = out.hess
        else:
            values[at] = out
    return values, grads, hess


# --------------------------------------------------------------------------
# Tensor-valued fields
# --------------------------------------------------------------------------

class MetricField:
    """Symmetric (0,2) field; ``components[i][j] is components[j][i]``."""

    def __init__(self, chart: Chart, components):
        n = chart.dim
        arr = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                arr[i, j] = as_field(components[i][j], n)
        for i in range(n):
            for j in range(i + 1, n):
                if arr[i, j] is not arr[j, i]:
                    a, b = arr[i, j], arr[j, i]
                    if not (isinstance(a, ConstantField) and isinstance(b, ConstantField) and a.c == b.c):
                        raise ValueError(f"metric component ({i},{j}) and ({j},{i}) must be the same field")
                    arr[j, i] = a
        self.chart = chart
        self.components = arr

    @property
    def n(self) -> int:
        return self.chart.dim

    def evaluate(self, points):
        """Metric values ``(..., n, n)`` and first derivatives ``(..., n, n, n)``."""
        points = _as_points(points)
        g, dg, _ = _stack_jets(self.components, points, self.n, order=1)
        return g, dg

    def second_derivatives(self, points) -> np.ndarray:
        points = _as_points(points)
        return _stack_jets(self.components, points, self.n, order=2)[2]

    def values(self, points) -> np.ndarray:
        return _stack_jets(self.components, _as_points(points), self.n, order=0)[0]


class ConnectionField:
    """Symmetric connection coefficients ``C[i, j, k]`` (upper i; lower j, k)."""

    def __init__(self, chart: Chart, components):
        n = chart.dim
        arr = np.empty((n, n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    arr[i, j, k] = as_field(components[i][j][k], n)
        for i in range(n):
            for j in range(n):
                for k in range(j + 1, n):
                    a, b = arr[i, j, k], arr[i, k, j]
                    if a is b:
                        continue
                    if isinstance(a, ConstantField) and isinstance(b, ConstantField) and a.c == b.c:
                        arr[i, k, j] = a
                        continue
                    raise ValueError(f"connection component ({i},{j},{k}) is not symmetric in its lower indices")
        self.chart = chart
        self.components = arr

    @classmethod
    def from_entries(cls, chart: Chart, entries: dict[tuple[int, int, int], object]) -> "ConnectionField":
        """Build from a sparse map; each ``(i, j, k)`` entry also fills ``(i, k, j)``."""
        n = chart.dim
        zero = ConstantField(0.0, n)
        comps = [[[zero for _ in range(n)] for _ in range(n)] for _ in range(n)]
        for (i, j, k), f in entries.items():
            f = as_field(f, n)
            comps[i][j][k] = f
            comps[i][k][j] = f
        return cls(chart, comps)

    @property
    def n(self) -> int:
        return self.chart.dim

    def values(self, points) -> np.ndarray:
        return _stack_jets(self.components, _as_points(points), self.n, order=0)[0]

    def jets(self, points):
        """Component values and their first derivatives ``(..., n, n, n, n)``."""
        c, dc, _ = _stack_jets(self.components, _as_points(points), self.n, order=1)
        return c, dc


class LeviCivitaField(ConnectionField):
    """The Christoffel symbols of a metric, viewed as a connection field."""

    def __init__(self, metric: MetricField):
        self.chart = metric.chart
        self.metric = metric

    def values(self, points) -> np.ndarray:
        return christoffel(self.metric, points)

    def jets(self, points):
        points = _as_points(points)
        g, dg = self.metric.evaluate(points)
        d2g = self.metric.second_derivatives(points)
        ginv = _inverse_metric(g, points)
        b = _christoffel_bracket(dg)
        gamma = _symmetrize(0.5 * np.einsum("...is,...sjk->...ijk", ginv, b))
        dginv = -np.einsum("...ia,...abq,...bs->...isq", ginv, dg, ginv)
        # db[s, j, k, q] = d_q (d_j g_sk + d_k g_sj - d_s g_jk)
        db = np.einsum("...skjq->...sjkq", d2g) + d2g - np.einsum("...jksq->...sjkq", d2g)
        dgamma = 0.5 * (np.einsum("...isq,...sjk->...ijkq", dginv, b) + np.einsum("...is,...sjkq->...ijkq", ginv, db))
        return gamma, dgamma


class VectorFieldDef:
    def __init__(self, chart: Chart, components, name: str = ""):
        n = chart.dim
        self.chart = chart
        self.components = np.empty(n, dtype=object)
        for i in range(n):
            self.components[i] = as_field(components[i], n)
        self.name = name

    @property
    def n(self) -> int:
        return self.chart.dim

    def jets(self, points, order: int = 2):
        """Values ``(..., n)``, Jacobian ``(..., n, n)`` and Hessians ``(..., n, n, n)``."""
        return _stack_jets(self.components, _as_points(points), self.n, order=order)

    def values(self, points) -> np.ndarray:
        return _stack_jets(self.components, _as_points(points), self.n, order=0)[0]

    def __repr__(self):
        return f"VectorFieldDef({self.name or '?'}, chart={self.chart.id})"


@dataclass
class Diffeo:
    """A diffeomorphism ``alpha`` from ``source`` chart coordinates ``y`` to
    ``target`` chart coordinates ``x``; ``inverse`` maps ``x`` back to ``y``."""

    source: Chart
    target: Chart
    forward: tuple[ScalarField, ...]
    inverse: tuple[ScalarField, ...]

    def map_jets(self, points):
        pts = _as_points(points)
        return _stack_jets(np.array(self.forward, dtype=object), pts, self.source.dim, order=2)

    def inverse_jets(self, points, order: int = 2):
        pts = _as_points(points)
        return _stack_jets(np.array(self.inverse, dtype=object), pts, self.target.dim, order=order)

    def __call__(self, points) -> np.ndarray:
        pts = _as_points(points)
        return _stack_jets(np.array(self.forward, dtype=object), pts, self.source.dim, order=0)[0]

    def inverted(self) -> "Diffeo":
        return Diffeo(self.target, self.source, self.inverse, self.forward)

    def roundtrip_error(self, points) -> float:
        pts = np.atleast_2d(_as_points(points))
        back = _stack_jets(np.array(self.inverse, dtype=object), self(pts), self.target.dim, order=0)[0]
        return float(np.max(np.abs(back - pts)))


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------

def _inverse_metric(g: np.ndarray, points) -> np.ndarray:
    det = np.linalg.det(g)
    bad = np.abs(det) <= DET_EPS
    if np.any(bad):
        where = np.atleast_2d(np.asarray(points))[np.atleast_1d(bad)][0]
        raise SingularMetric(f"|det g| <= {DET_EPS} at {tuple(float(v) for v in np.ravel(where))}")
    return np.linalg.inv(g)


def _christoffel_bracket(dg: np.ndarray) -> np.ndarray:
    # b[s, j, k] = d_j g_sk + d_k g_sj - d_s g_jk
    return np.swapaxes(dg, -1, -2) + dg - np.moveaxis(dg, -1, -3)


def _symmetrize(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + np.swapaxes(c, -1, -2))


def christoffel(metric: MetricField, point) -> np.ndarray:
    """Christoffel symbols ``Gamma[..., i, j, k]`` of ``metric`` at ``point``.

    Uses the inverse-metric formula; raises :class:`SingularMetric` when
    ``|det g| <= 1e-12``.
    """
    g, dg = metric.evaluate(point)
    ginv = _inverse_metric(g, point)
    return _symmetrize(0.5 * np.einsum("...is,...sjk->...ijk", ginv, _christoffel_bracket(dg)))


def christoffel_decomposition_residual(metric: MetricField, point) -> float:
    """Max-abs of ``d_k g_ij - g_is G^s_jk - g_js G^s_ik``."""
    g, dg = metric.evaluate(point)
    gamma = christoffel(metric, point)
    lowered = np.einsum("...is,...sjk->...ijk", g, gamma)
    res = dg - lowered - np.swapaxes(lowered, -3, -2)
    return float(np.max(np.abs(res)))


def lie_derivative_metric(g: MetricField, xi: VectorFieldDef, point) -> np.ndarray:
    """Components ``(d_p g_kl) xi^p + g_il d_k xi^i + g_kj d_l xi^j``."""
    gv, dg = g.evaluate(point)
    x, jac, _ = xi.jets(point, order=1)
    return (
        np.einsum("...klp,...p->...kl", dg, x)
        + np.einsum("...il,...ik->...kl", gv, jac)
        + np.einsum("...kj,...jl->...kl", gv, jac)
    )


def lie_derivative_connection(conn: ConnectionField, lam: VectorFieldDef, point) -> np.ndarray:
    """The (1,2) coefficient array of the Lie derivative of ``conn`` along ``lam``."""
    c, dc = conn.jets(point)
    v, jac, hess = lam.jets(point, order=2)
    return (
        -np.einsum("...is,...sjk->...ijk", jac, c)
        + np.einsum("...sj,...isk->...ijk", jac, c)
        + np.einsum("...mk,...ijm->...ijk", jac, c)
        + np.einsum("...ijkq,...q->...ijk", dc, v)
        + hess
    )


def covariant_derivative(conn: ConnectionField, xi: VectorFieldDef, zeta: VectorFieldDef, point) -> np.ndarray:
    """``(nabla_xi zeta)^i = xi^k (d_k zeta^i + C^i_kl zeta^l)``."""
    return covariant_derivative_jet(conn, xi, zeta, point)[0]


def lie_bracket(xi: VectorFieldDef, zeta: VectorFieldDef, point) -> np.ndarray:
    return lie_bracket_jet(xi, zeta, point)[0]


def covariant_derivative_jet(conn, xi, zeta, point):
    """Value and Jacobian of ``nabla_xi zeta`` (the Jacobian needs second
    derivatives of ``zeta`` and first derivatives of the connection)."""
    c, dc = conn.jets(point)
    x, jx, _ = xi.jets(point, order=1)
    z, jz, hz = zeta.jets(point, order=2)
    inner = jz + np.einsum("...ikl,...l->...ik", c, z)
    value = np.einsum("...k,...ik->...i", x, inner)
    d_inner = (
        np.einsum("...ikm->...ikm", hz)
        + np.einsum("...iklm,...l->...ikm", dc, z)
        + np.einsum("...ikl,...lm->...ikm", c, jz)
    )
    jac = np.einsum("...km,...ik->...im", jx, inner) + np.einsum("...k,...ikm->...im", x, d_inner)
    return value, jac


def lie_bracket_jet(xi: VectorFieldDef, zeta: VectorFieldDef, point):
    """Value and Jacobian of ``[xi, zeta]``."""
    x, jx, hx = xi.jets(point, order=2)
    z, jz, hz = zeta.jets(point, order=2)
    value = np.einsum("...k,...ik->...i", x, jz) - np.einsum("...k,...ik->...i", z, jx)
    jac = (
        np.einsum("...km,...ik->...im", jx, jz)
        + np.einsum("...k,...ikm->...im", x, hz)
        - np.einsum("...km,...ik->...im", jz, jx)
        - np.einsum("...k,...ikm->...im", z, hx)
    )
    return value, jac


def _check_jacobian(jac: np.ndarray, points) -> None:
    det = np.linalg.det(jac)
    bad = np.abs(det) <= DET_EPS
    if np.any(bad):
        raise NonInvertible(f"|det D alpha| <= {DET_EPS}")


def transform_connection(conn: ConnectionField, alpha: Diffeo, point) -> np.ndarray:
    """Components of the connection associated with ``conn`` by ``alpha``.

    ``conn`` lives on ``alpha.target``; the result is expressed in the
    ``alpha.source`` coordinates at ``point``:
    ``(dy^k/dx^s) (dx^a/dy^i dx^b/dy^j C^s_ab(alpha(y)) + d^2 x^s / dy^i dy^j)``.
    """
    x, jac, hess = alpha.map_jets(point)
    _check_jacobian(jac, point)
    _, jinv, _ = alpha.inverse_jets(x, order=1)
    c = conn.values(x)
    inner = np.einsum("...ai,...bj,...sab->...sij", jac, jac, c) + hess
    return np.einsum("...ks,...sij->...kij", jinv, inner)


def pullback_metric(g: MetricField, alpha: Diffeo, point) -> np.ndarray:
    """``(D alpha)^T g(alpha(y)) (D alpha)`` at ``point``."""
    x, jac, _ = alpha.map_jets(point)
    gx = g.values(x)
    return np.einsum("...ai,...ab,...bj->...ij", jac, gx, jac)


class PullbackMetric(MetricField):
    """``alpha* g`` as a metric field on ``alpha.source``.

    Values and first derivatives are exact; second derivatives would need third
    derivatives of ``alpha`` and are not provided.
    """

    def __init__(self, g: MetricField, alpha: Diffeo):
        self.chart = alpha.source
        self.g = g
        self.alpha = alpha

    def evaluate(self, points):
        x, jac, hess = self.alpha.map_jets(points)
        gx, dgx = self.g.evaluate(x)
        value = np.einsum("...ai,...ab,...bj->...ij", jac, gx, jac)
        dg_y = np.einsum("...abc,...cq->...abq", dgx, jac)
        deriv = (
            np.einsum("...aiq,...ab,...bj->...ijq", hess, gx, jac)
            + np.einsum("...ai,...abq,...bj->...ijq", jac, dg_y, jac)
            + np.einsum("...ai,...ab,...bjq->...ijq", jac, gx, hess)
        )
        return value, deriv

    def values(self, points):
        return self.evaluate(points)[0]

    def second_derivatives(self, points):
        raise NotImplementedError("pullback metrics carry first derivatives only")


# --------------------------------------------------------------------------
# Quadrature
# --------------------------------------------------------------------------

MAX_DEPTH = 60
MIN_DEPTH = 3
MAX_EVALS = 50_000


def quadrature(f, a: float, b: float, tol: float = 1e-11) -> float:
    """Adaptive Simpson estimate of the integral of ``f`` over ``[a, b]``.

    ``f`` is a callable of one float or a one-variable :class:`ScalarField`.
    Swapping the bounds flips the sign.  Raises :class:`NoConvergence` when an
    interval needs more than 60 bisections, when bisection runs below float
    resolution, or after ``MAX_EVALS`` integrand calls.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(f, ScalarField):
        sf = f
        f = lambda t: sf.value(np.array([t]))  # noqa: E731
    a, b = float(a), float(b)
    if a == b:
        return 0.0
    if b < a:
        return -quadrature(f, b, a, tol)
    budget = [MAX_EVALS - 3]
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson(f, a, b, fa, fm, fb, whole, tol, 0, budget)


def _simpson(f, a, b, fa, fm, fb, whole, tol, depth, budget):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    if not a < lm < m < rm < b:
        raise NoConvergence(f"interval near {m} shrank below float resolution")
    budget[0] -= 2
    if budget[0] < 0:
        raise NoConvergence(f"adaptive Simpson exceeded {MAX_EVALS} evaluations near [{a}, {b}]")
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth >= MIN_DEPTH and abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    if not math.isfinite(delta):
        raise NoConvergence(f"non-finite integrand near [{a}, {b}]")
    if depth >= MAX_DEPTH:
        raise NoConvergence(f"adaptive Simpson exceeded depth {MAX_DEPTH} near [{a}, {b}]")
    return _simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, budget) + _simpson(
        f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, budget
    )
