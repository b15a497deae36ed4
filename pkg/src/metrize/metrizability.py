"""Invariance residuals, metrizability verdicts and metric reconstruction.

The 3D checks work on profiles of ``r`` sampled on the slice
``theta = pi/2, phi = pi``; the 4D checks work on profiles of the isothermal
pair ``(u, v)`` on the same angular slice.  Integrals are based at 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .calculus import (
    Chart,
    ConnectionField,
    ConstantField,
    GridSpec,
    MetricField,
    ScalarField,
    SliceField,
    VectorFieldDef,
    as_field,
    christoffel,
    const_like,
    lie_derivative_connection,
    lie_derivative_metric,
)
from .errors import DegenerateProfile, DomainError
from .expr import Jet2
from .so3 import (
    FIRST,
    FIRST_4D,
    PROFILE_4D_NAMES,
    angular_offset,
    generators,
    make_invariant_connection_3d,
    make_invariant_connection_4d,
    make_invariant_metric_3d,
    make_invariant_metric_4d,
)

BASE = 1.0
SLICE_THETA = math.pi / 2
SLICE_PHI = math.pi


class Status(str, enum.Enum):
    METRIZABLE = "Metrizable"
    NON_METRIZABLE = "NonMetrizable"
    INCONCLUSIVE = "Inconclusive"


class Signature(str, enum.Enum):
    RIEMANN = "riemann"
    LORENTZ = "lorentz"

    @property
    def sign(self) -> float:
        """+1 for Riemann, -1 for Lorentz (the sign of the ``dv^2`` term)."""
        return 1.0 if self is Signature.RIEMANN else -1.0


@dataclass
class Residual:
    """A max-abs residual over a grid with the point where it occurred."""

    name: str
    value: float
    witness: tuple[float, ...] | None = None
    component: tuple[int, ...] | None = None
    generator: str | None = None

    def passes(self, tol: float) -> bool:
        return self.value <= tol


@dataclass
class Violation:
    condition: str
    residual: float
    witness: tuple[float, ...] | None = None


@dataclass
class Verdict:
    status: Status
    violated_conditions: list[Violation] = field(default_factory=list)
    constants: dict[str, float | None] = field(default_factory=dict)
    ratio_residual: float | None = None
    ratio_samples: list[tuple[tuple[float, ...], float]] = field(default_factory=list)
    note: str = ""

    @property
    def metrizable(self) -> bool:
        return self.status is Status.METRIZABLE


@dataclass
class NotInFamily:
    """Classification result for a connection that is not of the invariant form."""

    residual: Residual


@dataclass
class Profile3D:
    A111: ScalarField
    A122: ScalarField
    A212: ScalarField
    A: ScalarField
    chart: Chart = FIRST

    def connection(self) -> ConnectionField:
        return make_invariant_connection_3d(self.A111, self.A122, self.A212, self.A, self.chart)


@dataclass
class Profile4D:
    """General profiles ``B{j}{k}{i}`` of the invariant 4D connection."""

    B: dict[str, ScalarField]
    chart: Chart = FIRST_4D

    def __post_init__(self):
        unknown = set(self.B) - set(PROFILE_4D_NAMES)
        if unknown:
            raise KeyError(f"unknown profile names: {sorted(unknown)}")
        n = self.chart.dim
        self.B = {name: as_field(self.B.get(name, 0.0), n) for name in PROFILE_4D_NAMES}

    def connection(self) -> ConnectionField:
        return make_invariant_connection_4d(self.B, self.chart)


# --------------------------------------------------------------------------
# Grid sweeps
# --------------------------------------------------------------------------

def _pt(p) -> tuple[float, ...]:
    return tuple(float(v) for v in p)


def _witness(points: np.ndarray, arr: np.ndarray):
    """Max-abs over a batch array ``arr`` with shape ``(N, ...)``."""
    flat = np.abs(arr).reshape(arr.shape[0], -1)
    if flat.size == 0:
        return 0.0, None, None
    k = int(np.argmax(flat))
    i, j = divmod(k, flat.shape[1])
    comp = np.unravel_index(j, arr.shape[1:]) if arr.ndim > 1 else ()
    return float(flat[i, j]), tuple(float(v) for v in points[i]), tuple(int(c) for c in comp)


def _sweep(name: str, grid: GridSpec, fn, chunk: int = 4096) -> Residual:
    best = Residual(name, 0.0)
    for pts in grid.chunks(chunk):
        value, where, comp = _witness(pts, fn(pts))
        if where is not None and (best.witness is None or value > best.value):
            best = Residual(name, value, where, comp)
    return best


def check_grid(grid: GridSpec, chart: Chart) -> None:
    """Grids must stay inside the chart box (clear of r = 0 and sin(theta) = 0)."""
    if grid.dim != chart.dim:
        raise DomainError("grid dimension", float(grid.dim))
    for i, ((lo, hi, _), (blo, bhi)) in enumerate(zip(grid.axes, chart.bounds)):
        if not (lo > blo and hi < bhi):
            raise DomainError(f"grid axis {chart.coord_names[i]}", lo if lo <= blo else hi)


def invariance_residual(conn: ConnectionField, grid: GridSpec, gens: Sequence[VectorFieldDef] | None = None) -> Residual:
    """Max-abs of the Lie derivative of ``conn`` along each generator over ``grid``."""
    gens = gens if gens is not None else generators(conn.chart)
    best = Residual("invariance", 0.0)
    for gen in gens:
        res = _sweep("invariance", grid, lambda p, gen=gen: lie_derivative_connection(conn, gen, p))
        res.generator = gen.name
        if best.witness is None or res.value > best.value:
            best = res
    return best


def killing_residual(g: MetricField, grid: GridSpec, gens: Sequence[VectorFieldDef] | None = None) -> Residual:
    """Max-abs of the Lie derivative of ``g`` along each generator over ``grid``."""
    gens = gens if gens is not None else generators(g.chart)
    best = Residual("killing", 0.0)
    for gen in gens:
        res = _sweep("killing", grid, lambda p, gen=gen: lie_derivative_metric(g, gen, p))
        res.generator = gen.name
        if best.witness is None or res.value > best.value:
            best = res
    return best


def verify_levi_civita(conn: ConnectionField, g: MetricField, grid: GridSpec) -> Residual:
    """Max componentwise ``|conn - Gamma(g)|`` over ``grid``."""
    if conn.chart.id != g.chart.id or conn.n != g.n:
        raise ValueError(f"connection on {conn.chart.id} but metric on {g.chart.id}")
    return _sweep("levi-civita", grid, lambda p: conn.values(p) - christoffel(g, p))


# --------------------------------------------------------------------------
# Quadrature-backed profiles
# --------------------------------------------------------------------------

class ExpIntegralField(ScalarField):
    """``scale * exp(sign * 2 * integral_1^x profile)`` along one coordinate axis.

    The profile is read on the reference slice ``ref`` with only ``axis`` free.
    Derivatives come from the integrand itself: ``F' = 2 sign A F`` and
    ``F'' = (2 sign A' + 4 A^2) F``.  Integrals are memoised per abscissa.
    """

    def __init__(self, profile: ScalarField, axis: int, ref: Sequence[float], scale: float = 1.0,
                 sign: float = 1.0, tol: float = 1e-11):
        from .calculus import quadrature

        self.profile = profile
        self.axis = axis
        self.ref = np.asarray(ref, dtype=float)
        self.scale = float(scale)
        self.sign = float(sign)
        self.tol = tol
        self.n = profile.n
        self._quad = quadrature
        self._integrals: dict[float, float] = {}

    def _along(self, t: float) -> float:
        p = self.ref.copy()
        p[self.axis] = t
        return self.profile.value(p)

    def integral(self, x: float) -> float:
        x = float(x)
        if x not in self._integrals:
            self._integrals[x] = self._quad(self._along, BASE, x, self.tol)
        return self._integrals[x]

    def _factor(self, xs: np.ndarray) -> np.ndarray:
        flat = np.ravel(xs)
        uniq, inv = np.unique(flat, return_inverse=True)
        vals = np.array([self.integral(u) for u in uniq])
        return (self.scale * np.exp(2.0 * self.sign * vals))[inv].reshape(np.shape(xs))

    def _eval(self, env):
        x = env[self.axis]
        xv = x.value if isinstance(x, Jet2) else np.asarray(x, dtype=float)
        F = self._factor(xv)
        if not isinstance(x, Jet2):
            return float(F) if np.ndim(x) == 0 else F
        pts = np.broadcast_to(self.ref, xv.shape + self.ref.shape).copy()
        pts[..., self.axis] = xv
        a = self.profile.jet(pts)
        A, dA = a.value, a.grad[..., self.axis]
        s = self.sign
        return x._compose(F, 2.0 * s * A * F, (2.0 * s * dA + 4.0 * A * A) * F)


def _ref_3d() -> np.ndarray:
    return np.array([BASE, SLICE_THETA, SLICE_PHI])


def _ref_4d() -> np.ndarray:
    return np.array([BASE, BASE, SLICE_THETA, SLICE_PHI])


def _slice_points(axis_values: Sequence[np.ndarray], ref: np.ndarray) -> np.ndarray:
    """Tensor-product points over the leading coordinates, angles from ``ref``."""
    mesh = np.meshgrid(*axis_values, indexing="ij")
    pts = np.broadcast_to(ref, mesh[0].shape + ref.shape).copy()
    for i, m in enumerate(mesh):
        pts[..., i] = m
    return pts.reshape(-1, ref.size)


# --------------------------------------------------------------------------
# 3D
# --------------------------------------------------------------------------

def classify_connection_3d(conn: ConnectionField, grid: GridSpec) -> Profile3D | NotInFamily:
    """Read the invariant-family profiles off ``conn`` on the ``theta = pi/2`` slice
    and confirm the rebuilt template matches ``conn`` on the full grid."""
    fixed = {1: SLICE_THETA, 2: SLICE_PHI}
    c = conn.components
    profiles = Profile3D(
        A111=SliceField(c[0, 0, 0], fixed),
        A122=SliceField(c[0, 1, 1], fixed),
        A212=SliceField(c[1, 0, 1], fixed),
        A=SliceField(c[1, 0, 2], fixed),
        chart=conn.chart,
    )
    template = profiles.connection()
    res = _sweep("family-template", grid, lambda p: conn.values(p) - template.values(p))
    if res.value > grid.tolerances.residual:
        return NotInFamily(res)
    return profiles


def metrizable_connection_3d(A111, A212, ratio: float, chart: Chart = FIRST, tol: float = 1e-11) -> ConnectionField:
    """The metrizable invariant connection with ``L/K = ratio``."""
    A111, A212 = as_field(A111, 3), as_field(A212, 3)
    e = ExpIntegralField(A212 - A111, 0, _ref_3d(), tol=tol)
    A122 = (-float(ratio)) * A212 * e
    return make_invariant_connection_3d(A111, A122, A212, ConstantField(0.0, 3), chart)


def metrizability_check_3d(profiles: Profile3D, grid: GridSpec) -> Verdict:
    """Decide metrizability of the invariant connection with the given profiles.

    Order of checks: the ``A`` profile must vanish; if ``A212`` vanishes on the
    r-grid then ``A122`` must too (``L/K`` unconstrained); otherwise the ratio
    ``-A122 / (A212 exp(2 int_1^r (A212 - A111)))`` must be a nonzero constant.
    """
    tol = grid.tolerances
    rs = grid.axis(0)
    pts = _slice_points([rs], _ref_3d())
    A = np.broadcast_to(profiles.A.value(pts), rs.shape)
    A111 = np.broadcast_to(profiles.A111.value(pts), rs.shape)
    A122 = np.broadcast_to(profiles.A122.value(pts), rs.shape)
    A212 = np.broadcast_to(profiles.A212.value(pts), rs.shape)
    del A111
    violations: list[Violation] = []

    k = int(np.argmax(np.abs(A)))
    if abs(A[k]) > tol.residual:
        violations.append(Violation("∇²₁₃ = 0", float(abs(A[k])), _pt(pts[k])))

    constants: dict[str, float | None] = {}
    samples: list[tuple[tuple[float, ...], float]] = []
    ratio_residual = None
    note = ""
    small = np.abs(A212) <= tol.residual
    if np.all(small):
        k = int(np.argmax(np.abs(A122)))
        if abs(A122[k]) > tol.residual:
            violations.append(Violation("∇¹₂₂ = 0 (A²₁₂ ≡ 0)", float(abs(A122[k])), _pt(pts[k])))
        constants["L/K"] = None
        note = "A²₁₂ ≡ 0: L/K unconstrained"
    else:
        if np.any(small):
            bad = np.abs(A122) * small
            k = int(np.argmax(bad))
            if bad[k] > tol.residual:
                violations.append(Violation("∇¹₂₂ = 0 where A²₁₂ = 0", float(bad[k]), _pt(pts[k])))
        e = ExpIntegralField(profiles.A212 - profiles.A111, 0, _ref_3d(), tol=tol.quadrature)
        E = e.value(pts)
        ok = ~small
        rho = np.full(rs.shape, np.nan)
        rho[ok] = -A122[ok] / (A212[ok] * E[ok])
        samples = [((float(r),), float(v)) for r, v in zip(rs[ok], rho[ok])]
        base = profiles.A212.value(_ref_3d())
        if abs(base) > tol.residual:
            anchor = -profiles.A122.value(_ref_3d()) / base
        else:
            anchor = float(rho[ok][0])
        dev = np.abs(rho - anchor)
        dev[~ok] = 0.0
        k = int(np.argmax(dev))
        ratio_residual = float(dev[k])
        constants["L/K"] = float(anchor)
        if ratio_residual > tol.ratio * max(1.0, abs(anchor)):
            violations.append(Violation("ratio constancy (L/K)", ratio_residual, _pt(pts[k])))
        if abs(anchor) <= tol.residual:
            violations.append(Violation("L/K ≠ 0", abs(float(anchor)), _pt(_ref_3d())))

    status = Status.NON_METRIZABLE if violations else Status.METRIZABLE
    return Verdict(status, violations, constants, ratio_residual, samples, note)


def reconstruct_metric_3d(A111, A212, K: float, L: float, grid: GridSpec | None = None,
                          chart: Chart = FIRST) -> MetricField:
    """``P dr^2 + Q (dtheta^2 + sin^2 dphi^2)`` with ``P = K exp(2 int_1^r A111)``
    and ``Q = L exp(2 int_1^r A212)``."""
    if K == 0 or L == 0:
        raise DegenerateProfile(f"K and L must be nonzero (K={K}, L={L})")
    tol = grid.tolerances.quadrature if grid is not None else 1e-11
    P = ExpIntegralField(as_field(A111, 3), 0, _ref_3d(), scale=K, tol=tol)
    Q = ExpIntegralField(as_field(A212, 3), 0, _ref_3d(), scale=L, tol=tol)
    return make_invariant_metric_3d(P, Q, chart, grid)


# --------------------------------------------------------------------------
# 4D
# --------------------------------------------------------------------------

def classify_connection_4d(conn: ConnectionField, grid: GridSpec) -> Profile4D | NotInFamily:
    fixed = {2: SLICE_THETA, 3: SLICE_PHI}
    slots = {
        "B000": (0, 0, 0), "B010": (0, 0, 1), "B110": (0, 1, 1), "B220": (0, 2, 2),
        "B001": (1, 0, 0), "B011": (1, 0, 1), "B111": (1, 1, 1), "B221": (1, 2, 2),
        "B022": (2, 0, 2), "B032": (2, 0, 3), "B122": (2, 1, 2), "B132": (2, 1, 3),
    }
    c = conn.components
    profiles = Profile4D({name: SliceField(c[idx], fixed) for name, idx in slots.items()}, conn.chart)
    template = profiles.connection()
    res = _sweep("family-template", grid, lambda p: conn.values(p) - template.values(p))
    if res.value > grid.tolerances.residual:
        return NotInFamily(res)
    return profiles


def _rho_4d_parts(A000, A111, A212, tol: float):
    ref = _ref_4d()
    Ev = ExpIntegralField(A212 - A111, 1, ref, tol=tol)
    Eu = ExpIntegralField(A000, 0, ref, sign=-1.0, tol=tol)
    return Ev, Eu


def metrizable_connection_4d(A000, A111, A212, ratio: float, signature: Signature,
                             chart: Chart = FIRST_4D, tol: float = 1e-11) -> ConnectionField:
    """The metrizable invariant 4D connection with ``C2/C1 = ratio``."""
    A000, A111, A212 = (as_field(f, 4) for f in (A000, A111, A212))
    eps = Signature(signature).sign
    Ev, Eu = _rho_4d_parts(A000, A111, A212, tol)
    B = {
        "B000": A000,
        "B110": -eps * A000,
        "B011": A000,
        "B010": A111,
        "B001": -eps * A111,
        "B111": A111,
        "B221": (-eps * float(ratio)) * A212 * Ev * Eu,
        "B122": A212,
    }
    return make_invariant_connection_4d(B, chart)


def metrizability_check_4d(profiles: Profile4D, grid: GridSpec, signature: Signature) -> Verdict:
    """Decide 4D metrizability for connections given in isothermal ``(u, v)`` form."""
    tol = grid.tolerances
    eps = Signature(signature).sign
    us, vs = grid.axis(0), grid.axis(1)
    pts = _slice_points([us, vs], _ref_4d())
    shape = (us.size, vs.size)
    B = {name: np.broadcast_to(f.value(pts), (pts.shape[0],)).reshape(shape) for name, f in profiles.B.items()}
    grid_pts = pts.reshape(shape + (4,))
    violations: list[Violation] = []

    def flag(tag, arr):
        arr = np.abs(arr)
        k = np.unravel_index(int(np.argmax(arr)), arr.shape)
        if arr[k] > tol.residual:
            violations.append(Violation(tag, float(arr[k]), tuple(float(v) for v in grid_pts[k])))

    for name, tag in (("B220", "zero-pattern ∇⁰₂₂"), ("B022", "zero-pattern ∇²₀₂"),
                      ("B032", "zero-pattern ∇²₀₃"), ("B132", "zero-pattern ∇²₁₃")):
        flag(tag, B[name])
    flag("cross-relation ∓∇⁰₁₁ = ∇⁰₀₀", -eps * B["B110"] - B["B000"])
    flag("cross-relation ∇¹₀₁ = ∇⁰₀₀", B["B011"] - B["B000"])
    flag("cross-relation ∓∇¹₀₀ = ∇¹₁₁", -eps * B["B001"] - B["B111"])
    flag("cross-relation ∇⁰₀₁ = ∇¹₁₁", B["B010"] - B["B111"])

    def spread(arr, axis):
        return arr.max(axis=axis, keepdims=True) - arr.min(axis=axis, keepdims=True) + 0 * arr

    flag("separability of A⁰₀₀(u)", spread(B["B000"], 1))
    flag("separability of A¹₁₁(v)", spread(B["B111"], 0))
    flag("separability of A²₁₂(v)", spread(B["B122"], 0))

    A000, A111, A212 = profiles.B["B000"], profiles.B["B111"], profiles.B["B122"]
    constants: dict[str, float | None] = {}
    samples: list[tuple[tuple[float, ...], float]] = []
    ratio_residual = None
    note = ""
    small = np.abs(B["B122"]) <= tol.residual
    if np.all(small):
        flag("∇¹₂₂ = 0 (A²₁₂ ≡ 0)", B["B221"])
        constants["C2/C1"] = None
        note = "A²₁₂ ≡ 0: C2/C1 unconstrained"
    else:
        if np.any(small):
            flag("∇¹₂₂ = 0 where A²₁₂ = 0", B["B221"] * small)
        Ev, Eu = _rho_4d_parts(A000, A111, A212, tol.quadrature)
        E = (Ev.value(pts) * Eu.value(pts)).reshape(shape)
        ok = ~small
        rho = np.full(shape, np.nan)
        rho[ok] = -eps * B["B221"][ok] / (B["B122"][ok] * E[ok])
        samples = [(tuple(float(v) for v in grid_pts[k][:2]), float(rho[k])) for k in zip(*np.nonzero(ok))]
        ref = _ref_4d()
        base = A212.value(ref)
        if abs(base) > tol.residual:
            anchor = -eps * profiles.B["B221"].value(ref) / base
        else:
            anchor = float(rho[ok][0])
        dev = np.where(ok, np.abs(rho - anchor), 0.0)
        k = np.unravel_index(int(np.argmax(dev)), shape)
        ratio_residual = float(dev[k])
        constants["C2/C1"] = float(anchor)
        if ratio_residual > tol.ratio * max(1.0, abs(anchor)):
            violations.append(Violation("ratio constancy (C2/C1)", ratio_residual,
                                        tuple(float(v) for v in grid_pts[k])))
        if abs(anchor) <= tol.residual:
            violations.append(Violation("C2/C1 ≠ 0", abs(float(anchor)), _pt(ref)))

    status = Status.NON_METRIZABLE if violations else Status.METRIZABLE
    return Verdict(status, violations, constants, ratio_residual, samples, note)


def reconstruct_metric_4d(A000, A111, A212, C1: float, C2: float, signature: Signature,
                          grid: GridSpec | None = None, chart: Chart = FIRST_4D) -> MetricField:
    """``P (du^2 ± dv^2) + Q (dtheta^2 + sin^2 dphi^2)`` with
    ``P = C1 exp(2 int_1^u A000) exp(2 int_1^v A111)`` and ``Q = C2 exp(2 int_1^v A212)``."""
    if C1 == 0 or C2 == 0:
        raise DegenerateProfile(f"C1 and C2 must be nonzero (C1={C1}, C2={C2})")
    tol = grid.tolerances.quadrature if grid is not None else 1e-11
    eps = Signature(signature).sign
    ref = _ref_4d()
    Pu = ExpIntegralField(as_field(A000, 4), 0, ref, scale=C1, tol=tol)
    Pv = ExpIntegralField(as_field(A111, 4), 1, ref, tol=tol)
    P = Pu * Pv
    Q = ExpIntegralField(as_field(A212, 4), 1, ref, scale=C2, tol=tol)
    return make_invariant_metric_4d(P, ConstantField(0.0, 4), eps * P, Q, chart, grid)


def metric_profile_table(g: MetricField, grid: GridSpec) -> tuple[list[str], np.ndarray]:
    """Sample the block profiles of an invariant metric on the radial/isothermal grid.

    Returns column names and rows: ``r, P, Q`` in 3D; ``u, v, P, Q`` in 4D.
    """
    off = angular_offset(g.chart)
    names = list(g.chart.coord_names[:off])
    axes = [grid.axis(i) for i in range(off)]
    ref = _ref_3d() if g.n == 3 else _ref_4d()
    pts = _slice_points(axes, ref)
    vals = g.values(pts)
    cols = [pts[:, i] for i in range(off)] + [vals[:, 0, 0], vals[:, off, off]]
    return names + ["P", "Q"], np.stack(cols, axis=-1)


__all__ = [
    "ExpIntegralField",
    "NotInFamily",
    "Profile3D",
    "Profile4D",
    "Residual",
    "Signature",
    "Status",
    "Verdict",
    "Violation",
    "check_grid",
    "classify_connection_3d",
    "classify_connection_4d",
    "const_like",
    "invariance_residual",
    "killing_residual",
    "metric_profile_table",
    "metrizability_check_3d",
    "metrizability_check_4d",
    "metrizable_connection_3d",
    "metrizable_connection_4d",
    "reconstruct_metric_3d",
    "reconstruct_metric_4d",
    "verify_levi_civita",
]
