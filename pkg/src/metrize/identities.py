"""The fixed registry of structural property suites.

Each suite samples its own points from a seeded generator and reports the
worst residual; the seed moves the points, never the outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr
from .calculus import (
    ExprField,
    LeviCivitaField,
    PullbackMetric,
    christoffel,
    covariant_derivative_jet,
    lie_bracket_jet,
    lie_derivative_connection,
    transform_connection,
)
from .corpus import (
    COORDS_3D,
    EXPRESSIONS,
    random_connection,
    random_vector_field,
    sample_metric,
    sample_points,
)
from .errors import DomainError
from .so3 import (
    CARTESIAN,
    FIRST,
    SECOND,
    chart_consistency_check,
    generators,
    make_invariant_metric_3d,
    overlap_points,
    rotation_matrix,
    sph_to_cart,
    spherical_diffeo,
    spherical_rotation,
)

LIE_TRIPLES = 100
OVERLAP_POINTS = 50
FD_STEP = 1e-5


@dataclass
class SuiteResult:
    name: str
    residual: float
    tolerance: float
    witness: tuple[float, ...] | None = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)


def _apply_connection(c, v, w, jw):
    """``(nabla_v w)^i`` from the connection values and the value/Jacobian of ``w``."""
    return np.einsum("k,ik->i", v, jw) + np.einsum("ikl,k,l->i", c, v, w)


def lie_derivative_identity(conn, lam, xi, zeta, p) -> float:
    """``(L_lam nabla)(xi, zeta) - ([lam, nabla_xi zeta] - nabla_[lam,xi] zeta - nabla_xi [lam, zeta])``."""
    lhs = np.einsum("ijk,j,k->i", lie_derivative_connection(conn, lam, p), xi.values(p), zeta.values(p))
    lv, lj, _ = lam.jets(p, order=1)
    w, jw = covariant_derivative_jet(conn, xi, zeta, p)
    bracket_lw = jw @ lv - lj @ w
    lx, _ = lie_bracket_jet(lam, xi, p)
    lz, jlz = lie_bracket_jet(lam, zeta, p)
    c = conn.values(p)
    z, jz, _ = zeta.jets(p, order=1)
    rhs = bracket_lw - _apply_connection(c, lx, z, jz) - _apply_connection(c, xi.values(p), lz, jlz)
    return float(np.max(np.abs(lhs - rhs)))


def suite_lie_identity(seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst, where = 0.0, None
    for _ in range(LIE_TRIPLES):
        conn = random_connection(rng)
        lam, xi, zeta = (random_vector_field(rng) for _ in range(3))
        p = sample_points(rng, 1)[0]
        res = lie_derivative_identity(conn, lam, xi, zeta, p)
        if where is None or res > worst:
            worst, where = res, tuple(float(v) for v in p)
    return SuiteResult("connection-lie-derivative identity", worst, 1e-9, where, f"{LIE_TRIPLES} random triples")


NATURALITY_AXIS = (1.0, 2.0, 3.0)
NATURALITY_ANGLE = 0.4


def _rotation_safe_points(rng, alpha, count):
    out = []
    while len(out) < count:
        p = sample_points(rng, 1)[0]
        try:
            q = alpha(p)
        except DomainError:
            continue
        if 0.2 < q[1] < math.pi - 0.2 and 0.1 < q[2] < 2 * math.pi - 0.1:
            out.append(p)
    return np.array(out)


def suite_naturality(seed: int, count: int = 40) -> SuiteResult:
    """Transporting the Levi-Civita connection of ``g`` by a rotation equals the
    Levi-Civita connection of the pulled-back metric."""
    rng = np.random.default_rng(seed)
    alpha = spherical_rotation(rotation_matrix(NATURALITY_AXIS, NATURALITY_ANGLE))
    g = sample_metric()
    pts = _rotation_safe_points(rng, alpha, count)
    lhs = transform_connection(LeviCivitaField(g), alpha, pts)
    rhs = christoffel(PullbackMetric(g, alpha), pts)
    err = np.abs(lhs - rhs).reshape(len(pts), -1).max(axis=1)
    k = int(np.argmax(err))
    return SuiteResult("levi-civita naturality", float(err[k]), 1e-8, tuple(float(v) for v in pts[k]),
                       f"rotation about {NATURALITY_AXIS} by {NATURALITY_ANGLE}")


def suite_chart_consistency(seed: int) -> SuiteResult:
    pts = overlap_points(OVERLAP_POINTS, seed)
    worst = 0.0
    for P, Q in (("1", "r^2"), ("1/(1+r^2)", "r^2*exp(-r)"), ("-1", "2*r")):
        g1 = make_invariant_metric_3d(ExprField.parse(P, FIRST.coord_names), ExprField.parse(Q, FIRST.coord_names), FIRST)
        g2 = make_invariant_metric_3d(ExprField.parse(P, SECOND.coord_names), ExprField.parse(Q, SECOND.coord_names), SECOND)
        worst = max(worst, chart_consistency_check(g1, g2, pts))
    return SuiteResult("chart consistency", worst, 1e-12, None, f"{OVERLAP_POINTS} overlap points, 3 metrics")


def _bracket_residual(gens, pts) -> float:
    xi, zeta, lam = gens
    worst = 0.0
    for a, b, c in ((xi, zeta, lam), (zeta, lam, xi), (lam, xi, zeta)):
        br, _ = lie_bracket_jet(a, b, pts)
        worst = max(worst, float(np.max(np.abs(br + c.values(pts)))))
    return worst


def suite_generators(seed: int, count: int = 50) -> SuiteResult:
    """``[xi, zeta] = -lam`` cyclically, in both charts, and the spherical
    generators push forward to the Cartesian rotation fields."""
    rng = np.random.default_rng(seed)
    sph = sample_points(rng, count)
    cart = sph_to_cart(sph)
    bracket = max(_bracket_residual(generators(FIRST), sph), _bracket_residual(generators(CARTESIAN), cart))
    _, jac, _ = spherical_diffeo().map_jets(sph)
    push = 0.0
    for gs, gc in zip(generators(FIRST), generators(CARTESIAN)):
        pushed = np.einsum("...ik,...k->...i", jac, gs.values(sph))
        push = max(push, float(np.max(np.abs(pushed - gc.values(cart)))))
    return SuiteResult("generator relations", max(bracket, push), 1e-10, None,
                       f"bracket {bracket:.3g}, pushforward {push:.3g}")


def jet_fd_errors(src: str, p: np.ndarray, h: float = FD_STEP) -> tuple[float, float]:
    """Relative gradient / Hessian mismatch between jets and central differences."""
    ast = expr.parse(src, COORDS_3D)
    jet = expr.eval_jet2(ast, p)
    f = lambda q: expr.eval_value(ast, q)  # noqa: E731
    n = len(p)
    eye = np.eye(n) * h
    grad = np.array([(f(p + eye[i]) - f(p - eye[i])) / (2 * h) for i in range(n)])
    hess = np.empty((n, n))
    f0 = f(p)
    for i in range(n):
        hess[i, i] = (f(p + eye[i]) - 2 * f0 + f(p - eye[i])) / (h * h)
        for j in range(i + 1, n):
            hess[i, j] = hess[j, i] = (
                f(p + eye[i] + eye[j]) - f(p + eye[i] - eye[j]) - f(p - eye[i] + eye[j]) + f(p - eye[i] - eye[j])
            ) / (4 * h * h)
    g_err = np.max(np.abs(jet.grad - grad) / np.maximum(1.0, np.abs(jet.grad)))
    h_err = np.max(np.abs(jet.hess - hess) / np.maximum(1.0, np.abs(jet.hess)))
    return float(g_err), float(h_err)


def suite_jet_fd(seed: int, points_per_expr: int = 5) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst_g = worst_h = 0.0
    for src in EXPRESSIONS:
        for p in sample_points(rng, points_per_expr):
            g_err, h_err = jet_fd_errors(src, p)
            worst_g, worst_h = max(worst_g, g_err), max(worst_h, h_err)
    # one residual on a common scale: each error divided by its own tolerance
    score = max(worst_g / 1e-6, worst_h / 1e-4)
    return SuiteResult("jet finite-difference", score, 1.0, None,
                       f"grad rel {worst_g:.3g} (tol 1e-6), hess rel {worst_h:.3g} (tol 1e-4)")


SUITES = (
    suite_lie_identity,
    suite_naturality,
    suite_chart_consistency,
    suite_generators,
    suite_jet_fd,
)


def run_all(seed: int = 0) -> list[SuiteResult]:
    return [suite(seed) for suite in SUITES]


__all__ = ["SUITES", "SuiteResult", "jet_fd_errors", "lie_derivative_identity", "run_all"]
