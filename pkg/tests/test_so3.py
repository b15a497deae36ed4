import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metrize.calculus import ExprField, christoffel, lie_derivative_connection, lie_derivative_metric
from metrize.corpus import sample_points
from metrize.errors import DegenerateProfile, DomainError
from metrize.so3 import (
    CARTESIAN,
    FIRST,
    FIRST_4D,
    SECOND,
    cart_to_sph,
    chart_consistency_check,
    default_grid,
    generators,
    make_invariant_connection_3d,
    make_invariant_connection_4d,
    make_invariant_metric_3d,
    make_invariant_metric_4d,
    overlap_points,
    sph_to_cart,
    sphere_metric_part,
    spherical_diffeo,
    transition_first_to_second,
)

S2 = math.sqrt(2) / 2


def f3(src, chart=FIRST):
    return ExprField.parse(src, chart.coord_names)


def f4(src):
    return ExprField.parse(src, FIRST_4D.coord_names)


def small_grid(chart, count=5):
    return default_grid(chart, count)


# --- chart maps ----------------------------------------------------------------

@pytest.mark.parametrize(
    "p, c",
    [((1, math.pi / 2, 0), (1, 0, 0)), ((2, math.pi / 2, math.pi / 2), (0, 2, 0)), ((1, math.pi / 4, math.pi), (-S2, 0, S2))],
)
def test_sph_to_cart(p, c):
    np.testing.assert_allclose(sph_to_cart(p), c, atol=1e-15)


def test_sph_to_cart_rejects_outside_box():
    with pytest.raises(DomainError):
        sph_to_cart([-1.0, 1.0, 1.0])
    with pytest.raises(DomainError):
        sph_to_cart([1.0, 4.0, 1.0])


def test_cart_to_sph_examples():
    np.testing.assert_allclose(cart_to_sph([0, 2, 0]), [2, math.pi / 2, math.pi / 2], atol=1e-15)
    np.testing.assert_allclose(cart_to_sph([-1, 0, 0]), [1, math.pi / 2, math.pi], atol=1e-15)
    with pytest.raises(DomainError):
        cart_to_sph([1, 0, 0])
    with pytest.raises(DomainError):
        cart_to_sph([-1, 0.5, 0], SECOND)


@given(st.floats(0.1, 5), st.floats(0.05, math.pi - 0.05), st.floats(0.05, 2 * math.pi - 0.05))
@settings(max_examples=200, deadline=None)
def test_round_trip_first_chart(r, theta, phi):
    p = np.array([r, theta, phi])
    np.testing.assert_allclose(cart_to_sph(sph_to_cart(p)), p, rtol=1e-12, atol=1e-12)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=200, deadline=None)
def test_azimuth_matches_printed_branches(x, y, z):
    rho = math.hypot(x, y)
    if rho < 1e-3 or (x >= 0 and abs(y) < 1e-3):
        return
    r, theta, phi = cart_to_sph([x, y, z])
    assert math.cos(phi) == pytest.approx(x / rho, abs=1e-12)
    assert math.sin(phi) == pytest.approx(y / rho, abs=1e-12)
    assert theta == pytest.approx(math.acos(z / r), abs=1e-12)
    # the printed formulas agree literally in these quadrants
    # (away from the axes, where arcsin/arccos lose conditioning)
    if min(abs(x), abs(y)) < 1e-3 * rho:
        return
    if x < 0 and y > 0:
        assert phi == pytest.approx(math.acos(x / rho), abs=1e-12)
    if x > 0 and y > 0:
        assert phi == pytest.approx(math.asin(y / rho), abs=1e-12)
    if x > 0 and y < 0:
        assert phi == pytest.approx(math.asin(y / rho) + 2 * math.pi, abs=1e-12)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=200, deadline=None)
def test_second_chart_angles(x, y, z):
    rho = math.hypot(x, z)
    if rho < 1e-3 or (x <= 0 and abs(z) < 1e-3):
        return
    r, theta2, phi2 = cart_to_sph([x, y, z], SECOND)
    assert theta2 == pytest.approx(math.acos(-y / r), abs=1e-12)
    assert math.cos(phi2) == pytest.approx(-x / rho, abs=1e-12)
    assert math.sin(phi2) == pytest.approx(-z / rho, abs=1e-12)
    if x > 0 and z < 0 and min(x, -z) >= 1e-3 * rho:
        assert phi2 == pytest.approx(math.acos(-x / rho), abs=1e-12)


def test_transition_examples():
    with pytest.raises(DomainError):
        transition_first_to_second([1, math.pi / 2, 3 * math.pi / 2])
    q = transition_first_to_second([1, math.pi / 4, math.pi])
    assert q[0] == 1.0
    assert math.cos(q[1]) == pytest.approx(0.0, abs=1e-15)


def test_transition_keeps_radius_exactly():
    pts = overlap_points(50, seed=4)
    out = transition_first_to_second(pts)
    assert np.array_equal(out[:, 0], pts[:, 0])


# --- generators ----------------------------------------------------------------

def test_spherical_generator_values():
    xi, zeta, lam = generators(FIRST)
    np.testing.assert_allclose(xi.values([1.3, 0.4, 2.0]), [0, 0, 1])
    np.testing.assert_allclose(zeta.values([1, math.pi / 2, 0]), [0, 0, 0], atol=1e-16)
    np.testing.assert_allclose(lam.values([1, math.pi / 2, 0]), [0, 1, 0], atol=1e-16)


def test_generator_pushforward():
    pts = sample_points(np.random.default_rng(8), 40)
    _, jac, _ = spherical_diffeo().map_jets(pts)
    for gs, gc in zip(generators(FIRST), generators(CARTESIAN)):
        pushed = np.einsum("...ik,...k->...i", jac, gs.values(pts))
        np.testing.assert_allclose(pushed, gc.values(sph_to_cart(pts)), atol=1e-10)


def test_generator_brackets_4d_chart():
    from metrize.calculus import lie_bracket

    xi, zeta, lam = generators(FIRST_4D)
    p = np.array([0.3, 1.2, 1.0, 2.0])
    np.testing.assert_allclose(lie_bracket(xi, zeta, p), -lam.values(p), atol=1e-14)
    np.testing.assert_allclose(lie_bracket(zeta, lam, p), -xi.values(p), atol=1e-14)
    assert np.all(xi.values(p)[:2] == 0)


def test_generators_unsupported_chart():
    with pytest.raises(ValueError):
        generators(SECOND)


# --- invariant families ------------------------------------------------------------

def test_euclidean_metric_and_connection():
    g = make_invariant_metric_3d(f3("1"), f3("r^2"))
    conn = make_invariant_connection_3d(f3("0"), f3("-r"), f3("1/r"), f3("0"))
    pts = sample_points(np.random.default_rng(1), 30)
    np.testing.assert_allclose(conn.values(pts), christoffel(g, pts), atol=1e-13)


def test_connection_a_slot():
    conn = make_invariant_connection_3d(0, 0, 0, 1)
    c = conn.values([1.0, math.pi / 6, 0.5])
    assert c[1, 0, 2] == pytest.approx(0.5)
    assert c[2, 0, 1] == pytest.approx(-2.0)


@pytest.mark.parametrize("P, Q", [("1", "r^2"), ("1", "1"), ("exp(r)", "r^2 + sin(r)"), ("-1", "r")])
def test_invariant_metric_killing(P, Q):
    g = make_invariant_metric_3d(f3(P), f3(Q))
    pts = default_grid(FIRST, 6).points()
    for gen in generators(FIRST):
        assert np.max(np.abs(lie_derivative_metric(g, gen, pts))) <= 1e-10


def test_degenerate_profiles():
    grid = small_grid(FIRST)
    with pytest.raises(DegenerateProfile):
        make_invariant_metric_3d(f3("0"), f3("r^2"), grid=grid)
    with pytest.raises(DegenerateProfile):
        make_invariant_metric_3d(f3("1"), f3("r - 0.5"), grid=grid)
    grid4 = small_grid(FIRST_4D)
    with pytest.raises(DegenerateProfile):
        make_invariant_metric_4d(f4("1"), f4("1"), f4("1"), f4("v^2"), grid=grid4)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_random_3d_family_is_invariant(seed):
    rng = np.random.default_rng(seed)
    pool = ["r", "1/r", "sin(r)", "exp(-r)", "r^2/3", "log(r)"]
    prof = [f3(f"{rng.uniform(-2, 2)!r}*{pool[rng.integers(len(pool))]}") for _ in range(4)]
    conn = make_invariant_connection_3d(*prof)
    pts = sample_points(rng, 20)
    for gen in generators(FIRST):
        assert np.max(np.abs(lie_derivative_connection(conn, gen, pts))) <= 1e-9


def test_4d_family_with_all_profiles_is_invariant():
    names = ["B000", "B010", "B110", "B220", "B001", "B011", "B111", "B221", "B022", "B032", "B122", "B132"]
    exprs = ["u*v", "sin(u)+v", "1/v", "u^2", "exp(-v)", "cos(u*v)", "v", "u-v", "2*u", "1/(1+v^2)", "log(v)", "u/v"]
    conn = make_invariant_connection_4d({n: f4(e) for n, e in zip(names, exprs)})
    pts = default_grid(FIRST_4D, 4).points()
    for gen in generators(FIRST_4D):
        assert np.max(np.abs(lie_derivative_connection(conn, gen, pts))) <= 1e-9


def test_4d_flat_christoffels():
    for sign in (1.0, -1.0):
        g = make_invariant_metric_4d(f4(repr(sign)), f4("0"), f4("1"), f4("v^2"))
        conn = make_invariant_connection_4d({"B122": f4("1/v"), "B221": f4("-v")})
        pts = default_grid(FIRST_4D, 4).points()
        np.testing.assert_allclose(conn.values(pts), christoffel(g, pts), atol=1e-13)


def test_4d_b032_placement():
    c = make_invariant_connection_4d({"B032": 1.0}).values([0.0, 1.0, math.pi / 2, 1.0])
    assert c[2, 0, 3] == pytest.approx(1.0)
    # the sign that keeps the family invariant
    assert c[3, 0, 2] == pytest.approx(-1.0)


def test_4d_unsigned_b032_slot_breaks_invariance():
    good = make_invariant_connection_4d({"B032": f4("1 + u*v")})
    comps = good.components.copy()
    comps[3, 0, 2] = comps[3, 2, 0] = ExprField.parse("(1 + u*v)/sin(theta)", FIRST_4D.coord_names)
    from metrize.calculus import ConnectionField

    bad = ConnectionField(FIRST_4D, comps.tolist())
    p = np.array([0.3, 1.2, 1.0, 2.0])
    zeta = generators(FIRST_4D)[1]
    assert np.max(np.abs(lie_derivative_connection(good, zeta, p))) <= 1e-12
    assert np.max(np.abs(lie_derivative_connection(bad, zeta, p))) > 0.1


def test_4d_metric_killing():
    g = make_invariant_metric_4d(f4("1 + u^2"), f4("0.1*u*v"), f4("-v"), f4("v^2 + 1"))
    pts = default_grid(FIRST_4D, 4).points()
    for gen in generators(FIRST_4D):
        assert np.max(np.abs(lie_derivative_metric(g, gen, pts))) <= 1e-10


# --- chart consistency -------------------------------------------------------------

def test_chart_consistency():
    pts = overlap_points(50, seed=2)
    g1 = make_invariant_metric_3d(f3("exp(r)"), f3("r^2 + 1"))
    g2 = make_invariant_metric_3d(f3("exp(r)", SECOND), f3("r^2 + 1", SECOND), SECOND)
    assert chart_consistency_check(g1, g2, pts) <= 1e-12
    doubled = make_invariant_metric_3d(f3("exp(r)", SECOND), f3("2*(r^2 + 1)", SECOND), SECOND)
    res = chart_consistency_check(g1, doubled, pts[:1])
    assert res >= 0.5 * (pts[0, 0] ** 2 + 1)
    sphere1, sphere2 = sphere_metric_part(f3("1")), sphere_metric_part(f3("1", SECOND), SECOND)
    assert chart_consistency_check(sphere1, sphere2, pts) <= 1e-12
