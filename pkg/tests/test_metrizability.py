import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metrize.calculus import ConnectionField, ExprField, GridSpec, Tolerances, christoffel
from metrize.corpus import KL_PAIRS, PROFILE_PAIRS_3D
from metrize.errors import DegenerateProfile, DomainError
from metrize.metrizability import (
    NotInFamily,
    Profile3D,
    Profile4D,
    Signature,
    Status,
    check_grid,
    classify_connection_3d,
    classify_connection_4d,
    invariance_residual,
    killing_residual,
    metric_profile_table,
    metrizability_check_3d,
    metrizability_check_4d,
    metrizable_connection_3d,
    metrizable_connection_4d,
    reconstruct_metric_3d,
    reconstruct_metric_4d,
    verify_levi_civita,
)
from metrize.so3 import (
    CARTESIAN,
    FIRST,
    FIRST_4D,
    generators,
    make_invariant_connection_3d,
    make_invariant_metric_3d,
)

GRID3 = GridSpec(((0.5, 3.0, 12), (0.2, math.pi - 0.2, 6), (0.1, 2 * math.pi - 0.1, 5)))
GRID4 = GridSpec(((0.5, 2.0, 6), (0.5, 3.0, 6), (0.3, math.pi - 0.3, 4), (0.1, 2 * math.pi - 0.1, 4)))


def f3(src):
    return ExprField.parse(src, FIRST.coord_names)


def f4(src):
    return ExprField.parse(src, FIRST_4D.coord_names)


def family(A111="0", A122="0", A212="0", A="0"):
    return Profile3D(f3(A111), f3(A122), f3(A212), f3(A))


def euclid_connection():
    return family("0", "-r", "1/r").connection()


def euclid_metric():
    return make_invariant_metric_3d(f3("1"), f3("r^2"))


# --- residual sweeps -----------------------------------------------------------

def test_invariance_of_family_and_perturbation():
    assert invariance_residual(euclid_connection(), GRID3).value <= 1e-9
    conn = family("theta", "-r", "1/r").connection()
    res = invariance_residual(conn, GRID3)
    assert res.value >= 0.1
    assert res.witness is not None and len(res.witness) == 3
    assert res.generator in ("xi", "zeta", "lam")


def test_flat_cartesian_connection_is_invariant():
    zero = ConnectionField(CARTESIAN, [[[0.0] * 3] * 3] * 3)
    grid = GridSpec(((-1.0, 1.0, 4),) * 3)
    assert invariance_residual(zero, grid, generators(CARTESIAN)).value == 0.0


def test_killing_residuals():
    assert killing_residual(euclid_metric(), GRID3).value <= 1e-10
    broken = make_invariant_metric_3d(f3("1"), f3("r^2*(1 + phi/10)"))
    assert killing_residual(broken, GRID3).value >= 1e-2


def test_residual_is_reproducible_at_witness():
    from metrize.calculus import lie_derivative_connection

    conn = family("theta", "-r", "1/r").connection()
    res = invariance_residual(conn, GRID3)
    gen = {g.name: g for g in generators(FIRST)}[res.generator]
    again = lie_derivative_connection(conn, gen, np.array(res.witness))
    assert abs(again[res.component]) == res.value


def test_check_grid_rejects_pole():
    check_grid(GRID3, FIRST)
    bad = GridSpec(((0.5, 3.0, 4), (0.0, 1.0, 4), (0.1, 1.0, 4)))
    with pytest.raises(DomainError):
        check_grid(bad, FIRST)
    with pytest.raises(DomainError):
        check_grid(GRID3, FIRST_4D)


# --- classification ------------------------------------------------------------

def test_classify_euclidean():
    prof = classify_connection_3d(euclid_connection(), GRID3)
    assert isinstance(prof, Profile3D)
    rs = np.column_stack([np.linspace(0.5, 3, 9), np.full(9, 1.0), np.full(9, 2.0)])
    np.testing.assert_allclose(prof.A111.value(rs), 0.0, atol=1e-10)
    np.testing.assert_allclose(prof.A122.value(rs), -rs[:, 0], atol=1e-10)
    np.testing.assert_allclose(prof.A212.value(rs), 1 / rs[:, 0], atol=1e-10)
    np.testing.assert_allclose(prof.A.value(rs), 0.0, atol=1e-10)


def test_classify_rejects_extra_component():
    comps = euclid_connection().components.copy()
    comps[0, 1, 2] = comps[0, 2, 1] = f3("1")
    result = classify_connection_3d(ConnectionField(FIRST, comps.tolist()), GRID3)
    assert isinstance(result, NotInFamily)
    assert result.residual.value >= 1.0


def test_classify_recovers_a_profile():
    prof = classify_connection_3d(family("0", "-r", "1/r", "2/r").connection(), GRID3)
    rs = np.column_stack([GRID3.axis(0), np.full(12, 0.7), np.full(12, 4.0)])
    np.testing.assert_allclose(prof.A.value(rs), 2 / rs[:, 0], atol=1e-10)


def test_classify_4d_round_trip():
    B = {"B000": f4("u"), "B032": f4("v^2"), "B221": f4("-v")}
    prof = classify_connection_4d(Profile4D(B).connection(), GRID4)
    assert isinstance(prof, Profile4D)
    p = np.array([1.3, 2.1, math.pi / 2, math.pi])
    assert prof.B["B032"].value(p) == pytest.approx(2.1**2)
    assert prof.B["B110"].value(p) == 0.0


def test_profile4d_unknown_name():
    with pytest.raises(KeyError):
        Profile4D({"B999": f4("1")})


# --- 3D verdicts ---------------------------------------------------------------

def test_euclidean_is_metrizable():
    v = metrizability_check_3d(family("0", "-r", "1/r"), GRID3)
    assert v.status is Status.METRIZABLE
    assert v.violated_conditions == []
    assert v.constants["L/K"] == pytest.approx(1.0, abs=1e-7)
    assert v.ratio_residual <= 1e-7


def test_a_nonzero_is_rejected():
    v = metrizability_check_3d(family("0", "-r", "1/r", "1"), GRID3)
    assert v.status is Status.NON_METRIZABLE
    assert [c.condition for c in v.violated_conditions] == ["∇²₁₃ = 0"]


def test_nonconstant_ratio_is_rejected():
    v = metrizability_check_3d(family("0", "-r*(1 + r/10)", "1/r"), GRID3)
    assert v.status is Status.NON_METRIZABLE
    assert "ratio constancy (L/K)" in [c.condition for c in v.violated_conditions]
    for (r,), rho in v.ratio_samples:
        assert rho == pytest.approx(1 + r / 10, abs=1e-7)


def test_degenerate_branch():
    v = metrizability_check_3d(family("r", "0", "0"), GRID3)
    assert v.status is Status.METRIZABLE
    assert v.constants["L/K"] is None
    v = metrizability_check_3d(family("r", "1", "0"), GRID3)
    assert v.status is Status.NON_METRIZABLE


def test_zero_ratio_is_rejected():
    # A122 = 0 with A212 != 0 means L = 0: no metric
    v = metrizability_check_3d(family("0", "0", "1/r"), GRID3)
    assert [c.condition for c in v.violated_conditions] == ["L/K ≠ 0"]


@given(st.floats(0.05, 5.0), st.sampled_from(PROFILE_PAIRS_3D), st.booleans())
@settings(max_examples=20, deadline=None)
def test_eq42_family_is_accepted_and_ratio_recovered(ratio, pair, negate):
    ratio = -ratio if negate else ratio
    A111, A212 = f3(pair[0]), f3(pair[1])
    conn = metrizable_connection_3d(A111, A212, ratio)
    prof = classify_connection_3d(conn, GRID3)
    v = metrizability_check_3d(prof, GRID3)
    assert v.status is Status.METRIZABLE
    assert v.constants["L/K"] == pytest.approx(ratio, rel=1e-9)


@given(st.floats(0.01, 1.0))
@settings(max_examples=15, deadline=None)
def test_perturbed_ratio_is_rejected(eps):
    prof = family("0", f"-r*(1 + {eps!r}*(r - 1)^2)", "1/r")
    assert metrizability_check_3d(prof, GRID3).status is Status.NON_METRIZABLE


# --- 3D reconstruction ----------------------------------------------------------

def test_reconstruct_euclid_profiles():
    g = reconstruct_metric_3d(f3("0"), f3("1/r"), 1.0, 1.0)
    for r in (0.5, 1.0, 2.0, 3.0):
        m = g.values([r, 1.0, 1.0])
        assert m[0, 0] == pytest.approx(1.0, abs=1e-10)
        assert m[1, 1] == pytest.approx(r * r, abs=1e-10)
    assert verify_levi_civita(euclid_connection(), g, GRID3).value <= 1e-10


def test_reconstruct_exponential_profile():
    g = reconstruct_metric_3d(f3("1"), f3("0"), 1.0, 1.0)
    cols, rows = metric_profile_table(g, GRID3)
    assert cols == ["r", "P", "Q"]
    np.testing.assert_allclose(rows[:, 1], np.exp(2 * (rows[:, 0] - 1)), rtol=1e-10)
    np.testing.assert_allclose(rows[:, 2], 1.0, atol=1e-15)


def test_reconstruct_rejects_zero_constant():
    with pytest.raises(DegenerateProfile):
        reconstruct_metric_3d(f3("0"), f3("1/r"), 0.0, 1.0)
    with pytest.raises(DegenerateProfile):
        reconstruct_metric_3d(f3("0"), f3("1/r"), 1.0, 0.0)


@pytest.mark.parametrize("pair", PROFILE_PAIRS_3D)
@pytest.mark.parametrize("K, L", KL_PAIRS)
def test_round_trip_3d(pair, K, L):
    A111, A212 = f3(pair[0]), f3(pair[1])
    conn = metrizable_connection_3d(A111, A212, L / K)
    g = reconstruct_metric_3d(A111, A212, K, L, GRID3)
    assert verify_levi_civita(conn, g, GRID3).value <= 1e-8
    assert killing_residual(g, GRID3).value <= 1e-10


@pytest.mark.parametrize("c", [2.0, -0.5, 7.0])
def test_scaling_invariance(c):
    A111, A212 = f3("r/(1+r^2)"), f3("1/(2*r)")
    base = metrizable_connection_3d(A111, A212, 3.0 / -1.0)
    scaled = metrizable_connection_3d(A111, A212, (c * 3.0) / (c * -1.0))
    pts = GRID3.points()
    np.testing.assert_allclose(scaled.values(pts), base.values(pts), atol=1e-12, rtol=0)
    # the Levi-Civita connection of the scaled metric is the same too
    g1 = reconstruct_metric_3d(A111, A212, -1.0, 3.0)
    g2 = reconstruct_metric_3d(A111, A212, -c, 3.0 * c)
    np.testing.assert_allclose(christoffel(g2, pts[:40]), christoffel(g1, pts[:40]), atol=1e-12)


@pytest.mark.parametrize("K, L", [(1, 1), (2, 0.5), (-1, 3), (1, -2), (-1, -1)])
def test_signature_follows_constants(K, L):
    g = reconstruct_metric_3d(f3("sin(r)/4"), f3("1/r + 1/(1+r^2)"), K, L)
    eig = np.linalg.eigvalsh(g.values(GRID3.points()))
    expected = sorted([np.sign(K)] + [np.sign(L)] * 2)
    assert np.all(np.sort(np.sign(eig), axis=-1) == expected)


def test_flat_connection_against_doubled_metric():
    g = make_invariant_metric_3d(f3("1"), f3("2*r^2"))
    res = verify_levi_civita(euclid_connection(), g, GRID3)
    # doubling Q moves the radial slot from -r to -2r; the gap peaks at r = 3
    assert res.value == pytest.approx(3.0, rel=1e-12)
    assert res.component == (0, 1, 1)
    assert res.witness[0] == 3.0


def test_verify_levi_civita_chart_mismatch():
    with pytest.raises(ValueError):
        verify_levi_civita(euclid_connection(), reconstruct_metric_4d(0, 0, f4("1/v"), 1, 1, "riemann"), GRID3)


# --- 4D ------------------------------------------------------------------------

SHORT = [("0", "0", "1/v"), ("u/(1+u^2)", "1/v", "1/v")]


def test_flat_4d_riemann_is_metrizable():
    B = {"B122": f4("1/v"), "B221": f4("-v")}
    v = metrizability_check_4d(Profile4D(B), GRID4, Signature.RIEMANN)
    assert v.status is Status.METRIZABLE
    assert v.constants["C2/C1"] == pytest.approx(1.0, abs=1e-7)


def test_flat_4d_lorentz_is_metrizable():
    B = {"B122": f4("1/v"), "B221": f4("v")}
    v = metrizability_check_4d(Profile4D(B), GRID4, Signature.LORENTZ)
    assert v.status is Status.METRIZABLE
    assert v.constants["C2/C1"] == pytest.approx(1.0, abs=1e-7)
    # the Riemann reading of the same profiles needs a negative ratio
    v = metrizability_check_4d(Profile4D(B), GRID4, Signature.RIEMANN)
    assert v.constants["C2/C1"] == pytest.approx(-1.0, abs=1e-7)


def test_b032_injection():
    B = {"B122": f4("1/v"), "B221": f4("-v"), "B032": f4("1")}
    v = metrizability_check_4d(Profile4D(B), GRID4, Signature.RIEMANN)
    assert v.status is Status.NON_METRIZABLE
    assert [c.condition for c in v.violated_conditions] == ["zero-pattern ∇²₀₃"]


def test_separability_violation():
    B = {"B000": f4("u*v"), "B110": f4("-u*v"), "B011": f4("u*v"), "B122": f4("1/v"), "B221": f4("-v")}
    v = metrizability_check_4d(Profile4D(B), GRID4, Signature.RIEMANN)
    assert v.status is Status.NON_METRIZABLE
    assert "separability of A⁰₀₀(u)" in [c.condition for c in v.violated_conditions]


def test_cross_relation_violation():
    B = {"B000": f4("u"), "B122": f4("1/v"), "B221": f4("-v")}
    v = metrizability_check_4d(Profile4D(B), GRID4, Signature.RIEMANN)
    tags = [c.condition for c in v.violated_conditions]
    assert "cross-relation ∓∇⁰₁₁ = ∇⁰₀₀" in tags
    assert "cross-relation ∇¹₀₁ = ∇⁰₀₀" in tags


def test_a000_factor():
    g = reconstruct_metric_4d(f4("1"), f4("0"), f4("1/v"), 1.0, 1.0, Signature.RIEMANN)
    conn = metrizable_connection_4d(f4("1"), f4("0"), f4("1/v"), 1.0, Signature.RIEMANN)
    for u, v in [(0.5, 1.0), (1.5, 2.0), (2.0, 0.7)]:
        p = np.array([u, v, 1.0, 1.0])
        assert g.values(p)[0, 0] == pytest.approx(math.exp(2 * (u - 1)), rel=1e-10)
        assert conn.values(p)[1, 2, 2] == pytest.approx(-v * math.exp(-2 * (u - 1)), rel=1e-10)
    assert verify_levi_civita(conn, g, GRID4).value <= 1e-8


def test_lorentz_reconstruction_matches_hand_christoffels():
    g = reconstruct_metric_4d(f4("0"), f4("0"), f4("1/v"), 1.0, 1.0, Signature.LORENTZ)
    pts = GRID4.points()
    vals = g.values(pts)
    np.testing.assert_allclose(vals[:, 1, 1], -1.0, atol=1e-12)
    np.testing.assert_allclose(vals[:, 2, 2], pts[:, 1] ** 2, rtol=1e-10)
    c = christoffel(g, pts)
    v, th = pts[:, 1], pts[:, 2]
    # g = du^2 - dv^2 + v^2 dOmega^2
    np.testing.assert_allclose(c[:, 1, 2, 2], v, rtol=1e-10)
    np.testing.assert_allclose(c[:, 1, 3, 3], v * np.sin(th) ** 2, rtol=1e-10)
    np.testing.assert_allclose(c[:, 2, 1, 2], 1 / v, rtol=1e-10)
    np.testing.assert_allclose(c[:, 3, 2, 3], np.cos(th) / np.sin(th), rtol=1e-10)
    np.testing.assert_allclose(c[:, 0], 0.0, atol=1e-12)


def test_reconstruct_4d_rejects_zero_constant():
    with pytest.raises(DegenerateProfile):
        reconstruct_metric_4d(f4("0"), f4("0"), f4("1/v"), 0.0, 1.0, "riemann")
    with pytest.raises(DegenerateProfile):
        reconstruct_metric_4d(f4("0"), f4("0"), f4("1/v"), 1.0, 0.0, "lorentz")


@pytest.mark.parametrize("short", SHORT)
@pytest.mark.parametrize("C1, C2", [(1.0, 1.0), (0.5, 2.0)])
@pytest.mark.parametrize("sig", list(Signature))
def test_round_trip_4d(short, C1, C2, sig):
    A000, A111, A212 = (f4(s) for s in short)
    conn = metrizable_connection_4d(A000, A111, A212, C2 / C1, sig)
    g = reconstruct_metric_4d(A000, A111, A212, C1, C2, sig, GRID4)
    assert verify_levi_civita(conn, g, GRID4).value <= 1e-8
    assert killing_residual(g, GRID4).value <= 1e-10
    prof = classify_connection_4d(conn, GRID4)
    v = metrizability_check_4d(prof, GRID4, sig)
    assert v.status is Status.METRIZABLE
    assert v.constants["C2/C1"] == pytest.approx(C2 / C1, rel=1e-9)


def test_4d_table_columns():
    g = reconstruct_metric_4d(f4("0"), f4("0"), f4("1/v"), 1.0, 1.0, "riemann")
    cols, rows = metric_profile_table(g, GRID4)
    assert cols == ["u", "v", "P", "Q"]
    assert rows.shape == (36, 4)
    np.testing.assert_allclose(rows[:, 3], rows[:, 1] ** 2, rtol=1e-10)
