import numpy as np
import pytest

from ddcocycle import extension as E
from ddcocycle import forms as F
from ddcocycle import signs as S
from ddcocycle.matgroups import PAULI, GroupPoint, GroupSpec, TangentVector, trivial_circle_action
from ddcocycle.nerve import NerveComplex, ResidualReport, check_cocycle, max_residual, sample_probes

N = 50


@pytest.fixture(scope="module")
def flat():
    return E.build_u2_over_pu2(flat=True)


@pytest.fixture(scope="module")
def twisted():
    return E.build_u2_over_pu2(flat=False)


def test_connection_on_vertical_and_traceless_directions(flat):
    p, _ = sample_probes(E.U2, 0, 5, 0, 1)
    g = p.mats[0]
    vert = TangentVector(p, (g * 1j,))
    assert np.allclose(flat.theta(p, vert), 1j)
    horiz = TangentVector(p, (g @ (1j * PAULI[0]),))
    assert np.max(np.abs(flat.theta(p, horiz))) < 1e-15


def test_twisted_connection_is_normalized(twisted):
    p, _ = sample_probes(E.U2, 0, 20, 0, 2)
    vert = TangentVector(p, (p.mats[0] * 1j,))
    assert np.max(np.abs(twisted.theta(p, vert) - 1j)) < 1e-13


def test_flat_connection_is_closed(flat):
    assert max_residual(F.exterior_derivative(flat.theta), 100, 0, 3) < 1e-6


def test_flat_curvature_vanishes(flat):
    assert max_residual(E.curvature_on_base(flat), 100, 0, 4) < 1e-8


def test_twisted_curvature_is_derivative_of_twist(twisted):
    c1 = E.curvature_on_base(twisted)
    expected = E.MINUS_ONE_OVER_2PI_I * F.exterior_derivative(twisted.alpha, richardson=True)
    assert max_residual(c1 - expected, 100, 0, 5) < 1e-6
    assert max_residual(c1, 100, 0, 5) > 1e-3


def test_lift_covers_base(twisted):
    p, xs = sample_probes(E.PU2, 1, 10, 0, 6)
    q = twisted.lift_point(p)
    back = twisted.project(GroupPoint(E.U2, q.mats))
    assert np.max(np.abs(np.abs(np.einsum("nij,nij->n", back.mats[0].conj(), p.mats[0])) - 2)) < 1e-12
    v = twisted.lift_vector(xs[0], q)
    pushed = twisted.project.push(TangentVector(GroupPoint(E.U2, q.mats), v.mats))
    left_base = np.conj(np.swapaxes(p.mats[0], -1, -2)) @ xs[0].mats[0]
    left_pushed = np.conj(np.swapaxes(back.mats[0], -1, -2)) @ pushed.mats[0]
    # compare as elements of su(2) up to the sign of the representative
    assert np.max(np.minimum(np.abs(left_base - left_pushed).max(axis=(1, 2)),
                             np.abs(left_base + left_pushed).max(axis=(1, 2)))) < 1e-12


def test_homomorphic_lift_gives_vanishing_section_term():
    ext = E.build_u2_over_pu2(flat=True, lift_phase=None)
    assert max_residual(E.nat_section_delta_pullback(ext), 50, 0, 7) < 1e-14


@pytest.mark.parametrize("model", ["flat", "twisted"])
def test_lift_independence(model, request):
    ext = request.getfixturevalue(model)
    for what, value in E.lift_independence(ext, N).items():
        assert value < 1e-9, what


@pytest.mark.parametrize("model", ["flat", "twisted"])
def test_delta_of_natural_section_is_one(model, request):
    assert E.delta_section_discrepancy(request.getfixturevalue(model), 200) < 1e-12


@pytest.mark.parametrize("model", ["flat", "twisted"])
def test_curvature_section_identities(model, request):
    rep = E.curvature_section_identities(request.getfixturevalue(model), n=N)
    assert rep.passed, rep.to_list()


def test_flat_model_layers(flat):
    c = E.dd_cocycle(flat)
    assert max_residual(c.layers[(1, 0, 2)], 50, 0, 8) < 1e-8
    cx = NerveComplex(E.PU2)
    assert max_residual(cx.d_horizontal(c.layers[(2, 0, 1)], 2), 50, 0, 9) < 1e-10


def test_unit_twist_changes_nothing(twisted):
    one = E.SectionTwist(lambda g: np.ones(g.shape[:-2], complex))
    a = E.twisted_section_pullback(twisted, one)
    b = E.nat_section_delta_pullback(twisted)
    assert max_residual(a - b, 50, 0, 10) < 1e-10


def test_twist_function_coboundary_is_trivial():
    tw = E.default_twist_function()
    p, _ = sample_probes(GroupSpec(("PU2",) * 3), 0, 100, 0, 11)
    assert np.max(np.abs(tw.delta_phi(*p.mats) - 1)) < 1e-12


def test_section_change(twisted):
    rep, probe = E.twist_section_check(twisted, E.default_twist_function(), n=N)
    assert probe.value == S.SECTION_CHANGE
    assert rep.passed, rep.to_list()
    assert rep["s*(delta theta) = s_nt*(delta theta) + dlog phi"].max_residual < 1e-6


def test_zero_twist_form_connection_change(flat):
    same = E.build_u2_over_pu2(flat=True)
    zero = F.zero_form(E.PU2, 1)
    rep, probe = E.connection_independence_check(flat, same, alpha=zero, n=20, sign=S.CONNECTION_CHANGE)
    assert probe is None
    assert all(e.max_residual == 0 for e in rep.entries)


def test_connection_change(flat, twisted):
    rep, probe = E.connection_independence_check(flat, twisted, n=N)
    assert probe.value == S.CONNECTION_CHANGE
    assert rep.passed, rep.to_list()


def test_connection_change_negative_control(flat, twisted):
    rep, _ = E.connection_independence_check(flat, twisted, n=20, sign=S.CONNECTION_CHANGE, delta_scale=2.0)
    assert max(e.max_residual for e in rep.entries) > 1e-3


def test_twist_validation():
    with pytest.raises(ValueError, match="closed"):
        E.build_u2_over_pu2(flat=False, alpha=F.zero_form(E.PU2, 1))
    odd = F.DifferentialForm(E.PU2, 1, lambda p, xs: np.real(np.trace(p.mats[0], axis1=-2, axis2=-1))
                             * np.trace(np.swapaxes(p.mats[0].conj(), -1, -2) @ xs[0].mats[0] @ np.diag([1, -1]),
                                        axis1=-2, axis2=-1), "odd")
    with pytest.raises(ValueError, match="sign"):
        E.build_u2_over_pu2(flat=False, alpha=odd)


@pytest.mark.parametrize("model", ["flat", "twisted"])
def test_behrend_xu(model, request):
    rep = E.behrend_xu_check(request.getfixturevalue(model), n=N)
    assert rep.passed, rep.to_list()
    assert len(rep.entries) == 3


def test_equivariant_model_is_consistent():
    assert E.check_equivariant_model(E.build_equivariant()) < 1e-12


def test_tau_vanishes_for_trivial_action():
    eq = E.build_equivariant(flat=False, action=trivial_circle_action())
    tau, rep, probes = E.equivariant_tau(eq, n=30)
    assert max_residual(tau, 30, 0, 12) < 1e-14
    assert rep.passed
    assert probes["signs"]["tau orientation"] == "conjugate"


def test_tau_is_closed_for_flat_connection():
    eq = E.build_equivariant(flat=True)
    tau, rep, _ = E.equivariant_tau(eq, n=30)
    assert max_residual(F.exterior_derivative(tau, richardson=True), 30, 0, 13) < 1e-6
    assert rep.passed


def test_tau_conditions_twisted():
    eq = E.build_equivariant(flat=False)
    tau, rep, probes = E.equivariant_tau(eq, n=N)
    assert probes["tau orientation"]["value"] == S.TAU_ORIENTATION
    assert probes["tau (i)"].value == S.TAU_CURVATURE
    assert probes["tau (ii)"].value == S.TAU_SECTION
    assert rep.passed, rep.to_list()
    # the stated sign of condition (ii) fails; the report says so
    assert "literally written" in rep["tau condition (ii)"].note


def test_tau_orientations_differ_by_sign():
    eq = E.build_equivariant(flat=False)
    a = E.equivariant_tau_form(eq, "conjugate")
    b = E.equivariant_tau_form(eq, "inverse")
    assert max_residual(a + b, 30, 0, 14) < 1e-12
    with pytest.raises(ValueError):
        E.equivariant_tau_form(eq, "sideways")


def test_frozen_tau_signs_skip_probes():
    eq = E.build_equivariant(flat=False)
    frozen = {"tau orientation": S.TAU_ORIENTATION, "tau (i)": S.TAU_CURVATURE, "tau (ii)": S.TAU_SECTION}
    _, rep, probes = E.equivariant_tau(eq, n=20, signs=frozen)
    assert rep.passed
    assert set(probes) == {"signs"}


def test_triple_cocycle():
    eq = E.build_equivariant(flat=False)
    tau, _, _ = E.equivariant_tau(eq, n=20)
    rep = check_cocycle(E.triple_cocycle(eq, tau, S.TAU_IN_COCYCLE), "triple", "a", 30,
                        richardson=E.RICHARDSON)
    assert rep.passed, rep.to_list()
    wrong = check_cocycle(E.triple_cocycle(eq, tau, -S.TAU_IN_COCYCLE), "triple", "a", 30,
                          richardson=E.RICHARDSON)
    assert not wrong.passed


def test_report_accumulates():
    rep = ResidualReport()
    E.behrend_xu_check(E.build_u2_over_pu2(), n=10, report=rep)
    E.behrend_xu_check(E.build_u2_over_pu2(), n=10, report=rep)
    assert len(rep.entries) == 6
