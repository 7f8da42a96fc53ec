import numpy as np
import pytest
from hypothesis import given, strategies as st

from ddcocycle import forms as F
from ddcocycle.matgroups import PAULI, GroupPoint, GroupSpec, adjoint_circle_action, from_left, identity
from ddcocycle.nerve import (
    NerveComplex,
    Residual,
    ResidualReport,
    SignProbeError,
    TotalCochain,
    check_cocycle,
    check_simplicial_identities,
    chern_cocycle_residual,
    d_vertical_sign,
    max_residual,
    probe_sign,
    sample_probes,
    second_chern_cocycle,
    total_differential_squared,
)

SU2 = GroupSpec(("SU2",))
PU2 = GroupSpec(("PU2",))
ISIG = [1j * s for s in PAULI]


@pytest.fixture(scope="module")
def cx():
    return NerveComplex(SU2)


@pytest.fixture(scope="module")
def triple():
    return NerveComplex(PU2, adjoint_circle_action())


def test_levels(cx, triple):
    assert cx.space(0) == GroupSpec(())
    assert cx.space(3) == GroupSpec(("SU2",) * 3)
    assert triple.space(2, 1) == GroupSpec(("PU2", "PU2", "U1"))
    with pytest.raises(ValueError):
        cx.space(1, 1)


def test_middle_face_multiplies(cx):
    p, xs = sample_probes(cx.space(2), 1, 10, 0, 1)
    e1 = cx.face(2, 1)
    assert np.allclose(e1(p).mats[0], p.mats[0] @ p.mats[1])
    q = identity(cx.space(2))
    x = from_left(q, (ISIG[0], ISIG[2]))
    assert np.allclose(e1.push(x).mats[0], ISIG[0] + ISIG[2])


def test_outer_faces_delete(cx):
    p, _ = sample_probes(cx.space(3), 0, 5, 0, 2)
    assert np.array_equal(cx.face(3, 0)(p).mats[0], p.mats[1])
    assert np.array_equal(cx.face(3, 3)(p).mats[1], p.mats[1])
    with pytest.raises(IndexError):
        cx.face(2, 3)


def test_simplicial_identities_exact(cx):
    rep = check_simplicial_identities(cx, 3, 0, 100, 0, 1e-12)
    assert rep.passed, rep.to_list()


def test_bisimplicial_identities_exact(triple):
    rep = check_simplicial_identities(triple, 3, 3, 100, 0, 1e-12)
    assert len(rep.entries) == 3
    assert rep.passed, rep.to_list()


def test_conjugation_face(triple):
    p, _ = sample_probes(triple.space(1, 1), 0, 5, 0, 3)
    g, z = p.mats
    out = triple.vertical_face(1, 1, 1)(p)
    zz = z[:, 0, 0]
    e = np.zeros_like(g)
    e[:, 0, 0], e[:, 1, 1] = zz, 1 / zz
    assert out.spec == PU2
    assert np.max(np.abs(out.mats[0] - e @ g @ np.linalg.inv(e))) < 1e-14
    assert np.array_equal(triple.vertical_face(1, 1, 0)(p).mats[0], g)


def test_degeneracy_then_face_is_identity(cx):
    p, _ = sample_probes(cx.space(2), 0, 5, 0, 4)
    for i in range(3):
        s = cx.degeneracy(2, i)
        for j in (i, i + 1):
            back = cx.face(3, j)(s(p))
            assert all(np.allclose(a, b) for a, b in zip(back.mats, p.mats))


def test_d_horizontal_of_constant(cx):
    c = F.function_form(cx.space(1), lambda p: np.full(p.batch_shape, 2.5 + 0j), "c")
    d = cx.d_horizontal(c, 1)
    p, _ = sample_probes(cx.space(2), 0, 5, 0, 5)
    assert np.allclose(d(p), 2.5)


@pytest.mark.parametrize("p,r", [(1, 0), (1, 2), (2, 1)])
def test_d_horizontal_squared(cx, p, r):
    omega = F.random_form(cx.space(p), r, np.random.default_rng(p * 10 + r))
    dd = cx.d_horizontal(cx.d_horizontal(omega, p), p + 1)
    assert max_residual(dd, 50, 0, 6) < 1e-12


def test_d_circle_squared(triple):
    omega = F.random_form(triple.space(1, 0), 1, np.random.default_rng(1))
    dd = triple.d_circle(triple.d_circle(omega, 1, 0), 1, 1)
    assert max_residual(dd, 50, 0, 7) < 1e-12


def test_d_prime_c22_vanishes(cx):
    d = cx.d_horizontal(F.chern_c22("SU"), 2)
    assert max_residual(d, 200, 0, 8) < 1e-10


def test_vertical_sign():
    assert d_vertical_sign(0) == 1 and d_vertical_sign(2) == 1
    assert d_vertical_sign(1) == -1 and d_vertical_sign(3) == -1
    assert d_vertical_sign(1, 1) == 1


def test_vertical_differential_squared(cx):
    omega = F.random_form(cx.space(1), 1, np.random.default_rng(2))
    once = cx.d_vertical_form(omega, 1, richardson=True)
    twice = cx.d_vertical_form(once, 1, richardson=True)
    assert max_residual(twice, 50, 0, 9) < 1e-6


def test_vertical_differential_of_c13(cx):
    d = cx.d_vertical_form(F.trace_cubed_form(), 1)
    assert max_residual(d, 200, 0, 10) < 1e-6


def test_zero_cochain_has_zero_differential(cx):
    zero = TotalCochain(cx, {(1, 1): F.zero_form(cx.space(1), 1)})
    rep = check_cocycle(zero, "zero", "zero", 20)
    assert all(e.max_residual == 0 for e in rep.entries)


def test_second_chern_cocycle_passes():
    rep = check_cocycle(second_chern_cocycle("SU"), "c2", "anchor", 50)
    assert rep.passed, rep.to_list()
    assert [e.identity for e in rep.entries] == ["c2[1,4]", "c2[2,3]", "c2[3,2]"]


def test_second_chern_with_perturbation_fails(cx):
    good = second_chern_cocycle("SU")
    bad = F.random_form(cx.space(2), 2, np.random.default_rng(3)) * 0.1
    broken = TotalCochain(cx, {(1, 3): good.layers[(1, 0, 3)], (2, 2): good.layers[(2, 0, 2)] + bad})
    rep = check_cocycle(broken, "broken", "anchor", 50)
    assert rep["broken[2,3]"].max_residual > 1e-3


def test_chern_sign():
    assert chern_cocycle_residual("SU", 1, 50, 0) < 1e-6
    assert chern_cocycle_residual("SU", -1, 50, 0) > 1e-2


def test_total_differential_squared_double(cx):
    comps = total_differential_squared(cx, (1, 1), n=30)
    assert max(comps.values()) < 1e-6


def test_total_differential_squared_triple(triple):
    comps = total_differential_squared(triple, (1, 0, 1), n=30)
    assert max(comps.values()) < 1e-6


def test_cochain_validation(cx):
    c13 = F.trace_cubed_form()
    with pytest.raises(ValueError):
        TotalCochain(cx, {(1, 2): c13})
    with pytest.raises(ValueError):
        TotalCochain(cx, {(1, 3): c13, (2, 1): F.zero_form(cx.space(2), 1)})
    with pytest.raises(ValueError):
        TotalCochain(cx, {(1, 0, 3): c13})
    c = TotalCochain(cx, {(1, 3): c13})
    with pytest.raises(ValueError):
        c.add((1, 3), c13)
    assert c.degree == 4


@given(st.floats(1e-9, 1e-3), st.floats(1e-2, 10.0))
def test_probe_sign_picks_the_small_residual(small, large):
    assert probe_sign("s", lambda s: small if s == -1 else large, 1e-2).value == -1
    assert probe_sign("s", lambda s: small if s == 1 else large, 1e-2).value == 1


def test_probe_sign_inconclusive():
    with pytest.raises(SignProbeError):
        probe_sign("s", lambda s: 1.0, 1e-3)
    with pytest.raises(SignProbeError):
        probe_sign("s", lambda s: 0.0, 1e-3)


def test_report_rows_carry_anchor():
    rep = ResidualReport()
    rep.add(Residual("id", "an anchor", 3, 1e-12, 1e-10, {"s": 1}))
    rep.add(Residual("bad", "other", 3, float("nan"), 1e-10))
    rows = rep.to_list()
    assert rows[0]["anchor"] == "an anchor" and rows[0]["pass"]
    assert not rows[1]["pass"] and not rep.passed
    assert set(rows[0]) >= {"identity", "anchor", "probes", "max_residual", "tolerance", "signs", "pass"}


def test_probes_are_reproducible():
    a, xa = sample_probes(GroupSpec(("SU2", "U1")), 2, 7, 3, 99)
    b, xb = sample_probes(GroupSpec(("SU2", "U1")), 2, 7, 3, 99)
    assert all(np.array_equal(x, y) for x, y in zip(a.mats, b.mats))
    assert all(np.array_equal(x, y) for x, y in zip(xa[1].mats, xb[1].mats))
    assert isinstance(a, GroupPoint)
