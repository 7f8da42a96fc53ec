"""Acceptance criteria 1-9, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL ...`` line; the lines are
repeated in the pytest terminal summary.  Run with ``pytest -s`` to see them
inline as well.
"""
import json
import time

import pytest

from conftest import ACCEPTANCE_LINES
from ddcocycle import cli
from ddcocycle import signs as S
from ddcocycle.suites import SUITES, SuiteConfig


def report_line(k: int, ok: bool, detail: str):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def timings():
    return {}


@pytest.fixture(scope="module")
def run(timings):
    cache = {}

    def get(name):
        if name not in cache:
            start = time.perf_counter()
            cache[name] = SUITES[name](SuiteConfig())
            timings[name] = time.perf_counter() - start
        return cache[name]

    return get


def rows(result, *fragments):
    found = [e for e in result.report.entries if all(f in e.identity for f in fragments)]
    assert found, f"no rows matching {fragments} in {result.name}"
    return found


def worst(entries):
    return max(e.max_residual for e in entries)


def under(entries, tol, min_probes=1):
    return all(e.max_residual < tol and e.tolerance <= tol and e.probes >= min_probes for e in entries)


def _chern_criterion(k, result, label, seconds=None):
    closed = rows(result, "cocycle[1,4]")
    mixed = rows(result, "cocycle[2,3]")
    top = rows(result, "cocycle[3,2]")
    sign = result.signs["chern d'/d'' relative sign"]
    ok = (under(closed, 1e-6, 200) and under(mixed, 1e-6, 200) and under(top, 1e-10, 200)
          and sign["probe"]["value"] == S.CHERN and result.passed)
    detail = (f"{label}: dC13 {worst(closed):.1e}, d'C13+d''C22 {worst(mixed):.1e} (sign {sign['frozen']:+d}), "
              f"d'C22 {worst(top):.1e}")
    if seconds is not None:
        ok = ok and seconds < 60
        detail += f", {seconds:.1f} s"
    return report_line(k, ok, detail)


def test_criterion_1_su2_second_chern(run, timings):
    result = run("su2-cocycle")
    assert _chern_criterion(1, result, "SU(2), 200 probes", timings["su2-cocycle"])


def test_criterion_2_u2_second_chern(run):
    assert _chern_criterion(2, run("u2-cocycle"), "U(2) with tr.tr correction, 200 probes")


def test_criterion_3_integrality(run):
    result = run("integrality")
    units = rows(result, "|int C13|")
    agree = rows(result, "two parametrizations agree")
    exact = rows(result, "exact 3-form")
    ok = (under(units, 1e-3, 48**3) and under(agree, 1e-4) and under(exact, 1e-3))
    assert report_line(3, ok, f"||int C13|-1| {worst(units):.1e}, charts agree {worst(agree):.1e}, "
                              f"exact control {worst(exact):.1e}")


def test_criterion_4_homotopy_well_defined(run):
    result = run("integrality")
    dist = {k: rows(result, f"integral difference is an integer [{k}]")[0] for k in ("bump", "wrap")}
    ints = {k: rows(result, "integer is", f"[{k}]")[0] for k in ("bump", "wrap")}
    ok = all(d.max_residual < 1e-2 for d in dist.values()) and all(i.passed for i in ints.values())
    assert report_line(4, ok, f"bump: {dist['bump'].note}, distance {dist['bump'].max_residual:.1e}; "
                              f"wrap: {dist['wrap'].note}, distance {dist['wrap'].max_residual:.1e}")


def test_criterion_5_extension(run):
    result = run("extension")
    fd = rows(result, "d' c1 = ")
    alg = rows(result, "d' s*(delta theta) = 0")
    trivial = rows(result, "delta s_nt = 1")
    lifts = rows(result, "lift independence")
    twist = rows(result, "dlog phi")
    cob = rows(result, "is a coboundary")
    controls = result.controls
    ok = (under(fd, 1e-6) and under(alg, 1e-10) and under(trivial, 1e-12) and under(lifts, 1e-9)
          and under(twist, 1e-6) and under(cob, 1e-6) and controls and all(c["rejected"] for c in controls)
          and result.passed)
    assert report_line(5, ok, f"flat+twisted: curvature identity {worst(fd):.1e}, section identity "
                              f"{worst(alg):.1e}, delta s_nt {worst(trivial):.1e}, lifts {worst(lifts):.1e}, "
                              f"section twist {worst(twist):.1e}, coboundaries {worst(cob):.1e}, "
                              f"control {controls[0]['max_residual']:.2g} rejected")


def test_criterion_6_behrend_xu(run):
    result = run("behrend-xu")
    direct = rows(result, "(pi x pi)*")
    horizontal = rows(result, "is horizontal")
    ok = under(direct, 1e-9, 200) and under(horizontal, 1e-9, 200) and result.passed
    assert report_line(6, ok, f"direct vs lifted {worst(direct):.1e}, horizontality {worst(horizontal):.1e}, "
                              f"{direct[0].probes} probes")


def test_criterion_7_transgression(run):
    result = run("transgression")
    cfg = SuiteConfig()
    i, ii, iii = rows(result, "d T(C13) = 0"), rows(result, "d' T(C13) + s"), rows(result, "d' T(C22) = 0")
    controls = result.controls
    ok = (cfg.loop_samples == 64 and cfg.band_limit <= 4 and under(i, 1e-5) and under(ii, 1e-5)
          and under(iii, 1e-10) and controls and all(c["rejected"] for c in controls))
    assert report_line(7, ok, f"N=64, band 4: (i) {worst(i):.1e}, (ii) {worst(ii):.1e}, (iii) {worst(iii):.1e}, "
                              f"control {controls[0]['max_residual']:.2g} rejected")


def test_criterion_8_triple_complex(run):
    result = run("triple-complex")
    simplicial = rows(result, "simplicial identities") + rows(result, "face commutation")
    dsq = rows(result, "D^2 = 0")
    tau_i, tau_ii, tau_iii = (rows(result, f"tau condition ({k})")[0] for k in ("i", "ii", "iii"))
    ok = (under(simplicial, 1e-12) and under(dsq, 1e-6) and tau_i.passed and tau_iii.passed
          and tau_i.tolerance <= 1e-6 and tau_iii.tolerance <= 1e-6)
    finding = f"(ii) {tau_ii.max_residual:.1e} with sign {tau_ii.signs['tau (ii)']:+d}"
    if tau_ii.note:
        finding += f" [{tau_ii.note}]"
    assert report_line(8, ok, f"simplicial {worst(simplicial):.1e}, D^2 {worst(dsq):.1e}, "
                              f"tau (i) {tau_i.max_residual:.1e}, (iii) {tau_iii.max_residual:.1e}, {finding}")


def test_criterion_9_determinism_and_reporting(run, tmp_path):
    fast = ["--suite", "su2-cocycle", "--suite", "extension", "--suite", "behrend-xu"]
    outs = []
    for name in ("a.json", "b.json"):
        path = tmp_path / name
        code = cli.main([*fast, "--out", str(path)])
        outs.append((code, path.read_bytes()))
    identical = outs[0][1] == outs[1][1]
    codes = {
        "pass": outs[0][0] == cli.EXIT_PASS,
        "fail": cli.main(["--suite", "su2-cocycle", "--tol-fd", "1e-15", "--out", str(tmp_path / "f.json")])
        == cli.EXIT_FAIL,
        "config": cli.main(["--samples", "0"]) == cli.EXIT_CONFIG,
    }
    saved = S.FROZEN["chern d'/d'' relative sign"]
    S.FROZEN["chern d'/d'' relative sign"] = -saved
    try:
        codes["sign"] = cli.main(["--suite", "su2-cocycle", "--out", str(tmp_path / "s.json")]) == cli.EXIT_SIGN
    finally:
        S.FROZEN["chern d'/d'' relative sign"] = saved
    report = json.loads(outs[0][1])
    anchored = all(r["anchor"] for s in report["suites"] for r in s["entries"] + s["controls"])
    anchored = anchored and all(e.anchor for name in SUITES for e in run(name).report.entries)
    ok = identical and all(codes.values()) and anchored
    assert report_line(9, ok, f"byte-identical {identical}, exit codes "
                              f"{', '.join(f'{k}={v}' for k, v in codes.items())}, every row anchored {anchored}")
