"""The verification suites run by the command line driver."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import extension as E
from . import forms as F
from . import loopspace as L
from . import quadrature as Q
from . import signs as S
from .matgroups import GroupSpec, adjoint_circle_action, trivial_circle_action
from .nerve import (
    CHERN_ANCHOR,
    NerveComplex,
    Residual,
    ResidualReport,
    SignProbe,
    SignProbeError,
    TOL_ALGEBRAIC,
    TOL_FD,
    TotalCochain,
    check_cocycle,
    check_simplicial_identities,
    chern_cocycle_residual,
    max_residual,
    second_chern_cocycle,
    stream_id,
    total_differential_squared,
)


# Sign probes decide between two candidate signs; they keep their own
# tolerances so that tightening the identity tolerances reports failures
# instead of making every probe inconclusive.
PROBE_TOL = TOL_FD
PROBE_TOL_LOOP = L.TOL_LOOP_FD


@dataclass
class SuiteConfig:
    seed: int = 0
    samples: int = 200
    fd_step: float = F.DEFAULT_FD_STEP
    tol_algebraic: float = 1e-10
    tol_fd: float = 1e-6
    tol_quad: float = 1e-3
    tol_loop_fd: float = L.TOL_LOOP_FD
    loop_samples: int = L.DEFAULT_SAMPLES
    band_limit: int = L.DEFAULT_BAND
    su2_grid: int = 24
    sheet_grid: int = 32
    suites: tuple = ()
    report: str = "json"
    out: str | None = None
    timing: bool = False

    def validate(self):
        for name in ("tol_algebraic", "tol_fd", "tol_quad", "tol_loop_fd", "fd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("samples", "loop_samples", "band_limit", "su2_grid", "sheet_grid"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.report not in ("json", "md"):
            raise ValueError("report must be json or md")
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise ValueError(f"unknown suite(s): {', '.join(unknown)}")


@dataclass
class SuiteResult:
    name: str
    report: ResidualReport = field(default_factory=ResidualReport)
    signs: dict = field(default_factory=dict)
    controls: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.report.passed and all(c["rejected"] for c in self.controls)

    def sign(self, probe: SignProbe | str, evidence=None):
        """Record a frozen sign with fresh probe evidence."""
        name = probe if isinstance(probe, str) else probe.name
        if isinstance(probe, SignProbe):
            evidence = probe.evidence()
        self.signs[name] = {"frozen": S.FROZEN[name], "provenance": S.PROVENANCE[name], "probe": evidence}

    def control(self, identity: str, anchor: str, residual: float, tol: float):
        """A deliberately broken identity; it passes when the residual exceeds tolerance."""
        self.controls.append({"identity": identity, "anchor": anchor, "max_residual": float(f"{residual:.6e}"),
                              "tolerance": tol, "rejected": bool(residual > tol)})


def _replay(probe: SignProbe):
    """Residual function answering from an already computed probe."""
    return lambda s: probe.residual_plus if s == 1 else probe.residual_minus


# ---------------------------------------------------------------------------


def _chern(cfg: SuiteConfig, variant: str) -> SuiteResult:
    res = SuiteResult(f"{variant.lower()}2-cocycle")
    name = "chern d'/d'' relative sign"
    probe = S.reprobe(name, lambda s: chern_cocycle_residual(variant, s, cfg.samples, cfg.seed, cfg.fd_step),
                      PROBE_TOL)
    res.sign(probe)
    label = "SU(2)" if variant == "SU" else "U(2)"
    rep = check_cocycle(second_chern_cocycle(variant, S.CHERN), f"{label} second Chern cocycle", CHERN_ANCHOR,
                        cfg.samples, cfg.seed, cfg.tol_algebraic, cfg.tol_fd, cfg.fd_step, {name: S.CHERN})
    res.report.extend(rep)
    good = second_chern_cocycle(variant, S.CHERN)
    c13, c22 = good.layers[(1, 0, 3)], good.layers[(2, 0, 2)]
    rng = np.random.default_rng([cfg.seed, stream_id("chern-control")])
    bad = F.random_form(c22.domain, 2, rng) * 0.1
    broken = check_cocycle(TotalCochain(good.complex, {(1, 3): c13, (2, 2): c22 + bad}), "control",
                           CHERN_ANCHOR, min(cfg.samples, 50), cfg.seed, cfg.tol_algebraic, cfg.tol_fd,
                           cfg.fd_step)
    worst = max(e.max_residual for e in broken.entries if e.identity.endswith("[2,3]"))
    res.control(f"{label} cocycle with a non-closed perturbation of C22", CHERN_ANCHOR, worst, cfg.tol_fd)
    return res


def suite_su2(cfg):
    return _chern(cfg, "SU")


def suite_u2(cfg):
    return _chern(cfg, "U")


def suite_extension(cfg: SuiteConfig) -> SuiteResult:
    res = SuiteResult("extension")
    n, seed = cfg.samples, cfg.seed
    flat = E.build_u2_over_pu2(flat=True)
    tw = E.build_u2_over_pu2(flat=False)
    for ext, label in ((flat, "flat"), (tw, "twisted")):
        E.curvature_section_identities(ext, res.report, n, seed, cfg.tol_fd, cfg.tol_algebraic, cfg.fd_step, f" [{label}]")
        rep = check_cocycle(E.dd_cocycle(ext, cfg.fd_step), f"Dixmier-Douady cocycle [{label}]",
                            "total cocycle of the central extension", n, seed, cfg.tol_algebraic, cfg.tol_fd,
                            cfg.fd_step, richardson=E.RICHARDSON)
        res.report.extend(rep)
        res.report.add(Residual(f"delta s_nt = 1 [{label}]", "alternating tensor of the natural section", n,
                                E.delta_section_discrepancy(ext, n, seed), 1e-12))
        for what, value in E.lift_independence(ext, min(n, 100), seed, cfg.fd_step).items():
            res.report.add(Residual(f"lift independence: {what} [{label}]", "forms defined through lifts",
                                    min(n, 100), value, 1e-9))
    flat_c1 = E.curvature_on_base(flat, cfg.fd_step)
    res.report.add(Residual("flat connection has zero curvature", "curvature of the flat model", n,
                            max_residual(flat_c1, n, seed, stream_id("flat-c1")), 1e-8))

    twist = E.default_twist_function()
    _, probe = E.twist_section_check(tw, twist, n, seed, PROBE_TOL, cfg.fd_step, report=ResidualReport())
    S.reprobe("section change coboundary sign", _replay(probe), PROBE_TOL)
    res.sign("section change coboundary sign", probe.evidence())
    E.twist_section_check(tw, twist, n, seed, cfg.tol_fd, cfg.fd_step, sign=S.SECTION_CHANGE, report=res.report)

    _, probe = E.connection_independence_check(flat, tw, n=n, seed=seed, tol=PROBE_TOL, fd_step=cfg.fd_step,
                                               report=ResidualReport())
    S.reprobe("connection change coboundary sign", _replay(probe), PROBE_TOL)
    res.sign("connection change coboundary sign", probe.evidence())
    E.connection_independence_check(flat, tw, n=n, seed=seed, tol=cfg.tol_fd, fd_step=cfg.fd_step,
                                    sign=S.CONNECTION_CHANGE, report=res.report)
    control, _ = E.connection_independence_check(flat, tw, n=min(n, 50), seed=seed, tol=cfg.tol_fd,
                                                 fd_step=cfg.fd_step, sign=S.CONNECTION_CHANGE, delta_scale=2.0)
    res.control("connection change with the delta(alpha) layer doubled", "independence of the connection",
                max(e.max_residual for e in control.entries), cfg.tol_fd)
    return res


def suite_behrend_xu(cfg: SuiteConfig) -> SuiteResult:
    res = SuiteResult("behrend-xu")
    for flat, label in ((True, "flat"), (False, "twisted")):
        rep = E.behrend_xu_check(E.build_u2_over_pu2(flat=flat), cfg.samples, cfg.seed, 1e-9)
        for e in rep.entries:
            e.identity += f" [{label}]"
        res.report.extend(rep)
    return res


def suite_transgression(cfg: SuiteConfig) -> SuiteResult:
    res = SuiteResult("transgression")
    n, seed, N, band = cfg.samples, cfg.seed, cfg.loop_samples, cfg.band_limit
    probe = L.transgression_sign_probe(min(n, 50), seed, N, cfg.fd_step, PROBE_TOL_LOOP, band)
    S.reprobe(probe.name, _replay(probe), PROBE_TOL_LOOP)
    res.sign(probe)
    _, probe = L.loop_nerve_cocycle_check(N, n, seed, band, cfg.fd_step, PROBE_TOL_LOOP, report=ResidualReport())
    S.reprobe(probe.name, _replay(probe), PROBE_TOL_LOOP)
    res.sign(probe)
    L.loop_nerve_cocycle_check(N, n, seed, band, cfg.fd_step, cfg.tol_loop_fd, cfg.tol_algebraic,
                               sign=S.LOOP_CHERN, report=res.report)
    control, _ = L.loop_nerve_cocycle_check(N, min(n, 50), seed, band, cfg.fd_step, drop_c22=True)
    res.control("loop cocycle with the C22 layer dropped", L.LOOP_ANCHOR,
                control.entries[1].max_residual, cfg.tol_loop_fd)
    res.report.extend(L.naturality_check(N, min(n, 50), seed, cfg.tol_algebraic))
    c13 = F.trace_cubed_form()
    for omega, label in ((c13, "C13"), (F.chern_c22("SU"), "C22")):
        res.report.add(Residual(f"transgression of {label} stable under N -> 2N", "spectral trapezoid rule",
                                20, L.resolution_change(omega, 20, seed, 8, N), 1e-10))
    for shift, label in ((2 * np.pi * 5 / N, "grid shift"), (0.37, "generic shift")):
        res.report.add(Residual(f"reparametrization t -> t + c ({label})", "rotation of the loop parameter",
                                20, L.reparametrization_change(c13, shift, N, 20, seed, band), 1e-10))
    return res


def suite_triple(cfg: SuiteConfig) -> SuiteResult:
    res = SuiteResult("triple-complex")
    n, seed = cfg.samples, cfg.seed
    base = GroupSpec(("PU2",))
    for cx, label in ((NerveComplex(base, adjoint_circle_action()), "PU(2) x S^1"),
                      (L.semidirect_complex(cfg.loop_samples), "LSU(2) x S^1")):
        rep = check_simplicial_identities(cx, 3, 3, 100 if "PU" in label else 20, seed, 1e-12)
        for e in rep.entries:
            e.identity += f" [{label}]"
        res.report.extend(rep)
    cx = NerveComplex(base, adjoint_circle_action())
    for index in ((1, 0, 1), (1, 1, 0), (2, 0, 1)):
        comps = total_differential_squared(cx, index, min(n, 100), seed, cfg.fd_step)
        res.report.add(Residual(f"D^2 = 0 on a random layer at {index}", "total differential of the triple complex",
                                min(n, 100), max(comps.values()), cfg.tol_fd))

    eq = E.build_equivariant(flat=False)
    tau, rep, probes = E.equivariant_tau(eq, n, seed, cfg.tol_fd, cfg.fd_step, probe_tol=PROBE_TOL)
    probed = probes["tau orientation"]
    if isinstance(probed, dict) and probed["value"] != S.TAU_ORIENTATION:
        raise SignProbeError(f"tau orientation probed as {probes['tau orientation']}")
    res.sign("tau orientation", probes["tau orientation"])
    for key in ("tau (i)", "tau (ii)"):
        S.reprobe(key, _replay(probes[key]), PROBE_TOL)
        res.sign(probes[key])
    res.report.extend(rep)

    def worst_ratio(k):
        """Largest residual/tolerance over the components of D."""
        r = check_cocycle(E.triple_cocycle(eq, tau, k, cfg.fd_step), "probe", "", min(n, 50), seed,
                          TOL_ALGEBRAIC, PROBE_TOL, cfg.fd_step, richardson=E.RICHARDSON)
        return max(e.max_residual / e.tolerance for e in r.entries)

    res.sign(S.reprobe("tau coefficient in triple cocycle", worst_ratio, 1.0))
    rep = check_cocycle(E.triple_cocycle(eq, tau, S.TAU_IN_COCYCLE, cfg.fd_step), "triple-complex cocycle",
                        "Dixmier-Douady cocycle on the circle-equivariant nerve", n, seed, cfg.tol_algebraic,
                        cfg.tol_fd, cfg.fd_step, {"tau coefficient in triple cocycle": S.TAU_IN_COCYCLE},
                        richardson=E.RICHARDSON)
    res.report.extend(rep)
    for flat, action, label in ((True, None, "flat"), (False, trivial_circle_action(), "trivial action")):
        model = E.build_equivariant(flat=flat, action=action)
        t, _, _ = E.equivariant_tau(model, min(n, 50), seed, cfg.tol_fd, cfg.fd_step, probe_tol=PROBE_TOL)
        res.report.add(Residual(f"tau vanishes [{label}]", "tau for a flat connection or trivial action",
                                min(n, 50), max_residual(t, min(n, 50), seed, stream_id("tau-zero")), 1e-12))
    return res


def suite_integrality(cfg: SuiteConfig) -> SuiteResult:
    res = SuiteResult("integrality")
    tol = cfg.tol_quad
    c13 = F.trace_cubed_form()
    m = cfg.su2_grid
    nodes = (2 * m) ** 3
    anchor = "integrality of the generator of H^3(SU(2))"
    values = {}
    for kind in ("euler", "hyperspherical"):
        values[kind] = Q.integrate_top_form_su2(c13, Q.ChartGrid(kind, (m, m, m)), tol / 10)
        res.report.add(Residual(f"| |int C13| - 1 | [{kind}]", anchor, nodes, abs(abs(values[kind]) - 1), tol))
    res.report.add(Residual("two parametrizations agree", anchor, nodes,
                            abs(values["euler"] - values["hyperspherical"]), 1e-4))
    res.report.add(Residual("orientation: int C13 over the Euler chart is +1", anchor, nodes,
                            abs(values["euler"] - 1), tol,
                            note="sign is a convention of the chart; reported, not asserted by the criteria"))
    h = Q.hyperspherical_chart(np.array([0.7]), np.array([1.3]), np.array([2.1])).value[0]
    moved = Q.integrate_top_form_su2(c13, Q.ChartGrid("euler", (m, m, m)), tol / 10, left=h)
    res.report.add(Residual("left translation invariance", anchor, nodes, abs(moved - values["euler"]), tol))
    exact = Q.integrate_top_form_su2(Q.exact_form_control(cfg.seed, cfg.fd_step),
                                     Q.ChartGrid("euler", (m, m, m)), tol / 10)
    res.report.add(Residual("exact 3-form integrates to 0", "Stokes on a closed manifold", nodes, abs(exact), tol))

    grid = Q.SheetGrid(cfg.sheet_grid, 3 * cfg.sheet_grid // 2)
    sheet_nodes = (2 * grid.interval_nodes) ** 2 * 2 * grid.circle_nodes
    wrap_alone = Q.integrate_form_over_cylinder(Q.wrap_sheet(), c13, grid, tol / 10)
    res.report.add(Residual("wrap factor has degree one", "degree of the wrap", sheet_nodes,
                            abs(abs(wrap_alone) - 1), 1e-2))
    hom = Q.default_homotopies(cfg.seed)
    anchor_h = "homotopy invariance of the holonomy integral"
    for key, expected in (("bump", 0), ("wrap", None)):
        r = Q.homotopy_integrality_check(hom["base"], hom[key], c13, grid, tol / 10)
        res.report.add(Residual(f"integral difference is an integer [{key}]", anchor_h, sheet_nodes,
                                r.distance, 1e-2, note=f"integer {r.integer}"))
        ok = (r.integer == 0) if expected == 0 else (abs(r.integer) == 1)
        res.report.add(Residual(f"integer is {'0' if expected == 0 else '+-1'} [{key}]", anchor_h, sheet_nodes,
                                0.0 if ok else float(abs(r.integer - (expected or np.sign(r.integer) or 1))),
                                0.5))
    return res


SUITES = {
    "su2-cocycle": suite_su2,
    "u2-cocycle": suite_u2,
    "extension": suite_extension,
    "behrend-xu": suite_behrend_xu,
    "transgression": suite_transgression,
    "triple-complex": suite_triple,
    "integrality": suite_integrality,
}
