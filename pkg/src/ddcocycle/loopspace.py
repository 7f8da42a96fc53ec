"""Discretized free loop groups and transgression.

A loop is held as a closed-form generator g0 * prod_k exp(f_k(t) B_k) with
trigonometric polynomials f_k, sampled on the uniform grid t_j = 2 pi j / N.
Values and t-derivatives at the nodes are exact, so the periodic trapezoid rule
for transgression converges spectrally.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forms as F
from . import signs as S
from .forms import DifferentialForm
from .matgroups import (
    GroupPoint,
    GroupSpec,
    TangentVector,
    adjoint_circle_action,
    expm,
    sample_point,
    split_rngs,
)
from .nerve import (
    DEFAULT_PROBES,
    NerveComplex,
    Residual,
    ResidualReport,
    SignProbe,
    check_identity,
    max_residual,
    probe_sign,
    stream_id,
)

DEFAULT_SAMPLES = 64
DEFAULT_BAND = 4
DEFAULT_TERMS = 3
TOL_LOOP_FD = 1e-5
TOL_LOOP_ALGEBRAIC = 1e-10


class GridMismatch(ValueError):
    pass


def grid(n: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n) / n


def _trig_basis(band: int, t: np.ndarray):
    """Rows 1, cos mt, sin mt (m = 1..band) and their t-derivatives."""
    m = np.arange(1, band + 1)[:, None]
    val = np.concatenate([np.ones((1, t.size)), np.cos(m * t), np.sin(m * t)])
    der = np.concatenate([np.zeros((1, t.size)), -m * np.sin(m * t), m * np.cos(m * t)])
    return val, der


def _shift_coefficients(coef: np.ndarray, c: float) -> np.ndarray:
    """Coefficients of f(t + c) given those of f(t)."""
    band = (coef.shape[-1] - 1) // 2
    m = np.arange(1, band + 1)
    a, b = coef[..., 1:band + 1], coef[..., band + 1:]
    cos, sin = np.cos(m * c), np.sin(m * c)
    return np.concatenate([coef[..., :1], a * cos + b * sin, b * cos - a * sin], axis=-1)


def _random_trig(rng: np.random.Generator, shape: tuple, band: int, scale: float) -> np.ndarray:
    m = np.arange(0, band + 1)
    decay = scale / (1.0 + m) ** 2
    a = rng.standard_normal(shape + (band + 1,)) * decay
    b = rng.standard_normal(shape + (band,)) * decay[1:]
    return np.concatenate([a, b], axis=-1)


@dataclass(frozen=True, eq=False)
class LoopPath:
    """gamma(t) = g0 prod_k exp(f_k(t) B_k), batched over leading axes.

    g0: (..., n, n); generators: (..., K, n, n); coef: (..., K, 2 band + 1).
    """

    g0: np.ndarray
    generators: np.ndarray
    coef: np.ndarray

    @property
    def band(self) -> int:
        return (self.coef.shape[-1] - 1) // 2

    def samples(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """gamma(t_j) and gamma'(t_j), shapes (..., N, n, n)."""
        val, der = _trig_basis(self.band, grid(n))
        f = self.coef @ val
        fd = self.coef @ der
        gens = self.generators[..., None, :, :]
        factors = [expm(f[..., k, :, None, None] * gens[..., k, :, :, :]) for k in range(f.shape[-2])]
        prefix = [np.broadcast_to(self.g0[..., None, :, :], factors[0].shape if factors else self.g0.shape)]
        for e in factors:
            prefix.append(prefix[-1] @ e)
        suffix = [np.eye(self.g0.shape[-1])]
        for e in reversed(factors):
            suffix.insert(0, e @ suffix[0])
        gamma = prefix[-1]
        vel = np.zeros_like(gamma)
        for k, e in enumerate(factors):
            vel = vel + prefix[k] @ (fd[..., k, :, None, None] * gens[..., k, :, :, :]) @ e @ suffix[k + 1]
        return gamma, vel

    def shifted(self, c: float) -> "LoopPath":
        """The reparametrized loop t -> gamma(t + c)."""
        return LoopPath(self.g0, self.generators, _shift_coefficients(self.coef, c))


@dataclass(frozen=True, eq=False)
class LoopTangent:
    """u(t) = gamma(t) A(t) with A(t) = sum_b c_b(t) E_b.

    basis: (dim, n, n) algebra basis; coef: (..., dim, 2 band + 1).
    """

    basis: np.ndarray
    coef: np.ndarray

    def samples(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """A(t_j) and A'(t_j)."""
        band = (self.coef.shape[-1] - 1) // 2
        val, der = _trig_basis(band, grid(n))
        c, cd = self.coef @ val, self.coef @ der
        a = np.einsum("...bj,bkl->...jkl", c, self.basis)
        ad = np.einsum("...bj,bkl->...jkl", cd, self.basis)
        return a.astype(complex), ad.astype(complex)

    def shifted(self, c: float) -> "LoopTangent":
        return LoopTangent(self.basis, _shift_coefficients(self.coef, c))


def loop_spec(base: GroupSpec, n: int = DEFAULT_SAMPLES) -> GroupSpec:
    """The loop version of a product of finite-dimensional factors."""
    return GroupSpec(tuple("L" + f for f in base.factors), n)


def loop_point(spec: GroupSpec, loops: list[LoopPath], others: dict | None = None) -> GroupPoint:
    """Sample loops into a GroupPoint; non-loop factors (from ``others``) get zero velocity."""
    others = others or {}
    mats, vel = [], []
    it = iter(loops)
    for i in range(len(spec)):
        if spec.is_loop(i):
            g, v = next(it).samples(spec.samples)
        else:
            g = np.asarray(others[i], dtype=complex)
            v = np.zeros_like(g)
        mats.append(g)
        vel.append(v)
    return GroupPoint(spec, tuple(mats), tuple(vel))


def loop_tangent_vector(at: GroupPoint, tangents: list, others: dict | None = None) -> TangentVector:
    """Loop tangents become gamma A with rates A'; other factors are g A with no rate."""
    others = others or {}
    mats, rates = [], []
    it = iter(tangents)
    for i, g in enumerate(at.mats):
        if at.spec.is_loop(i):
            a, ad = next(it).samples(at.spec.samples)
            rates.append(ad)
        else:
            a = others[i]
            rates.append(None)
        mats.append(g @ a)
    return TangentVector(at, tuple(mats), tuple(rates))


def random_loop(kind: str, rng: np.random.Generator, band: int = DEFAULT_BAND, terms: int = DEFAULT_TERMS,
                scale: float = 1.0) -> LoopPath:
    base = GroupSpec((kind,))
    g0 = sample_point(base, rng).mats[0]
    basis = np.array(base.basis(0))
    gens = np.einsum("kb,bij->kij", rng.standard_normal((terms, len(basis))) / np.sqrt(len(basis)), basis)
    return LoopPath(g0, gens, _random_trig(rng, (terms,), band, scale))


def random_loop_tangent(kind: str, rng: np.random.Generator, band: int = DEFAULT_BAND,
                        scale: float = 1.0) -> LoopTangent:
    basis = np.array(GroupSpec((kind,)).basis(0))
    return LoopTangent(basis, _random_trig(rng, (len(basis),), band, scale))


def stack_loops(paths: list) -> LoopPath | LoopTangent:
    if isinstance(paths[0], LoopPath):
        return LoopPath(*(np.stack([getattr(p, f) for p in paths]) for f in ("g0", "generators", "coef")))
    return LoopTangent(paths[0].basis, np.stack([p.coef for p in paths]))


def sample_loop_generators(spec: GroupSpec, degree: int, n: int, seed: int, stream: int,
                           band: int = DEFAULT_BAND, terms: int = DEFAULT_TERMS):
    """Batched generators: loops per loop factor, point matrices for other factors,
    and ``degree`` tangent generators (algebra elements for other factors)."""
    loops = {i: [] for i in range(len(spec)) if spec.is_loop(i)}
    others = {i: [] for i in range(len(spec)) if not spec.is_loop(i)}
    tans = [{i: [] for i in range(len(spec))} for _ in range(degree)]
    for rng in split_rngs(seed, stream, n):
        for i in range(len(spec)):
            kind = spec.base(i)
            if spec.is_loop(i):
                loops[i].append(random_loop(kind, rng, band, terms))
            else:
                others[i].append(sample_point(GroupSpec((kind,)), rng).mats[0])
        for k in range(degree):
            for i in range(len(spec)):
                kind = spec.base(i)
                if spec.is_loop(i):
                    tans[k][i].append(random_loop_tangent(kind, rng, band))
                else:
                    basis = GroupSpec((kind,)).basis(0)
                    tans[k][i].append(sum(c * b for c, b in zip(rng.standard_normal(len(basis)), basis)))
    loops = {i: stack_loops(v) for i, v in loops.items()}
    others = {i: np.stack(v) for i, v in others.items()}
    tan_gens = []
    for t in tans:
        tan_gens.append({i: (stack_loops(v) if spec.is_loop(i) else np.stack(v)) for i, v in t.items()})
    return loops, others, tan_gens


def realize(spec: GroupSpec, loops: dict, others: dict, tan_gens: list, shift: float = 0.0):
    """GroupPoint and tangents from generators, optionally reparametrized by t -> t + shift."""
    def sh(x):
        return x.shifted(shift) if shift else x

    p = loop_point(spec, [sh(loops[i]) for i in sorted(loops)], others)
    xs = []
    for t in tan_gens:
        loop_t = [sh(t[i]) for i in sorted(loops)]
        xs.append(loop_tangent_vector(p, loop_t, {i: t[i] for i in others}))
    return p, xs


def sample_loop_probes(spec: GroupSpec, degree: int, n: int, seed: int, stream: int,
                       band: int = DEFAULT_BAND, terms: int = DEFAULT_TERMS, shift: float = 0.0):
    """Random band-limited loops and loop tangents, one generator per probe."""
    return realize(spec, *sample_loop_generators(spec, degree, n, seed, stream, band, terms), shift=shift)


# ---------------------------------------------------------------------------
# transgression


def transgress(omega: DifferentialForm, n: int = DEFAULT_SAMPLES, sign: int = 1) -> DifferentialForm:
    """sign * sum_j (2 pi / N) omega(gamma(t_j); gamma'(t_j), u_1(t_j), ...)."""
    if omega.degree < 1:
        raise ValueError("transgression needs a form of degree >= 1")
    if omega.domain.has_loops:
        raise ValueError("transgress a form on the finite-dimensional group")
    spec = loop_spec(omega.domain, n)
    ev = omega.fn
    w = 2 * np.pi / n

    def fn(p, xs):
        if p.spec.samples != n or any(m.shape[-3] != n for m in p.mats):
            raise GridMismatch(f"form transgressed at N={n}, loop sampled differently")
        q = GroupPoint(omega.domain, p.mats)
        fiber = TangentVector(q, p.vel)
        rest = tuple(TangentVector(q, x.mats) for x in xs)
        return sign * w * np.sum(ev(q, (fiber,) + rest), axis=-1)

    return DifferentialForm(spec, omega.degree - 1, fn, f"T{omega.name}", omega.fd)


def transgression_sign_probe(n: int = 50, seed: int = 0, samples: int = DEFAULT_SAMPLES,
                             fd_step: float = F.DEFAULT_FD_STEP, tol: float = TOL_LOOP_FD,
                             band: int = DEFAULT_BAND) -> SignProbe:
    """d(T omega) = s T(d omega) on random 2-forms over SU(2)."""
    omega = F.random_form(GroupSpec(("SU2",)), 2, np.random.default_rng([seed, stream_id("transgression")]))
    lhs = F.exterior_derivative(transgress(omega, samples), fd_step, richardson=True)
    rhs = transgress(F.exterior_derivative(omega, fd_step, richardson=True), samples)

    def residual(s):
        return max_residual(lhs - s * rhs, n, seed, stream_id("transgression-probe"), band=band)

    return probe_sign("transgression vs exterior derivative", residual, tol)


LOOP_ANCHOR = "transgressed second Chern cocycle on the loop nerve"


def loop_nerve_cocycle_check(samples: int = DEFAULT_SAMPLES, n: int = DEFAULT_PROBES, seed: int = 0,
                             band: int = DEFAULT_BAND, fd_step: float = F.DEFAULT_FD_STEP,
                             tol_fd: float = TOL_LOOP_FD, tol_alg: float = TOL_LOOP_ALGEBRAIC,
                             sign: int | None = None, drop_c22: bool = False,
                             report: ResidualReport | None = None) -> tuple[ResidualReport, SignProbe | None]:
    """(i) d T C13 = 0, (ii) d' T C13 + s d T C22 = 0, (iii) d' T C22 = 0.

    ``drop_c22`` removes the C22 layer from (ii) as a negative control.
    """
    report = ResidualReport() if report is None else report
    kw = {"band": band}
    base = GroupSpec(("SU2",))
    cx = NerveComplex(loop_spec(base, samples))
    tc13 = transgress(F.trace_cubed_form(base), samples)
    tc22 = transgress(F.chern_c22("SU"), samples)
    if drop_c22:
        tc22 = tc22 * 0
    check_identity(report, "d T(C13) = 0", LOOP_ANCHOR, F.exterior_derivative(tc13, fd_step), tol_fd, n, seed, **kw)
    d1 = cx.d_horizontal(tc13, 1)
    d2 = F.exterior_derivative(tc22, fd_step)
    probe = None
    name = "loop cocycle d'/d relative sign"
    if sign is None and not drop_c22:
        probe = probe_sign(name, lambda s: max_residual(d1 + s * d2, n, seed, stream_id("loop-ii"), **kw), tol_fd)
        sign = probe.value
    elif sign is None:
        sign = S.LOOP_CHERN
    label = "d' T(C13) + s d T(C22) = 0" + (" [C22 dropped]" if drop_c22 else "")
    check_identity(report, label, LOOP_ANCHOR, d1 + sign * d2, tol_fd, n, seed, {name: sign}, **kw)
    if not drop_c22:
        check_identity(report, "d' T(C22) = 0", LOOP_ANCHOR, cx.d_horizontal(tc22, 2), tol_alg, n, seed, **kw)
    return report, probe


def naturality_check(samples: int = DEFAULT_SAMPLES, n: int = 50, seed: int = 0,
                     tol: float = TOL_LOOP_ALGEBRAIC) -> ResidualReport:
    """T(eps_i^* omega) = eps_i^* T(omega) for the pointwise face maps."""
    report = ResidualReport()
    base = GroupSpec(("SU2",))
    fin, loop = NerveComplex(base), NerveComplex(loop_spec(base, samples))
    worst = 0.0
    for omega, p in ((F.trace_cubed_form(base), 2), (F.chern_c22("SU"), 3)):
        lvl = p - 1
        for i in range(p + 1):
            lhs = transgress(F.pullback(fin.face(p, i), omega), samples)
            rhs = F.pullback(loop.face(p, i), transgress(omega, samples))
            worst = max(worst, max_residual(lhs - rhs, n, seed, stream_id(f"nat{lvl}{i}")))
    report.add(Residual("transgression commutes with face maps", "naturality of fiber integration", n, worst, tol))
    return report


def resolution_change(omega: DifferentialForm, n: int = 20, seed: int = 0, band: int = 8,
                      coarse: int = DEFAULT_SAMPLES) -> float:
    """max |T_N omega - T_2N omega| on shared band-limited generators."""
    spec = loop_spec(omega.domain, coarse)
    gens = sample_loop_generators(spec, omega.degree - 1, n, seed, stream_id("resolution"), band)
    values = []
    for m in (coarse, 2 * coarse):
        p, xs = realize(loop_spec(omega.domain, m), *gens)
        values.append(transgress(omega, m)(p, *xs))
    return float(np.max(np.abs(values[0] - values[1])))


def reparametrization_change(omega: DifferentialForm, shift: float, samples: int = DEFAULT_SAMPLES,
                             n: int = 20, seed: int = 0, band: int = DEFAULT_BAND) -> float:
    """max change of a transgressed form under t -> t + shift."""
    spec = loop_spec(omega.domain, samples)
    gens = sample_loop_generators(spec, omega.degree - 1, n, seed, stream_id("reparametrize"), band)
    tf = transgress(omega, samples)
    a = tf(*_flat(realize(spec, *gens)))
    b = tf(*_flat(realize(spec, *gens, shift=shift)))
    return float(np.max(np.abs(a - b)))


def _flat(pair):
    p, xs = pair
    return (p, *xs)


def semidirect_loop_faces(p: int, q: int, i: int, vertical: bool = False,
                          samples: int = DEFAULT_SAMPLES):
    """Face maps of LSU(2)^p x (S^1)^q with the circle conjugating sample-wise."""
    cx = NerveComplex(loop_spec(GroupSpec(("SU2",)), samples), adjoint_circle_action())
    return cx.vertical_face(p, q, i) if vertical else cx.face(p, i, q)


def semidirect_complex(samples: int = DEFAULT_SAMPLES) -> NerveComplex:
    return NerveComplex(loop_spec(GroupSpec(("SU2",)), samples), adjoint_circle_action())
