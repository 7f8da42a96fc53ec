"""Nerve combinatorics and the cocycle checker.

A :class:`NerveComplex` over a one-factor group spec G gives the spaces
G^p (double complex) or G^p x (S^1)^q (triple complex, with a circle action on
G), their face maps with exact differentials, and the differentials

    d'   = sum_i (-1)^i eps_i^*                      (horizontal, p -> p+1)
    d''  = (-1)^p sum_i (-1)^i (eps_i^{S^1})^*       (circle, q -> q+1)
    d''' = (-1)^(p+q) d                              (de Rham, r -> r+1)

In the double complex the de Rham differential carries (-1)^p.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import forms as F
from .forms import DifferentialForm, SmoothMap
from .matgroups import (
    CircleAction,
    GroupSpec,
    sample_point,
    sample_tangent,
    split_rngs,
    stack_points,
    stack_tangents,
)

TOL_ALGEBRAIC = 1e-10
TOL_FD = 1e-6
DEFAULT_PROBES = 200


class SignProbeError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# reports


@dataclass
class Residual:
    identity: str
    anchor: str
    probes: int
    max_residual: float
    tolerance: float
    signs: dict = field(default_factory=dict)
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_residual) and self.max_residual < self.tolerance)

    def to_dict(self) -> dict:
        return {
            "identity": self.identity,
            "anchor": self.anchor,
            "probes": self.probes,
            "max_residual": float(f"{self.max_residual:.6e}"),
            "tolerance": self.tolerance,
            "signs": dict(sorted(self.signs.items())),
            "pass": self.passed,
            **({"note": self.note} if self.note else {}),
        }


@dataclass
class ResidualReport:
    entries: list[Residual] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def add(self, entry: Residual) -> Residual:
        self.entries.append(entry)
        return entry

    def extend(self, other: "ResidualReport") -> "ResidualReport":
        self.entries.extend(other.entries)
        return self

    def __getitem__(self, identity: str) -> Residual:
        for e in self.entries:
            if e.identity == identity:
                return e
        raise KeyError(identity)

    def to_list(self) -> list[dict]:
        return [e.to_dict() for e in self.entries]


@dataclass(frozen=True)
class SignProbe:
    name: str
    value: int
    residual_plus: float
    residual_minus: float
    tolerance: float

    def evidence(self) -> dict:
        return {"value": self.value, "residual(+1)": float(f"{self.residual_plus:.6e}"),
                "residual(-1)": float(f"{self.residual_minus:.6e}"), "tolerance": self.tolerance}


def probe_sign(name: str, residual: Callable[[int], float], tol: float) -> SignProbe:
    """Try both signs; exactly one must bring the residual under ``tol``."""
    rp, rm = float(residual(1)), float(residual(-1))
    ok = [s for s, r in ((1, rp), (-1, rm)) if r < tol]
    if len(ok) != 1:
        raise SignProbeError(f"sign probe {name!r}: residual(+1)={rp:.3e}, residual(-1)={rm:.3e}, tol={tol:g}")
    return SignProbe(name, ok[0], rp, rm, tol)


def stream_id(name: str) -> int:
    return zlib.crc32(name.encode())


# ---------------------------------------------------------------------------
# probing


def sample_probes(spec: GroupSpec, degree: int, n: int, seed: int, stream: int, **loop_kw):
    """Batched random point and ``degree`` tangents, one RNG per probe index."""
    if spec.has_loops:
        from .loopspace import sample_loop_probes
        return sample_loop_probes(spec, degree, n, seed, stream, **loop_kw)
    pts, tans = [], []
    for rng in split_rngs(seed, stream, n):
        p = sample_point(spec, rng)
        pts.append(p)
        tans.append([sample_tangent(p, rng) for _ in range(degree)])
    at = stack_points(pts)
    return at, [stack_tangents(at, [t[k] for t in tans]) for k in range(degree)]


def max_residual(form: DifferentialForm, n: int, seed: int, stream: int, **loop_kw) -> float:
    p, xs = sample_probes(form.domain, form.degree, n, seed, stream, **loop_kw)
    return float(np.max(np.abs(form(p, *xs))))


def check_identity(report: ResidualReport | None, name: str, anchor: str, form: DifferentialForm,
                   tol: float, n: int = DEFAULT_PROBES, seed: int = 0, signs: dict | None = None,
                   note: str = "", **loop_kw) -> Residual:
    res = max_residual(form, n, seed, stream_id(name), **loop_kw)
    entry = Residual(name, anchor, n, res, tol, dict(signs or {}), note)
    if report is not None:
        report.add(entry)
    return entry


# ---------------------------------------------------------------------------
# face maps


def _delete(idx: int):
    def fmap(m):
        return tuple(x for k, x in enumerate(m) if k != idx)

    def dmap(m, t):
        return tuple(x for k, x in enumerate(t) if k != idx)

    return fmap, dmap


def _multiply(idx: int):
    """Merge entries idx and idx+1 into their product."""
    def fmap(m):
        return m[:idx] + (m[idx] @ m[idx + 1],) + m[idx + 2:]

    def dmap(m, t):
        return t[:idx] + (t[idx] @ m[idx + 1] + m[idx] @ t[idx + 1],) + t[idx + 2:]

    return fmap, dmap


class NerveComplex:
    """Nerve of a one-factor group, optionally with a circle acting on it."""

    def __init__(self, base: GroupSpec, action: CircleAction | None = None):
        if len(base) != 1:
            raise ValueError("nerve base must be a single factor")
        self.base = base
        self.action = action

    @property
    def triple(self) -> bool:
        return self.action is not None

    def space(self, p: int, q: int = 0) -> GroupSpec:
        if q and not self.triple:
            raise ValueError("vertical level requires a circle action")
        g = GroupSpec(self.base.factors * p, self.base.samples if p else 0)
        return g + GroupSpec(("U1",) * q)

    def face(self, p: int, i: int, q: int = 0) -> SmoothMap:
        """Horizontal face eps_i: level (p, q) -> (p-1, q)."""
        if not 0 <= i <= p or p < 1:
            raise IndexError(f"horizontal face {i} at level {p}")
        if i == 0:
            fmap, dmap = _delete(0)
        elif i == p:
            fmap, dmap = _delete(p - 1)
        else:
            fmap, dmap = _multiply(i - 1)
        return SmoothMap(self.space(p, q), self.space(p - 1, q), fmap, dmap, f"e{i}")

    def vertical_face(self, p: int, q: int, i: int) -> SmoothMap:
        """Circle face eps_i^{S^1}: level (p, q) -> (p, q-1)."""
        if not self.triple:
            raise ValueError("vertical faces require a circle action")
        if not 0 <= i <= q or q < 1:
            raise IndexError(f"vertical face {i} at level {q}")
        if i < q:
            fmap, dmap = (_delete(p) if i == 0 else _multiply(p + i - 1))
        else:
            fmap, dmap = self._conjugation_face(p, q)
        return SmoothMap(self.space(p, q), self.space(p, q - 1), fmap, dmap, f"v{i}")

    def _conjugation_face(self, p: int, q: int):
        act = self.action
        loop = self.base.is_loop(0)

        def zaxis(z):
            return z[..., None, :, :] if loop else z

        def fmap(m):
            z = zaxis(m[p + q - 1])
            return tuple(act.act(z, g) for g in m[:p]) + m[p:p + q - 1]

        def dmap(m, t):
            z, w = zaxis(m[p + q - 1]), zaxis(t[p + q - 1])
            return tuple(act.d_act(z, w, g, x) for g, x in zip(m[:p], t[:p])) + t[p:p + q - 1]

        return fmap, dmap

    def degeneracy(self, p: int, i: int, q: int = 0) -> SmoothMap:
        """Horizontal degeneracy s_i: level p -> p+1, inserting the identity."""
        if not 0 <= i <= p:
            raise IndexError(f"degeneracy {i} at level {p}")
        n = self.base.dim(0)
        loop = self.base.is_loop(0)

        def fmap(m):
            ref = m[0] if m else None
            eye = np.eye(n, dtype=complex)
            if loop and ref is not None:
                eye = np.broadcast_to(eye, ref.shape).copy()
            return m[:i] + (eye,) + m[i:]

        def dmap(m, t):
            zero = np.zeros_like(t[0]) if t else np.zeros((n, n), dtype=complex)
            return t[:i] + (zero,) + t[i:]

        return SmoothMap(self.space(p, q), self.space(p + 1, q), fmap, dmap, f"s{i}")

    # -- differentials ----------------------------------------------------

    def d_horizontal(self, form: DifferentialForm, p: int, q: int = 0) -> DifferentialForm:
        parts = [F.pullback(self.face(p + 1, i, q), form) for i in range(p + 2)]
        return F.form_sum(parts, [(-1) ** i for i in range(p + 2)])

    def d_circle(self, form: DifferentialForm, p: int, q: int) -> DifferentialForm:
        parts = [F.pullback(self.vertical_face(p, q + 1, i), form) for i in range(q + 2)]
        return F.form_sum(parts, [(-1) ** (p + i) for i in range(q + 2)])

    def d_vertical_form(self, form: DifferentialForm, p: int, q: int = 0,
                        fd_step: float = F.DEFAULT_FD_STEP, richardson: bool = False) -> DifferentialForm:
        return (-1) ** (p + q) * F.exterior_derivative(form, fd_step, richardson)


def d_vertical_sign(p: int, q: int = 0) -> int:
    return (-1) ** (p + q)


# ---------------------------------------------------------------------------
# total cochains


@dataclass
class CochainLayer:
    index: tuple
    form: DifferentialForm


class TotalCochain:
    """Layers of a total cochain, keyed by (p, r) or (p, q, r)."""

    def __init__(self, complex_: NerveComplex, layers: dict | Iterable[CochainLayer] = ()):
        self.complex = complex_
        self.layers: dict[tuple, DifferentialForm] = {}
        items = layers.items() if isinstance(layers, dict) else ((l.index, l.form) for l in layers)
        for idx, form in items:
            self.add(idx, form)

    def _norm(self, idx):
        if self.complex.triple:
            if len(idx) != 3:
                raise ValueError("triple complex layers are indexed (p, q, r)")
            return tuple(idx)
        if len(idx) != 2:
            raise ValueError("double complex layers are indexed (p, r)")
        return (idx[0], 0, idx[1])

    def _out(self, idx):
        return idx if self.complex.triple else (idx[0], idx[2])

    def add(self, idx, form: DifferentialForm):
        p, q, r = self._norm(idx)
        if (p, q, r) in self.layers:
            raise ValueError(f"duplicate layer {idx}")
        if form.degree != r or form.domain != self.complex.space(p, q):
            raise ValueError(f"layer {idx} does not match its form (degree {form.degree}, domain {form.domain.factors})")
        degs = {a + b + c for (a, b, c) in self.layers}
        if degs and p + q + r not in degs:
            raise ValueError("inconsistent total degree")
        self.layers[(p, q, r)] = form

    @property
    def degree(self) -> int:
        return next(iter({sum(k) for k in self.layers}), 0)

    def differential(self, fd_step: float = F.DEFAULT_FD_STEP,
                     richardson: bool = False) -> dict[tuple, DifferentialForm]:
        """All components of D(c), keyed like the layers."""
        cx = self.complex
        incoming: dict[tuple, list] = {}
        for (p, q, r), form in sorted(self.layers.items()):
            incoming.setdefault((p + 1, q, r), []).append(cx.d_horizontal(form, p, q))
            if cx.triple:
                incoming.setdefault((p, q + 1, r), []).append(cx.d_circle(form, p, q))
            incoming.setdefault((p, q, r + 1), []).append(cx.d_vertical_form(form, p, q, fd_step, richardson))
        return {self._out(k): F.form_sum(v) for k, v in sorted(incoming.items())}


def check_cocycle(cochain: TotalCochain, name: str, anchor: str, n: int = DEFAULT_PROBES, seed: int = 0,
                  tol_algebraic: float = TOL_ALGEBRAIC, tol_fd: float = TOL_FD,
                  fd_step: float = F.DEFAULT_FD_STEP, signs: dict | None = None,
                  tolerances: dict | None = None, richardson: bool = False, **loop_kw) -> ResidualReport:
    """Evaluate every component of D(c) at ``n`` probes.

    Components whose forms involve no finite differences are held to
    ``tol_algebraic``; ``tolerances`` may override per index.
    """
    report = ResidualReport()
    for idx, form in cochain.differential(fd_step, richardson).items():
        tol = tol_fd if form.fd else tol_algebraic
        if tolerances and idx in tolerances:
            tol = tolerances[idx]
        label = ",".join(str(i) for i in idx)
        check_identity(report, f"{name}[{label}]", anchor, form, tol, n, seed, signs, **loop_kw)
    return report


# ---------------------------------------------------------------------------
# structural identities


def _max_diff(a: tuple, b: tuple) -> float:
    return max((float(np.max(np.abs(x - y))) for x, y in zip(a, b)), default=0.0)


def map_discrepancy(f: SmoothMap, g: SmoothMap, n: int, seed: int, stream: int) -> float:
    """Pointwise distance between two maps and their pushforwards."""
    p, xs = sample_probes(f.source, 1, n, seed, stream)
    fp, gp = f(p), g(p)
    d = _max_diff(fp.mats, gp.mats)
    return max(d, _max_diff(f.push(xs[0], fp).mats, g.push(xs[0], gp).mats))


def check_simplicial_identities(cx: NerveComplex, pmax: int = 3, qmax: int = 3, n: int = 100,
                                seed: int = 0, tol: float = 1e-12) -> ResidualReport:
    """eps_i eps_j = eps_{j-1} eps_i (i < j) in both directions, and commutation
    of horizontal with circle faces."""
    report = ResidualReport()
    qs = range(qmax + 1) if cx.triple else [0]
    worst_h = worst_v = worst_c = 0.0
    for q in qs:
        for p in range(2, pmax + 1):
            for j in range(p + 1):
                for i in range(j):
                    lhs = cx.face(p - 1, i, q).compose(cx.face(p, j, q))
                    rhs = cx.face(p - 1, j - 1, q).compose(cx.face(p, i, q))
                    worst_h = max(worst_h, map_discrepancy(lhs, rhs, n, seed, stream_id(f"h{p}{q}{i}{j}")))
    report.add(Residual("horizontal simplicial identities", "face relations of the nerve", n, worst_h, tol))
    if not cx.triple:
        return report
    for p in range(1, pmax + 1):
        for q in range(2, qmax + 1):
            for j in range(q + 1):
                for i in range(j):
                    lhs = cx.vertical_face(p, q - 1, i).compose(cx.vertical_face(p, q, j))
                    rhs = cx.vertical_face(p, q - 1, j - 1).compose(cx.vertical_face(p, q, i))
                    worst_v = max(worst_v, map_discrepancy(lhs, rhs, n, seed, stream_id(f"v{p}{q}{i}{j}")))
    report.add(Residual("vertical simplicial identities", "circle face relations", n, worst_v, tol))
    for p in range(1, pmax + 1):
        for q in range(1, qmax + 1):
            for i in range(p + 1):
                for j in range(q + 1):
                    lhs = cx.face(p, i, q - 1).compose(cx.vertical_face(p, q, j))
                    rhs = cx.vertical_face(p - 1, q, j).compose(cx.face(p, i, q))
                    worst_c = max(worst_c, map_discrepancy(lhs, rhs, n, seed, stream_id(f"c{p}{q}{i}{j}")))
    report.add(Residual("horizontal/vertical face commutation", "bisimplicial structure", n, worst_c, tol))
    return report


# ---------------------------------------------------------------------------
# the second Chern cocycle on NSU(2) / NU(2)


def second_chern_cocycle(variant: str = "SU", c22_sign: int = 1) -> TotalCochain:
    """C13 at (1, 3) and c22_sign * C22 at (2, 2)."""
    kind = "SU2" if variant == "SU" else "U2"
    base = GroupSpec((kind,))
    c13 = F.trace_cubed_form(base)
    return TotalCochain(NerveComplex(base), {(1, 3): c13, (2, 2): c22_sign * F.chern_c22(variant)})


CHERN_ANCHOR = "second Chern cocycle on the nerve"


def chern_cocycle_residual(variant: str, sign: int, n: int, seed: int, fd_step: float = F.DEFAULT_FD_STEP) -> float:
    """Worst residual of the mixed component d'C13 + d''(sign C22) on G^2."""
    comps = second_chern_cocycle(variant, sign).differential(fd_step)
    return max_residual(comps[(2, 3)], n, seed, stream_id(f"chern-sign-{variant}"))


def total_differential_squared(cx: NerveComplex, index: tuple, n: int = 50, seed: int = 0,
                               fd_step: float = F.DEFAULT_FD_STEP, richardson: bool = True) -> dict:
    """max |D(D c)| per component for a random single-layer cochain c at ``index``."""
    p, q, r = index if cx.triple else (index[0], 0, index[1])
    rng = np.random.default_rng([seed, stream_id(f"dsq{index}")])
    c = TotalCochain(cx, {index: F.random_form(cx.space(p, q), r, rng)})
    first = TotalCochain(cx, c.differential(fd_step, richardson))
    return {k: max_residual(form, n, seed, stream_id(f"dsq{index}{k}"))
            for k, form in first.differential(fd_step, richardson).items()}
