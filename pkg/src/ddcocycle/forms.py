"""Differential forms as alternating multilinear evaluators.

Conventions: wedge products and matrix-valued wedges are plain signed sums over
permutations (shuffles), without 1/k! factors.  The exterior derivative uses the
invariant formula on left-invariant extensions of the tangent arguments, so the
only numerical differentiation is one-dimensional along t -> g exp(tA).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .matgroups import (
    GroupPoint,
    GroupSpec,
    SpecMismatch,
    TangentVector,
    dagger,
    dexp,
    expm,
    trace,
)

TWO_PI_I = 2j * np.pi
KAPPA = (1 / TWO_PI_I) ** 2  # (1/2 pi i)^2 = -1/(4 pi^2)
C13_NORMALIZATION = KAPPA * (-1 / 6)
C22_NORMALIZATION = KAPPA * 0.5
DEFAULT_FD_STEP = 1e-4
# differentiating a form that is itself a difference quotient: roundoff grows like
# eps / h^2, so the outer step is widened.  Richardson extrapolation removes the
# h^2 truncation term and tolerates a much wider outer step.
NESTED_STEP_FACTOR = {False: 3, True: 30}


class ArityError(ValueError):
    pass


def perm_sign(perm: Sequence[int]) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


@dataclass(frozen=True, eq=False)
class DifferentialForm:
    domain: GroupSpec
    degree: int
    fn: Callable[[GroupPoint, tuple], np.ndarray]
    name: str = ""
    fd: bool = False  # value involves finite differences somewhere

    def __call__(self, p: GroupPoint, *tangents: TangentVector):
        if len(tangents) != self.degree:
            raise ArityError(f"{self.name or 'form'} has degree {self.degree}, got {len(tangents)} tangents")
        if p.spec != self.domain:
            raise SpecMismatch(f"form on {self.domain.factors} evaluated on {p.spec.factors}")
        return self.fn(p, tangents)

    def _combine(self, other: "DifferentialForm", sign: int, label: str) -> "DifferentialForm":
        if other.domain != self.domain or other.degree != self.degree:
            raise SpecMismatch("forms differ in domain or degree")
        a, b = self.fn, other.fn
        return DifferentialForm(self.domain, self.degree, lambda p, xs: a(p, xs) + sign * b(p, xs),
                                f"({self.name}{label}{other.name})", self.fd or other.fd)

    def __add__(self, other):
        return self._combine(other, 1, " + ")

    def __sub__(self, other):
        return self._combine(other, -1, " - ")

    def __mul__(self, c):
        f = self.fn
        return DifferentialForm(self.domain, self.degree, lambda p, xs: c * f(p, xs), f"{c}*{self.name}", self.fd)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1


def zero_form(domain: GroupSpec, degree: int) -> DifferentialForm:
    def fn(p, xs):
        return np.zeros(p.batch_shape, dtype=complex)
    return DifferentialForm(domain, degree, fn, "0")


def function_form(domain: GroupSpec, f: Callable[[GroupPoint], np.ndarray], name: str = "f") -> DifferentialForm:
    return DifferentialForm(domain, 0, lambda p, xs: f(p), name)


def form_sum(forms: Sequence[DifferentialForm], signs: Sequence[complex] | None = None) -> DifferentialForm:
    forms = list(forms)
    signs = [1] * len(forms) if signs is None else list(signs)
    if not forms:
        raise ValueError("empty sum")
    fns = [f.fn for f in forms]

    def fn(p, xs):
        return sum(s * g(p, xs) for s, g in zip(signs, fns))

    return DifferentialForm(forms[0].domain, forms[0].degree, fn, "sum",
                            any(f.fd for f in forms))


# ---------------------------------------------------------------------------
# smooth maps


@dataclass(frozen=True, eq=False)
class SmoothMap:
    """A map between product spaces given with its exact differential.

    ``fmap`` acts on matrix tuples, ``dmap(mats, tmats)`` is the pushforward.
    Loop velocities are pushed with ``dmap`` too, since maps act pointwise.
    """

    source: GroupSpec
    target: GroupSpec
    fmap: Callable[[tuple], tuple]
    dmap: Callable[[tuple, tuple], tuple]
    name: str = ""

    def __call__(self, p: GroupPoint) -> GroupPoint:
        if p.spec != self.source:
            raise SpecMismatch(f"{self.name} expects {self.source.factors}, got {p.spec.factors}")
        vel = None if p.vel is None else tuple(self.dmap(p.mats, p.vel))
        return GroupPoint(self.target, tuple(self.fmap(p.mats)), vel)

    def push(self, x: TangentVector, image: GroupPoint | None = None) -> TangentVector:
        image = self(x.at) if image is None else image
        return TangentVector(image, tuple(self.dmap(x.at.mats, x.mats)))

    def compose(self, inner: "SmoothMap") -> "SmoothMap":
        """self after inner."""
        if inner.target != self.source:
            raise SpecMismatch("cannot compose")
        f, g = self, inner
        return SmoothMap(
            inner.source, self.target,
            lambda m: f.fmap(g.fmap(m)),
            lambda m, t: f.dmap(g.fmap(m), g.dmap(m, t)),
            f"{self.name}∘{inner.name}",
        )


def identity_map(spec: GroupSpec) -> SmoothMap:
    return SmoothMap(spec, spec, lambda m: m, lambda m, t: t, "id")


def pullback(f: SmoothMap, omega: DifferentialForm) -> DifferentialForm:
    if omega.domain != f.target:
        raise SpecMismatch(f"pullback of a form on {omega.domain.factors} along map into {f.target.factors}")
    ev = omega.fn

    def fn(p, xs):
        q = f(p)
        return ev(q, tuple(f.push(x, q) for x in xs))

    return DifferentialForm(f.source, omega.degree, fn, f"{f.name}*{omega.name}", omega.fd)


# ---------------------------------------------------------------------------
# matrix-valued one-forms and trace wedges


@dataclass(frozen=True, eq=False)
class MatrixOneForm:
    domain: GroupSpec
    fn: Callable[[GroupPoint, TangentVector], np.ndarray]
    name: str = ""

    def __call__(self, p: GroupPoint, x: TangentVector) -> np.ndarray:
        return self.fn(p, x)


def maurer_cartan(factor: int, domain: GroupSpec) -> MatrixOneForm:
    """g^{-1} dg on one factor."""
    return MatrixOneForm(domain, lambda p, x: dagger(p.mats[factor]) @ x.mats[factor], f"mc{factor}")


def differential(factor: int, domain: GroupSpec) -> MatrixOneForm:
    """dg on one factor (the ambient tangent component)."""
    return MatrixOneForm(domain, lambda p, x: x.mats[factor], f"d{factor}")


def trace_wedge(domain: GroupSpec, one_forms: Sequence[MatrixOneForm], coef: complex = 1.0,
                prefactor: Callable[[GroupPoint], np.ndarray] | None = None,
                name: str = "tr") -> DifferentialForm:
    """coef * tr(P w_1 ^ ... ^ w_k), matrix products inside the trace."""
    k = len(one_forms)
    perms = [(perm_sign(s), s) for s in itertools.permutations(range(k))]

    def fn(p, xs):
        vals = [[w(p, x) for x in xs] for w in one_forms]
        pre = None if prefactor is None else prefactor(p)
        total = 0
        for sgn, s in perms:
            m = vals[0][s[0]]
            for a in range(1, k):
                m = m @ vals[a][s[a]]
            if pre is not None:
                m = pre @ m
            total = total + sgn * trace(m)
        return coef * total

    return DifferentialForm(domain, k, fn, name)


def trace_cubed_form(domain: GroupSpec | None = None, normalization: complex = C13_NORMALIZATION,
                     factor: int = 0) -> DifferentialForm:
    """normalization * tr(g^{-1}dg)^3; defaults give the integral generator C13."""
    domain = GroupSpec(("SU2",)) if domain is None else domain
    mc = maurer_cartan(factor, domain)
    return trace_wedge(domain, [mc, mc, mc], normalization, name="C13")


def chern_c22(variant: str = "SU", kind: str | None = None) -> DifferentialForm:
    """The (2,2) component of the second Chern cocycle on G x G.

    ``variant="U"`` subtracts the tr(h1^{-1}dh1) tr(h2^{-1}dh2) correction.
    """
    if variant not in ("SU", "U"):
        raise ValueError("variant must be 'SU' or 'U'")
    kind = kind or ("SU2" if variant == "SU" else "U2")
    domain = GroupSpec((kind, kind))

    def pre(p):
        h1, h2 = p.mats
        return dagger(h2) @ dagger(h1)

    main = trace_wedge(domain, [differential(0, domain), differential(1, domain)],
                       C22_NORMALIZATION, prefactor=pre, name="C22")
    if variant == "SU":
        return main
    a1 = scalar_trace_mc(0, domain)
    a2 = scalar_trace_mc(1, domain)
    corr = wedge(a1, a2) * C22_NORMALIZATION
    out = main - corr
    return DifferentialForm(domain, 2, out.fn, "C22U")


def scalar_trace_mc(factor: int, domain: GroupSpec) -> DifferentialForm:
    """tr(g^{-1} dg) on one factor."""
    return DifferentialForm(domain, 1, lambda p, xs: trace(dagger(p.mats[factor]) @ xs[0].mats[factor]),
                            f"trmc{factor}")


# ---------------------------------------------------------------------------
# wedge


def wedge(alpha: DifferentialForm, beta: DifferentialForm) -> DifferentialForm:
    if alpha.domain != beta.domain:
        raise SpecMismatch("wedge of forms on different domains")
    a, b = alpha.degree, beta.degree
    n = a + b
    shuffles = []
    for left in itertools.combinations(range(n), a):
        right = tuple(i for i in range(n) if i not in left)
        shuffles.append((perm_sign(left + right), left, right))
    fa, fb = alpha.fn, beta.fn

    def fn(p, xs):
        total = 0
        for sgn, left, right in shuffles:
            total = total + sgn * fa(p, tuple(xs[i] for i in left)) * fb(p, tuple(xs[i] for i in right))
        return total

    return DifferentialForm(alpha.domain, n, fn, f"({alpha.name}^{beta.name})", alpha.fd or beta.fd)


# ---------------------------------------------------------------------------
# exterior derivative


def flow(p: GroupPoint, algebra: tuple, s: float, rates: tuple | None = None) -> GroupPoint:
    """p exp(s A) factor-wise; loop velocities follow by the product rule."""
    mats = []
    vel = None if p.vel is None else []
    for i, (g, a) in enumerate(zip(p.mats, algebra)):
        e = expm(s * a)
        mats.append(g @ e)
        if vel is not None:
            r = None if rates is None else rates[i]
            if r is None:
                if p.spec.is_loop(i):
                    raise ValueError("loop tangent used as a flow direction needs its t-derivative")
                vel.append(p.vel[i] @ e)
            else:
                vel.append(p.vel[i] @ e + g @ dexp(s * a, s * r))
    return GroupPoint(p.spec, tuple(mats), None if vel is None else tuple(vel))


def _extend(p: GroupPoint, algebra: tuple, rates) -> TangentVector:
    return TangentVector(p, tuple(g @ a for g, a in zip(p.mats, algebra)), rates)


def _bracket(a: tuple, ra, b: tuple, rb):
    br = tuple(x @ y - y @ x for x, y in zip(a, b))
    rates = None
    if ra is not None and rb is not None:
        rates = tuple(None if (u is None or v is None) else (u @ y - y @ u) + (x @ v - v @ x)
                      for x, u, y, v in zip(a, ra, b, rb))
    return br, rates


def exterior_derivative(omega: DifferentialForm, fd_step: float = DEFAULT_FD_STEP,
                        richardson: bool = False) -> DifferentialForm:
    """d omega via left-invariant extension and central differences."""
    ev = omega.fn
    k = omega.degree
    if omega.fd:
        fd_step = fd_step * NESTED_STEP_FACTOR[richardson]

    def directional(p, a, ra, rest):
        def at(s):
            q = flow(p, a, s, ra)
            return ev(q, tuple(_extend(q, b, rb) for b, rb in rest))

        def central(h):
            return (at(h) - at(-h)) / (2 * h)

        d = central(fd_step)
        if richardson:
            d = (4 * central(fd_step / 2) - d) / 3
        return d

    def fn(p, xs):
        algs = [(x.left(), x.rates) for x in xs]
        total = 0
        for i in range(k + 1):
            rest = [algs[j] for j in range(k + 1) if j != i]
            total = total + (-1) ** i * directional(p, algs[i][0], algs[i][1], rest)
        for i in range(k + 1):
            for j in range(i + 1, k + 1):
                br, rbr = _bracket(algs[i][0], algs[i][1], algs[j][0], algs[j][1])
                args = [_extend(p, br, rbr)] + [_extend(p, *algs[m]) for m in range(k + 1) if m not in (i, j)]
                total = total + (-1) ** (i + j) * ev(p, tuple(args))
        return total

    return DifferentialForm(omega.domain, k + 1, fn, f"d{omega.name}", True)


# ---------------------------------------------------------------------------
# random smooth forms for property tests


def random_form(domain: GroupSpec, degree: int, rng: np.random.Generator, terms: int = 2) -> DifferentialForm:
    """Sum of f_t(p) * (l_1 ^ ... ^ l_k) with smooth f_t and left-invariant l_j.

    f_t is quadratic in each matrix factor, so forms on PU(2) factors do not see
    the sign of the representative.
    """
    n = len(domain)
    dims = [domain.dim(i) for i in range(n)]

    def cmat(d):
        return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))

    coeffs = []
    for _ in range(terms):
        f_mats = [cmat(d) for d in dims]
        f_lin = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        lams = [[cmat(d) for d in dims] for _ in range(degree)]
        coeffs.append((rng.standard_normal() + 1j * rng.standard_normal(), f_mats, f_lin, lams))

    def scalar(p, c0, f_mats, f_lin):
        val = c0
        for i, (g, m) in enumerate(zip(p.mats, f_mats)):
            if dims[i] == 1:
                val = val + f_lin[i] * g[..., 0, 0]
            else:
                val = val + 0.5 * f_lin[i] * trace(m @ g @ m @ dagger(g)) / 4
        return val

    def fn(p, xs):
        total = 0
        left = [x.left() for x in xs]
        for c0, f_mats, f_lin, lams in coeffs:
            f = scalar(p, c0, f_mats, f_lin)
            if degree == 0:
                total = total + f
                continue
            vals = [[sum(trace(r @ a) for r, a in zip(lam, la)) for la in left] for lam in lams]
            det = 0
            for perm in itertools.permutations(range(degree)):
                prod = perm_sign(perm)
                for r in range(degree):
                    prod = prod * vals[r][perm[r]]
                det = det + prod
            total = total + f * det
        return total

    return DifferentialForm(domain, degree, fn, f"rand{degree}")


def random_tangents(p: GroupPoint, k: int, rng: np.random.Generator) -> list[TangentVector]:
    """k tangents at a (possibly batched, non-loop) point."""
    batch = p.batch_shape
    out = []
    for _ in range(k):
        algs = []
        for i in range(len(p.spec)):
            basis = p.spec.basis(i)
            c = rng.standard_normal(batch + (len(basis),))
            algs.append(sum(c[..., j, None, None] * b for j, b in enumerate(basis)))
        out.append(TangentVector(p, tuple(g @ a for g, a in zip(p.mats, algs))))
    return out


