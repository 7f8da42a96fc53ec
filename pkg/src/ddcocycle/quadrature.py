"""Quadrature of pulled-back forms over SU(2) and over cylinders I^a x S^1.

Every parametrized map is built from :class:`Jet` values, which carry a matrix
together with its exact partial derivatives, so forms are always evaluated on
exact tangent vectors.  Interval directions use Gauss-Legendre nodes, circle
directions the periodic trapezoid rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import forms as F
from .forms import DifferentialForm
from .matgroups import (
    I2,
    PAULI,
    GroupPoint,
    GroupSpec,
    TangentVector,
    dexp,
    expm,
)

SU2 = GroupSpec(("SU2",))
TOL_QUAD = 1e-4
CHUNK = 1 << 15


class NonConvergence(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# jets


@dataclass(frozen=True, eq=False)
class Jet:
    """A matrix-valued function sampled at nodes, with its partials."""

    value: np.ndarray
    partials: tuple

    @classmethod
    def constant(cls, m: np.ndarray, nparams: int, shape: tuple = ()) -> "Jet":
        v = np.broadcast_to(np.asarray(m, dtype=complex), shape + np.shape(m)[-2:])
        return cls(v, tuple(np.zeros_like(v) for _ in range(nparams)))

    @classmethod
    def scalar(cls, f: np.ndarray, df: Sequence[np.ndarray]) -> "Jet":
        """A scalar function as a 1x1 jet (used as a coefficient)."""
        return cls(np.asarray(f)[..., None, None], tuple(np.asarray(d)[..., None, None] for d in df))

    def __matmul__(self, other: "Jet") -> "Jet":
        return Jet(self.value @ other.value,
                   tuple(a @ other.value + self.value @ b for a, b in zip(self.partials, other.partials)))

    def __mul__(self, other: "Jet") -> "Jet":
        """Scalar jet times matrix jet (1x1 entries broadcast)."""
        return Jet(self.value * other.value,
                   tuple(a * other.value + self.value * b for a, b in zip(self.partials, other.partials)))

    def __add__(self, other: "Jet") -> "Jet":
        return Jet(self.value + other.value, tuple(a + b for a, b in zip(self.partials, other.partials)))

    def __neg__(self) -> "Jet":
        return Jet(-self.value, tuple(-a for a in self.partials))

    def exp(self) -> "Jet":
        return Jet(expm(self.value), tuple(dexp(self.value, a) for a in self.partials))


def scalar_times(c: Jet, m: np.ndarray) -> Jet:
    """c(u) * M for a fixed matrix M."""
    return Jet(c.value * m, tuple(d * m for d in c.partials))


# ---------------------------------------------------------------------------
# tensor-product rules


def interval_rule(n: int, a: float = 0.0, b: float = 1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    return a + (b - a) * (x + 1) / 2, w * (b - a) / 2


def periodic_rule(n: int, period: float = 2 * np.pi):
    return period * np.arange(n) / n, np.full(n, period / n)


def _tensor_integrate(chart: Callable[..., Jet], rules: Sequence[tuple], omega: DifferentialForm,
                      post: Callable[[Jet], Jet] | None = None) -> complex:
    """sum over the tensor grid of omega(g(u); d_1 g, ..., d_k g) * weights."""
    nodes = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    weights = np.ones_like(nodes[0])
    for axis, r in enumerate(rules):
        shape = [1] * len(rules)
        shape[axis] = -1
        weights = weights * r[1].reshape(shape)
    flat = [x.ravel() for x in nodes]
    wflat = weights.ravel()
    total = 0.0 + 0.0j
    for start in range(0, wflat.size, CHUNK):
        sl = slice(start, start + CHUNK)
        jet = chart(*(x[sl] for x in flat))
        if post is not None:
            jet = post(jet)
        p = GroupPoint(omega.domain, (jet.value,))
        tangents = [TangentVector(p, (d,)) for d in jet.partials]
        total += complex(np.sum(omega(p, *tangents) * wflat[sl]))
    return total


# ---------------------------------------------------------------------------
# SU(2) charts


def _exp_axis(angle: np.ndarray, gen: np.ndarray, which: int, nparams: int) -> Jet:
    e = expm(angle[..., None, None] * gen)
    parts = [np.zeros_like(e) for _ in range(nparams)]
    parts[which] = gen @ e
    return Jet(e, tuple(parts))


def euler_chart(phi, theta, psi) -> Jet:
    """exp(phi i s3 / 2) exp(theta i s2 / 2) exp(psi i s3 / 2)."""
    a, b = 0.5j * PAULI[2], 0.5j * PAULI[1]
    return _exp_axis(phi, a, 0, 3) @ _exp_axis(theta, b, 1, 3) @ _exp_axis(psi, a, 2, 3)


def hyperspherical_chart(chi, vartheta, varphi) -> Jet:
    """q = (cos chi, sin chi cos vt, sin chi sin vt cos vp, sin chi sin vt sin vp) as q0 + i q.sigma."""
    c1, s1 = np.cos(chi), np.sin(chi)
    c2, s2 = np.cos(vartheta), np.sin(vartheta)
    c3, s3 = np.cos(varphi), np.sin(varphi)
    zero = np.zeros_like(chi)
    q = (c1, s1 * c2, s1 * s2 * c3, s1 * s2 * s3)
    dq = (
        (-s1, c1 * c2, c1 * s2 * c3, c1 * s2 * s3),
        (zero, -s1 * s2, s1 * c2 * c3, s1 * c2 * s3),
        (zero, zero, -s1 * s2 * s3, s1 * s2 * c3),
    )

    def mat(v):
        return (v[0][..., None, None] * I2 + 1j * sum(v[k + 1][..., None, None] * PAULI[k] for k in range(3)))

    return Jet(mat(q), tuple(mat(d) for d in dq))


@dataclass(frozen=True)
class ChartGrid:
    """A parametrization of SU(2) with node counts per axis."""

    kind: str = "euler"
    nodes: tuple = (48, 48, 48)

    def __post_init__(self):
        if self.kind not in ("euler", "hyperspherical"):
            raise ValueError(f"unknown chart {self.kind!r}")

    @property
    def chart(self) -> Callable[..., Jet]:
        return euler_chart if self.kind == "euler" else hyperspherical_chart

    def rules(self):
        n1, n2, n3 = self.nodes
        if self.kind == "euler":
            return [periodic_rule(n1), interval_rule(n2, 0, np.pi), periodic_rule(n3, 4 * np.pi)]
        return [interval_rule(n1, 0, np.pi), interval_rule(n2, 0, np.pi), periodic_rule(n3)]

    def refined(self) -> "ChartGrid":
        return ChartGrid(self.kind, tuple(2 * n for n in self.nodes))


def _converged(coarse: complex, fine: complex, tol: float, what: str) -> complex:
    if abs(fine - coarse) > 10 * tol:
        raise NonConvergence(f"{what}: resolutions disagree by {abs(fine - coarse):.3e}")
    return fine


def integrate_top_form_su2(omega: DifferentialForm, grid: ChartGrid | None = None, tol: float = TOL_QUAD,
                           check: bool = True, left: np.ndarray | None = None) -> complex:
    """Integral of a 3-form over SU(2); ``left`` translates the chart by h g(u)."""
    if omega.degree != 3 or omega.domain != SU2:
        raise ValueError("need a 3-form on SU(2)")
    grid = ChartGrid() if grid is None else grid
    post = None
    if left is not None:
        h = Jet.constant(left, 3)
        post = lambda jet: h @ jet  # noqa: E731
    value = _tensor_integrate(grid.chart, grid.rules(), omega, post)
    if not check:
        return value
    fine = _tensor_integrate(grid.chart, grid.refined().rules(), omega, post)
    return _converged(value, fine, tol, f"SU(2) integral on {grid.kind} grid")


# ---------------------------------------------------------------------------
# sheets over I^a x S^1


@dataclass(frozen=True, eq=False)
class HomotopySheet:
    """A map I^a x S^1 -> SU(2) given as a jet-valued function of (interval..., z)."""

    fn: Callable[..., Jet]
    intervals: int = 2
    name: str = "sheet"

    def __call__(self, *coords) -> Jet:
        return self.fn(*coords)

    @property
    def dim(self) -> int:
        return self.intervals + 1

    def then(self, right: Callable[..., Jet], name: str | None = None) -> "HomotopySheet":
        """Pointwise product with another jet-valued map on the same domain."""
        return HomotopySheet(lambda *u: self.fn(*u) @ right(*u), self.intervals, name or self.name)


@dataclass(frozen=True)
class SheetGrid:
    interval_nodes: int = 48
    circle_nodes: int = 64

    def rules(self, intervals: int):
        return [interval_rule(self.interval_nodes)] * intervals + [periodic_rule(self.circle_nodes)]

    def refined(self) -> "SheetGrid":
        return SheetGrid(2 * self.interval_nodes, 2 * self.circle_nodes)


def integrate_form_over_cylinder(sheet: HomotopySheet, omega: DifferentialForm, grid: SheetGrid | None = None,
                                 tol: float = TOL_QUAD, check: bool = True) -> complex:
    """Integral of the pullback of omega over I^a x S^1, oriented (interval..., z)."""
    if omega.degree != sheet.dim:
        raise ValueError(f"{omega.degree}-form over a {sheet.dim}-dimensional sheet")
    grid = SheetGrid() if grid is None else grid
    value = _tensor_integrate(sheet.fn, grid.rules(sheet.intervals), omega)
    if not check:
        return value
    fine = _tensor_integrate(sheet.fn, grid.refined().rules(sheet.intervals), omega)
    return _converged(value, fine, tol, f"integral over {sheet.name}")


# -- building blocks --------------------------------------------------------


def _su2_basis():
    return np.array([1j * p for p in PAULI])


@dataclass(frozen=True)
class TrigLoopAlgebra:
    """M(z) = sum_b c_b(z) i sigma_b with trigonometric coefficients."""

    coef: np.ndarray  # (3, 2 band + 1)

    def __call__(self, z: np.ndarray):
        band = (self.coef.shape[-1] - 1) // 2
        m = np.arange(1, band + 1)[:, None]
        zz = np.atleast_1d(z)[None, :]
        val = np.concatenate([np.ones_like(zz), np.cos(m * zz), np.sin(m * zz)])
        der = np.concatenate([np.zeros_like(zz), -m * np.sin(m * zz), m * np.cos(m * zz)])
        basis = _su2_basis()
        c, dc = self.coef @ val, self.coef @ der
        return np.einsum("bn,bij->nij", c, basis), np.einsum("bn,bij->nij", dc, basis)

    @classmethod
    def random(cls, rng: np.random.Generator, band: int = 2, scale: float = 1.0) -> "TrigLoopAlgebra":
        m = np.arange(0, band + 1)
        decay = scale / (1.0 + m) ** 2
        a = rng.standard_normal((3, band + 1)) * decay
        b = rng.standard_normal((3, band)) * decay[1:]
        return cls(np.concatenate([a, b], axis=-1))


def path_family(x0: np.ndarray, m: TrigLoopAlgebra) -> Callable[..., Jet]:
    """sigma(t, z) = x0 exp(t M(z)) as a jet in (s, t, z); s is a dummy parameter."""
    def fn(s, t, z):
        mz, dmz = m(z)
        zero = np.zeros_like(mz)
        arg = Jet(t[:, None, None] * mz, (zero, mz, t[:, None, None] * dmz))
        return Jet.constant(x0, 3, (t.size,)) @ arg.exp()
    return fn


def straight_homotopy(x0: np.ndarray, m: TrigLoopAlgebra, k: TrigLoopAlgebra) -> HomotopySheet:
    """F(s, t, z) = sigma(t, z) exp(s sin(pi t) K(z)): from sigma at s=0 to sigma' at s=1,
    fixed at t = 0 and t = 1."""
    sigma = path_family(x0, m)

    def fn(s, t, z):
        kz, dkz = k(z)
        amp = np.sin(np.pi * t)
        damp = np.pi * np.cos(np.pi * t)
        e = lambda a: a[:, None, None]  # noqa: E731
        arg = Jet(e(s * amp) * kz, (e(amp) * kz, e(s * damp) * kz, e(s * amp) * dkz))
        return sigma(s, t, z) @ arg.exp()

    return HomotopySheet(fn, 2, "straight homotopy")


def null_bump(k2: TrigLoopAlgebra, strength: float = 0.8) -> Callable[..., Jet]:
    """exp(c sin(pi s) sin(pi t) K2(z)): identity on the whole boundary of I^2 x S^1."""
    def fn(s, t, z):
        kz, dkz = k2(z)
        b = strength * np.sin(np.pi * s) * np.sin(np.pi * t)
        bs = strength * np.pi * np.cos(np.pi * s) * np.sin(np.pi * t)
        bt = strength * np.pi * np.sin(np.pi * s) * np.cos(np.pi * t)
        e = lambda a: a[:, None, None]  # noqa: E731
        return Jet(e(b) * kz, (e(bs) * kz, e(bt) * kz, e(b) * dkz)).exp()
    return fn


def _smooth_step(r):
    """S(r) = f(r) / (f(r) + f(1 - r)), f(x) = exp(-1/x) for x > 0, with S'."""
    r = np.clip(r, 0.0, 1.0)

    def f(x):
        safe = np.where(x > 0, x, 1.0)
        return np.where(x > 0, np.exp(-1 / safe), 0.0)

    def df(x):
        safe = np.where(x > 0, x, 1.0)
        return np.where(x > 0, np.exp(-1 / safe) / safe**2, 0.0)

    a, b = f(r), f(1 - r)
    da, db = df(r), -df(1 - r)
    den = a + b
    return a / den, (da * den - a * (da + db)) / den**2


WRAP_CENTER = (0.5, 0.5, np.pi)
WRAP_RADII = (0.45, 0.45, 2.8)


def wrap_factor(center=WRAP_CENTER, radii=WRAP_RADII) -> Callable[..., Jet]:
    """W = -exp(pi S(r)/r y.i sigma) on the ellipsoid y = (u - center)/radii, identity outside.

    The center goes to -I and the boundary sphere to I, so W has degree one on
    the collapsed cylinder.
    """
    basis = _su2_basis()

    def fn(s, t, z):
        coords = (s, t, z)
        y = np.stack([(c - c0) / rad for c, c0, rad in zip(coords, center, radii)])
        r = np.sqrt(np.sum(y**2, axis=0))
        inside = r < 1
        rs = np.where(r > 1e-300, r, 1.0)
        step, dstep = _smooth_step(r)
        amp = np.where(inside, np.pi * step / rs, 0.0)
        # d amp / d r; amp and its derivatives vanish to all orders at r = 0
        damp = np.where(inside, np.pi * (dstep / rs - step / rs**2), 0.0)
        ysig = np.einsum("kn,kij->nij", y, basis)
        a = ysig * amp[:, None, None]
        partials = []
        for k in range(3):
            dy = 1.0 / radii[k]
            dr = np.where(r > 1e-300, y[k] / rs, 0.0) * dy
            partials.append((damp * dr)[:, None, None] * ysig + (amp * dy)[:, None, None] * basis[k])
        outside = ~inside
        val = -expm(a)
        parts = [-dexp(a, d) for d in partials]
        val[outside] = I2
        for d in parts:
            d[outside] = 0
        return Jet(val, tuple(parts))

    return fn


def wrap_sheet() -> HomotopySheet:
    return HomotopySheet(wrap_factor(), 2, "wrap factor")


@dataclass
class HomotopyResult:
    difference: complex
    integer: int
    distance: float
    values: tuple = field(default_factory=tuple)


def homotopy_integrality_check(sheet: HomotopySheet, other: HomotopySheet, nu: DifferentialForm | None = None,
                               grid: SheetGrid | None = None, tol: float = TOL_QUAD,
                               boundary_tol: float = 1e-12) -> HomotopyResult:
    """Distance of the integral difference of nu over two homotopies to the nearest integer."""
    nu = F.trace_cubed_form(SU2) if nu is None else nu
    mismatch = boundary_mismatch(sheet, other)
    if mismatch > boundary_tol:
        raise ValueError(f"sheets differ on the boundary ({mismatch:.2e})")
    a = integrate_form_over_cylinder(sheet, nu, grid, tol)
    b = integrate_form_over_cylinder(other, nu, grid, tol)
    diff = a - b
    k = int(np.rint(diff.real))
    return HomotopyResult(diff, k, float(abs(diff - k)), (a, b))


def boundary_mismatch(a: HomotopySheet, b: HomotopySheet, n: int = 33) -> float:
    """max |a - b| on s in {0, 1} and t in {0, 1}."""
    u = np.linspace(0, 1, n)
    z = 2 * np.pi * np.arange(n) / n
    uu, zz = (x.ravel() for x in np.meshgrid(u, z, indexing="ij"))
    worst = 0.0
    for fixed in (0.0, 1.0):
        ff = np.full_like(uu, fixed)
        for args in ((ff, uu, zz), (uu, ff, zz)):
            worst = max(worst, float(np.max(np.abs(a(*args).value - b(*args).value))))
    return worst


def default_homotopies(seed: int = 0, bump_strength: float = 0.8):
    """A straight homotopy F, a null-homotopic perturbation of it and F composed with the wrap."""
    rng = np.random.default_rng([seed, 0x5EED])
    from .matgroups import sample_point
    x0 = sample_point(SU2, rng).mats[0]
    m, k, k2 = (TrigLoopAlgebra.random(rng) for _ in range(3))
    base = straight_homotopy(x0, m, k)
    return {
        "base": base,
        "bump": base.then(null_bump(k2, bump_strength), "bumped homotopy"),
        "wrap": base.then(wrap_factor(), "wrapped homotopy"),
    }


def exact_form_control(seed: int = 0, fd_step: float = F.DEFAULT_FD_STEP) -> DifferentialForm:
    """d beta for a random smooth 2-form beta on SU(2)."""
    beta = F.random_form(SU2, 2, np.random.default_rng([seed, 0xBE7A]))
    return F.exterior_derivative(beta, fd_step)
