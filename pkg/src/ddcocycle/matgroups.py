"""Small matrix groups used as nerve building blocks.

Points and tangent vectors are tuples of complex arrays, one per factor.  Every
array may carry leading batch axes; matrix axes are always the last two.  A loop
factor (kind prefixed with ``"L"``) carries one extra sample axis just before the
matrix axes plus a velocity array, see :mod:`ddcocycle.loopspace`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA1, SIGMA2, SIGMA3)
I2 = np.eye(2, dtype=complex)

MEMBERSHIP_TOL = 1e-12
ALGEBRA_TOL = 1e-10

KINDS = ("SU2", "U2", "PU2", "U1")
_DIM = {"SU2": 2, "U2": 2, "PU2": 2, "U1": 1}
_BASIS = {
    "SU2": tuple(1j * s for s in PAULI),
    "PU2": tuple(1j * s for s in PAULI),
    "U2": tuple(1j * s for s in PAULI) + (1j * I2,),
    "U1": (np.array([[1j]]),),
}


class SpecMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# batched kernels


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def trace(a: np.ndarray) -> np.ndarray:
    return np.einsum("...ii->...", a)


def _cs(mu: np.ndarray):
    """cosh(sqrt(mu)) and sinh(sqrt(mu))/sqrt(mu), series-safe near 0."""
    mu = np.asarray(mu, dtype=complex)
    lam = np.sqrt(mu)
    small = np.abs(mu) < 1e-2
    safe = np.where(small, 1.0, lam)
    c = np.cosh(lam)
    s = np.where(small, 1 + mu / 6 + mu**2 / 120 + mu**3 / 5040 + mu**4 / 362880,
                 np.sinh(safe) / safe)
    ds = np.where(small, 1 / 6 + mu / 60 + mu**2 / 1680 + mu**3 / 90720,
                  (c - s) / (2 * np.where(small, 1.0, mu)))
    return c, s, ds


def _split2(m):
    half = (m[..., 0, 0] + m[..., 1, 1]) / 2
    m0 = m - half[..., None, None] * I2
    return half, m0


def expm(m: np.ndarray) -> np.ndarray:
    """Matrix exponential over the last two axes; closed form for n <= 2."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[-1]
    if n == 1:
        return np.exp(m)
    if n == 2:
        half, m0 = _split2(m)
        mu = -(m0[..., 0, 0] * m0[..., 1, 1] - m0[..., 0, 1] * m0[..., 1, 0])
        c, s, _ = _cs(mu)
        return np.exp(half)[..., None, None] * (c[..., None, None] * I2 + s[..., None, None] * m0)
    return scipy.linalg.expm(m)


def dexp(m: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Directional derivative d/de exp(m + e y) at e = 0."""
    m = np.asarray(m, dtype=complex)
    y = np.asarray(y, dtype=complex)
    n = m.shape[-1]
    if n == 1:
        return np.exp(m) * y
    if n == 2:
        m, y = np.broadcast_arrays(m, y)
        half, m0 = _split2(m)
        yhalf, y0 = _split2(y)
        mu = -(m0[..., 0, 0] * m0[..., 1, 1] - m0[..., 0, 1] * m0[..., 1, 0])
        dmu = trace(m0 @ y0)
        c, s, ds = _cs(mu)
        e = np.exp(half)[..., None, None]
        c, s, ds, dmu, yhalf = (v[..., None, None] for v in (c, s, ds, dmu, yhalf))
        return e * (yhalf * (c * I2 + s * m0) + (s / 2) * dmu * I2 + ds * dmu * m0 + s * y0)
    block = np.zeros(m.shape[:-2] + (2 * n, 2 * n), dtype=complex)
    block[..., :n, :n] = m
    block[..., n:, n:] = m
    block[..., :n, n:] = y
    return scipy.linalg.expm(block)[..., :n, n:]


# ---------------------------------------------------------------------------
# specs, points, tangents


@dataclass(frozen=True)
class GroupSpec:
    """Ordered product of factor kinds; ``samples`` is the loop grid size."""

    factors: tuple[str, ...]
    samples: int = 0

    def __post_init__(self):
        for f in self.factors:
            base = f[1:] if f.startswith("L") else f
            if base not in KINDS:
                raise ValueError(f"unknown factor kind {f!r}")
            if f.startswith("L") and self.samples < 1:
                raise ValueError("loop factors need a positive sample count")

    @classmethod
    def power(cls, kind: str, p: int, samples: int = 0) -> "GroupSpec":
        return cls((kind,) * p, samples)

    def __len__(self):
        return len(self.factors)

    def __add__(self, other: "GroupSpec") -> "GroupSpec":
        samples = max(self.samples, other.samples)
        return GroupSpec(self.factors + other.factors, samples)

    def base(self, i: int) -> str:
        f = self.factors[i]
        return f[1:] if f.startswith("L") else f

    def is_loop(self, i: int) -> bool:
        return self.factors[i].startswith("L")

    @property
    def has_loops(self) -> bool:
        return any(f.startswith("L") for f in self.factors)

    def dim(self, i: int) -> int:
        return _DIM[self.base(i)]

    def basis(self, i: int) -> tuple[np.ndarray, ...]:
        return _BASIS[self.base(i)]

    def sub(self, idx: Sequence[int]) -> "GroupSpec":
        factors = tuple(self.factors[i] for i in idx)
        return GroupSpec(factors, self.samples if any(f.startswith("L") for f in factors) else 0)


@dataclass(frozen=True, eq=False)
class GroupPoint:
    spec: GroupSpec
    mats: tuple
    vel: tuple | None = None  # loop velocities d/dt, loop factors only

    def __post_init__(self):
        if len(self.mats) != len(self.spec):
            raise SpecMismatch(f"{len(self.mats)} matrices for spec {self.spec.factors}")

    @property
    def batch_shape(self) -> tuple[int, ...]:
        shapes = []
        for i, m in enumerate(self.mats):
            cut = 3 if self.spec.is_loop(i) else 2
            shapes.append(np.shape(m)[:-cut])
        return np.broadcast_shapes(*shapes) if shapes else ()


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Ambient tangent X_i = g_i A_i; ``rates`` holds dA_i/dt for loop factors."""

    at: GroupPoint
    mats: tuple
    rates: tuple | None = None

    def __post_init__(self):
        if len(self.mats) != len(self.at.spec):
            raise SpecMismatch("tangent arity does not match its base point")

    def left(self) -> tuple:
        """Left-trivialized components g_i^{-1} X_i."""
        return tuple(dagger(g) @ x for g, x in zip(self.at.mats, self.mats))

    def __add__(self, other: "TangentVector") -> "TangentVector":
        rates = None
        if self.rates is not None and other.rates is not None:
            rates = tuple(_add_opt(a, b) for a, b in zip(self.rates, other.rates))
        return TangentVector(self.at, tuple(a + b for a, b in zip(self.mats, other.mats)), rates)

    def scale(self, c) -> "TangentVector":
        rates = None if self.rates is None else tuple(None if r is None else c * r for r in self.rates)
        return TangentVector(self.at, tuple(c * m for m in self.mats), rates)


def _add_opt(a, b):
    if a is None or b is None:
        return None
    return a + b


def from_left(at: GroupPoint, algebra: Sequence[np.ndarray], rates=None) -> TangentVector:
    return TangentVector(at, tuple(g @ a for g, a in zip(at.mats, algebra)), rates)


def zero_tangent(at: GroupPoint) -> TangentVector:
    return TangentVector(at, tuple(np.zeros_like(g) for g in at.mats))


def identity(spec: GroupSpec) -> GroupPoint:
    if spec.has_loops:
        raise ValueError("use loopspace.constant_loop for loop factors")
    return GroupPoint(spec, tuple(np.eye(spec.dim(i), dtype=complex) for i in range(len(spec))))


def point(spec: GroupSpec, *mats) -> GroupPoint:
    return GroupPoint(spec, tuple(np.asarray(m, dtype=complex) for m in mats))


# ---------------------------------------------------------------------------
# membership


def membership_residual(kind: str, g: np.ndarray) -> np.ndarray:
    n = g.shape[-1]
    unit = np.abs(dagger(g) @ g - np.eye(n)).max(axis=(-1, -2))
    if kind in ("SU2", "PU2"):
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        return np.maximum(unit, np.abs(det - 1))
    return unit


def is_member(p: GroupPoint, tol: float = MEMBERSHIP_TOL) -> bool:
    return all(np.all(membership_residual(p.spec.base(i), g) < tol) for i, g in enumerate(p.mats))


def algebra_residual(kind: str, a: np.ndarray) -> np.ndarray:
    """Distance of ``a`` from the Lie algebra of ``kind``."""
    skew = np.abs(a + dagger(a)).max(axis=(-1, -2))
    if kind in ("SU2", "PU2"):
        return np.maximum(skew, np.abs(trace(a)))
    return skew


def is_tangent(x: TangentVector, tol: float = ALGEBRA_TOL) -> bool:
    return all(np.all(algebra_residual(x.at.spec.base(i), a) < tol) for i, a in enumerate(x.left()))


# ---------------------------------------------------------------------------
# sampling


def split_rngs(seed: int, stream: int, n: int) -> list[np.random.Generator]:
    """One independent generator per probe index."""
    return [np.random.default_rng([seed, stream, i]) for i in range(n)]


def _sample_factor(kind: str, rng: np.random.Generator) -> np.ndarray:
    if kind == "U1":
        return np.array([[np.exp(1j * rng.uniform(0, 2 * np.pi))]])
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    g = q[0] * I2 + 1j * (q[1] * SIGMA1 + q[2] * SIGMA2 + q[3] * SIGMA3)
    if kind == "U2":
        g = g * np.exp(1j * rng.uniform(0, 2 * np.pi))
    return g


def sample_point(spec: GroupSpec, rng: np.random.Generator) -> GroupPoint:
    """Haar-distributed point on a product of finite-dimensional factors."""
    if spec.has_loops:
        raise ValueError("use loopspace.sample_loop_point for loop factors")
    return GroupPoint(spec, tuple(_sample_factor(spec.base(i), rng) for i in range(len(spec))))


def sample_algebra(spec: GroupSpec, rng: np.random.Generator) -> tuple:
    out = []
    for i in range(len(spec)):
        basis = spec.basis(i)
        c = rng.standard_normal(len(basis))
        out.append(sum(ci * b for ci, b in zip(c, basis)))
    return tuple(out)


def sample_tangent(at: GroupPoint, rng: np.random.Generator) -> TangentVector:
    return from_left(at, sample_algebra(at.spec, rng))


def stack_points(points: Sequence[GroupPoint]) -> GroupPoint:
    spec = points[0].spec
    mats = tuple(np.stack([p.mats[i] for p in points]) for i in range(len(spec)))
    vel = None
    if points[0].vel is not None:
        vel = tuple(np.stack([p.vel[i] for p in points]) for i in range(len(spec)))
    return GroupPoint(spec, mats, vel)


def stack_tangents(at: GroupPoint, tangents: Sequence[TangentVector]) -> TangentVector:
    n = len(at.spec)
    mats = tuple(np.stack([t.mats[i] for t in tangents]) for i in range(n))
    rates = None
    if tangents[0].rates is not None:
        rates = tuple(None if tangents[0].rates[i] is None else np.stack([t.rates[i] for t in tangents])
                      for i in range(n))
    return TangentVector(at, mats, rates)


# ---------------------------------------------------------------------------
# arithmetic


def _check_same(a: GroupPoint, b: GroupPoint):
    if a.spec != b.spec:
        raise SpecMismatch(f"{a.spec.factors} vs {b.spec.factors}")


def multiply(a: GroupPoint, b: GroupPoint) -> GroupPoint:
    _check_same(a, b)
    return GroupPoint(a.spec, tuple(x @ y for x, y in zip(a.mats, b.mats)))


def inverse(a: GroupPoint) -> GroupPoint:
    return GroupPoint(a.spec, tuple(dagger(x) for x in a.mats))


def projective_equal(a: GroupPoint, b: GroupPoint, tol: float = 1e-10) -> bool:
    """Factor-wise equality up to a unit scalar."""
    _check_same(a, b)
    for x, y in zip(a.mats, b.mats):
        n = x.shape[-1]
        lam = trace(dagger(y) @ x) / n
        if np.any(np.abs(np.abs(lam) - 1) > tol):
            return False
        if np.any(np.abs(x - lam[..., None, None] * y) > tol):
            return False
    return True


def flip_representatives(p: GroupPoint, signs: Sequence[int]) -> GroupPoint:
    return GroupPoint(p.spec, tuple(s * m for s, m in zip(signs, p.mats)), p.vel)


# ---------------------------------------------------------------------------
# circle actions


@dataclass(frozen=True)
class CircleAction:
    """S^1 acting on matrix factors by conjugation through ``embed``.

    ``embed(z)`` maps (..., 1, 1) circle arrays to (..., n, n) matrices and
    ``d_embed(z, w)`` is its exact differential.
    """

    embed: Callable[[np.ndarray], np.ndarray]
    d_embed: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = field(default="adjoint")

    def act(self, z: np.ndarray, g: np.ndarray) -> np.ndarray:
        e = self.embed(z)
        return e @ g @ np.linalg.inv(e)

    def d_act(self, z, w, g, x) -> np.ndarray:
        """Differential of (z, g) -> e(z) g e(z)^{-1} along (w, x)."""
        e = self.embed(z)
        einv = np.linalg.inv(e)
        de = self.d_embed(z, w)
        return de @ g @ einv + e @ x @ einv - e @ g @ einv @ de @ einv


def _diag_embed(z):
    zz = z[..., 0, 0]
    out = np.zeros(zz.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = zz
    out[..., 1, 1] = 1 / zz
    return out


def _diag_d_embed(z, w):
    zz, ww = np.broadcast_arrays(z[..., 0, 0], w[..., 0, 0])
    out = np.zeros(zz.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = ww
    out[..., 1, 1] = -ww / zz**2
    return out


def adjoint_circle_action() -> CircleAction:
    """Conjugation by z -> diag(z, 1/z) on SU(2)/PU(2)/U(2) factors."""
    return CircleAction(_diag_embed, _diag_d_embed, "adjoint-diag")


def trivial_circle_action() -> CircleAction:
    one = lambda z: np.broadcast_to(I2, z.shape[:-2] + (2, 2)).astype(complex)
    zero = lambda z, w: np.zeros(np.broadcast_shapes(z.shape, w.shape)[:-2] + (2, 2), dtype=complex)
    return CircleAction(one, zero, "trivial")
