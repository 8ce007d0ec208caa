"""Convex bodies given by membership (and optionally separation) oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from . import kernels
from .errors import ConfigError


def log_unit_ball_volume(n: int, p: float = 2.0) -> float:
    """log Vol(B_p^n); ``p=inf`` is the cube [-1, 1]^n."""
    if math.isinf(p):
        return n * math.log(2.0)
    return n * (math.log(2.0) + gammaln(1.0 + 1.0 / p)) - gammaln(1.0 + n / p)


@dataclass(frozen=True)
class ConstraintProgram:
    """Half-spaces ``hA x <= hb`` intersected with norm balls ``|nL_j (x - nc_j)|_{p_j} <= 1``."""

    hA: np.ndarray
    hb: np.ndarray
    nL: np.ndarray
    nc: np.ndarray
    npow: np.ndarray

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((0, n)), np.zeros(0), np.zeros((0, n, n)), np.zeros((0, n)), np.zeros(0))

    def kernel_args(self, center=None, radius=0.0):
        n = self.hA.shape[1]
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        return (self.hA, self.hb, self.nL, self.nc, self.npow, c, float(radius))

    def with_halfspaces(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        return replace(self, hA=np.vstack([self.hA, A]), hb=np.concatenate([self.hb, b]))

    def with_norm(self, L, c, p):
        return replace(
            self,
            nL=np.concatenate([self.nL, np.asarray(L, dtype=float)[None]]),
            nc=np.vstack([self.nc, np.asarray(c, dtype=float)[None]]),
            npow=np.concatenate([self.npow, [float(p)]]),
        )

    def image(self, T, shift):
        """Program of {T x + shift : x in K}."""
        Tinv = np.linalg.inv(T)
        hA = self.hA @ Tinv
        hb = self.hb + hA @ shift
        nL = np.einsum("kij,jl->kil", self.nL, Tinv) if self.nL.size else self.nL.copy()
        nc = self.nc @ T.T + shift if self.nc.size else self.nc.copy()
        return ConstraintProgram(hA, hb, nL, nc, self.npow.copy())

    def separate(self, x):
        """A violated half-space ``(a, b)`` with ``a.y <= b`` on K and ``a.x > b``, or None."""
        if self.hA.shape[0]:
            viol = self.hA @ x - self.hb
            i = int(np.argmax(viol))
            if viol[i] > 0:
                return self.hA[i].copy(), float(self.hb[i])
        for L, c, p in zip(self.nL, self.nc, self.npow):
            y = L @ (x - c)
            if math.isinf(p):
                nrm = np.max(np.abs(y))
                if nrm <= 1.0:
                    continue
                g = np.zeros_like(y)
                i = int(np.argmax(np.abs(y)))
                g[i] = np.sign(y[i])
            else:
                nrm = float(np.sum(np.abs(y) ** p) ** (1.0 / p))
                if nrm <= 1.0:
                    continue
                g = np.sign(y) * (np.abs(y) / nrm) ** (p - 1.0)
            a = L.T @ g
            return a, float(1.0 + a @ c)
        return None


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Membership oracle plus a certified sandwich around ``interior_point``.

    ``membership`` takes a ``(k, n)`` array and returns ``k`` booleans. The
    certificates promise ``B(interior_point, r_in) ⊂ K ⊂ B(interior_point, R_out)``.
    """

    dim: int
    membership: Callable[[np.ndarray], np.ndarray]
    interior_point: np.ndarray
    r_in: float
    R_out: float
    separation: Optional[Callable] = None
    program: Optional[ConstraintProgram] = None
    volume: Optional[float] = None
    descriptor: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.r_in > 0):
            raise ConfigError("convex body needs a positive inner-radius certificate")
        if self.R_out < self.r_in:
            raise ConfigError("outer radius below inner radius")

    def contains(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return bool(self.membership(X[None])[0])
        return np.asarray(self.membership(X), dtype=bool)

    def separate(self, x):
        if self.separation is None:
            raise NotImplementedError("body has no separation oracle")
        return self.separation(np.asarray(x, dtype=float))

    def affine_image(self, T, shift=None):
        T = np.asarray(T, dtype=float)
        n = self.dim
        shift = np.zeros(n) if shift is None else np.asarray(shift, dtype=float)
        sv = np.linalg.svd(T, compute_uv=False)
        x0 = T @ self.interior_point + shift
        vol = None if self.volume is None else self.volume * abs(np.linalg.det(T))
        if self.program is not None:
            return _from_program(self.program.image(T, shift), x0, self.r_in * sv[-1],
                                 self.R_out * sv[0], vol, f"affine({self.descriptor})")
        Tinv = np.linalg.inv(T)
        inner = self.membership

        def member(Y):
            return inner((np.asarray(Y) - shift) @ Tinv.T)

        return ConvexBody(n, member, x0, self.r_in * sv[-1], self.R_out * sv[0],
                          volume=vol, descriptor=f"affine({self.descriptor})")

    def scaled(self, s: float):
        return self.affine_image(s * np.eye(self.dim))

    def intersect_halfspaces(self, A, b):
        """K ∩ {A x <= b}; the interior point must stay strictly inside."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        slack = (b - A @ self.interior_point) / np.linalg.norm(A, axis=1)
        if np.any(slack <= 0):
            raise ConfigError("interior point not strictly inside the added half-spaces")
        r_in = min(self.r_in, float(slack.min()))
        if self.program is not None:
            return _from_program(self.program.with_halfspaces(A, b), self.interior_point, r_in,
                                 self.R_out, None, f"{self.descriptor}&halfspaces")
        inner = self.membership

        def member(X):
            X = np.asarray(X)
            return inner(X) & np.all(X @ A.T <= b, axis=1)

        return ConvexBody(self.dim, member, self.interior_point, r_in, self.R_out,
                          descriptor=f"{self.descriptor}&halfspaces")


def _from_program(prog, x0, r_in, R_out, volume, descriptor):
    args = prog.kernel_args()

    def member(X):
        return kernels.inside_many(np.atleast_2d(X), args)

    return ConvexBody(
        dim=prog.hA.shape[1],
        membership=member,
        interior_point=np.asarray(x0, dtype=float),
        r_in=float(r_in),
        R_out=float(R_out),
        separation=prog.separate,
        program=prog,
        volume=volume,
        descriptor=descriptor,
    )


def ball(n, radius=1.0, center=None):
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    prog = ConstraintProgram.empty(n).with_norm(np.eye(n) / radius, c, 2.0)
    vol = math.exp(log_unit_ball_volume(n) + n * math.log(radius))
    return _from_program(prog, c, radius, radius, vol, f"ball:n={n},radius={radius!r}")


def cube(n, half_side=1.0):
    prog = ConstraintProgram.empty(n).with_norm(np.eye(n) / half_side, np.zeros(n), math.inf)
    return _from_program(prog, np.zeros(n), half_side, half_side * math.sqrt(n),
                         (2.0 * half_side) ** n, f"cube:n={n},half={half_side!r}")


def lp_ball(n, p, radius=1.0):
    if p < 1:
        raise ConfigError("l_p balls need p >= 1")
    if math.isinf(p):
        return cube(n, radius)
    expo = 0.5 - 1.0 / p
    r_in = radius * (n ** expo if p <= 2 else 1.0)
    R_out = radius * (1.0 if p <= 2 else n ** expo)
    prog = ConstraintProgram.empty(n).with_norm(np.eye(n) / radius, np.zeros(n), p)
    vol = math.exp(log_unit_ball_volume(n, p) + n * math.log(radius))
    return _from_program(prog, np.zeros(n), r_in, R_out, vol, f"lp:n={n},p={p!r},radius={radius!r}")


def simplex(n):
    """Standard simplex {x >= 0, sum x <= 1}, certified around its incenter."""
    A = np.vstack([-np.eye(n), np.ones((1, n))])
    b = np.concatenate([np.zeros(n), [1.0]])
    a = 1.0 / (n + math.sqrt(n))
    x0 = np.full(n, a)
    R = max(a * math.sqrt(n), math.sqrt((1 - a) ** 2 + (n - 1) * a * a))
    prog = ConstraintProgram.empty(n).with_halfspaces(A, b)
    return _from_program(prog, x0, a, R, math.exp(-gammaln(n + 1)), f"simplex:n={n}")


def ellipsoid(axes, center=None):
    axes = np.asarray(axes, dtype=float)
    n = axes.size
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    prog = ConstraintProgram.empty(n).with_norm(np.diag(1.0 / axes), c, 2.0)
    vol = math.exp(log_unit_ball_volume(n) + float(np.sum(np.log(axes))))
    return _from_program(prog, c, axes.min(), axes.max(), vol,
                         "ellipsoid:axes=" + ",".join(repr(float(a)) for a in axes))


def from_membership(n, membership, interior_point, r_in, R_out, volume=None, descriptor="custom"):
    """Plug-in body from a vectorized membership callable and its certificates."""
    return ConvexBody(n, membership, np.asarray(interior_point, dtype=float), float(r_in),
                      float(R_out), volume=volume, descriptor=descriptor)


def parse_body(text: str) -> ConvexBody:
    """Built-in body from a descriptor such as ``cube:n=4,half=1`` or ``ellipsoid:axes=1,4``."""
    kind, _, rest = text.strip().partition(":")
    kv = {}
    if kind == "ellipsoid":
        _, _, axes = rest.partition("=")
        try:
            return ellipsoid([float(a) for a in axes.split(",")])
        except ValueError as exc:
            raise ConfigError(f"bad ellipsoid descriptor {text!r}") from exc
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        kv[k.strip()] = v.strip()
    try:
        n = int(kv.pop("n"))
        if kind == "ball":
            body = ball(n, float(kv.pop("radius", 1.0)))
        elif kind == "cube":
            body = cube(n, float(kv.pop("half", 1.0)))
        elif kind == "simplex":
            body = simplex(n)
        elif kind == "lp":
            body = lp_ball(n, float(kv.pop("p")), float(kv.pop("radius", 1.0)))
        else:
            raise ConfigError(f"unknown body kind {kind!r}")
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad body descriptor {text!r}: {exc}") from exc
    if kv:
        raise ConfigError(f"unknown body keys {sorted(kv)} in {text!r}")
    return body
