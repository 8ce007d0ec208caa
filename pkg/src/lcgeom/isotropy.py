"""Isotropic position, isotropic constants, Ball bodies and central sections."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from .errors import ConfigError, NonConvergenceError
from .numerics import (AffineMap, as_stream, integrate_halfline, inv_sqrt_sym,
                       orthonormal_complement, replicate, summarize, unit_directions)

__all__ = [
    "AffineMap", "empirical_isotropy", "IsotropicConstant", "isotropic_constant_body",
    "isotropic_constant_density", "BallBody", "ball_body_radial", "ball_body_midpoint_check",
    "section_volume", "write_radial_csv",
]


def empirical_isotropy(batch) -> AffineMap:
    """Affine map sending the batch to empirical mean 0 and covariance identity.

    The covariance uses the 1/N normalization, so the image is isotropic
    exactly (up to rounding).
    """
    X = np.asarray(getattr(batch, "data", batch), dtype=float)
    N, n = X.shape
    if N <= n:
        raise ValueError(f"need N > n samples (got N={N}, n={n})")
    mu = X.mean(axis=0)
    Y = X - mu
    cov = Y.T @ Y / N
    try:
        W = inv_sqrt_sym(cov)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("empirical covariance is singular (rank-deficient batch)") from exc
    return AffineMap(W, -W @ mu)


# ---------------------------------------------------------------------------
# isotropic constants


@dataclass(frozen=True)
class IsotropicConstant:
    value: float
    ci: tuple
    exact: bool
    volume: float

    def __float__(self):
        return self.value


def _log_det_cov(cov):
    sign, logdet = np.linalg.slogdet(cov)
    if not np.all(np.isfinite(cov)) or sign <= 0:
        raise ValueError("covariance is singular or infinite")
    return logdet


def isotropic_constant_body(spec, volume_oracle=None, rng=0, *, samples: int = 20000):
    """L_K = det(Cov)^{1/(2n)} / Vol(K)^{1/n} for a uniform spec.

    In isotropic position this is Vol(K)^{-1/n}. ``volume_oracle(body)`` may
    return a float or a volume estimate with ``value`` and ``rel_ci``; when
    the volume or covariance is not known in closed form the result carries
    a confidence interval.
    """
    if spec.family not in dist.UNIFORM_FAMILIES:
        raise ConfigError(f"L_K needs a uniform measure, got {spec.family}")
    n = spec.dim
    stream = as_stream(rng)
    exact = True
    try:
        logdet = _log_det_cov(dist.covariance(spec))
    except ValueError:
        X = dist.sample(spec, samples, stream.substream(0)).data
        logdet = _log_det_cov(np.cov(X.T, bias=True).reshape(n, n))
        exact = False
    rel = 0.0
    vol = dist.volume(spec) if volume_oracle is None else None
    if vol is None:
        if volume_oracle is None:
            from .volume import volume_multiphase

            def volume_oracle(body):
                return volume_multiphase(body, 0.1, 0.05, stream.substream(1))
        got = volume_oracle(dist.support_body(spec))
        if hasattr(got, "value"):
            vol, rel = float(got.value), float(got.rel_ci)
            exact = False
        else:
            vol = float(got)
    vol = float(vol)
    L = math.exp(logdet / (2 * n) - math.log(vol) / n)
    if exact:
        ci = (L, L)
    else:
        # Vol^{-1/n} moves by (1 -+ rel)^{-1/n}
        lo = L * (1 + rel) ** (-1.0 / n)
        hi = L * (1 - min(rel, 0.999)) ** (-1.0 / n)
        ci = (lo, hi)
    return IsotropicConstant(L, ci, exact, vol)


def isotropic_constant_density(spec) -> float:
    """L_f = det(Cov X)^{1/(2n)} f(E X)^{1/n}; equals f(0)^{1/n} for isotropic specs."""
    n = spec.dim
    logdet = _log_det_cov(dist.covariance(spec))
    m = dist.mean(spec)
    if not np.all(np.isfinite(m)):
        raise ValueError("mean is infinite")
    return math.exp(logdet / (2 * n) + dist.log_density(spec, m) / n)


# ---------------------------------------------------------------------------
# Ball bodies


def _support_radius(spec, theta, tol):
    body = dist.support_body(spec)
    reach = body.R_out + float(np.linalg.norm(body.interior_point)) + 1.0
    lo, hi = 0.0, reach
    if body.contains(hi * theta):
        raise NonConvergenceError("support ray escaped the outer-radius certificate")
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if body.contains(mid * theta):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class BallBody:
    """Star body K_p(f) = {x : p * int_0^inf t^{p-1} f(tx) dt >= f(0)}.

    ``radial(theta)`` is cached per direction.
    """

    spec: object
    p: float
    tol: float = 1e-10
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.p > 0:
            raise ConfigError("Ball body order p must be positive")
        self._log_f0 = dist.log_density(self.spec, np.zeros(self.spec.dim))
        if not math.isfinite(self._log_f0):
            raise ConfigError("Ball bodies need f(0) > 0")
        self._bounded = self.spec.family in dist.UNIFORM_FAMILIES

    def moment_integral(self, x) -> float:
        """p * int_0^inf t^{p-1} f(t x) dt / f(0)."""
        x = np.asarray(x, dtype=float)
        nx = float(np.linalg.norm(x))
        if nx == 0.0:
            return math.inf
        theta = x / nx
        p = self.p
        if self._bounded:
            rho = _support_radius(self.spec, theta, 1e-13)
            # density ratio is the indicator of the support
            return (rho / nx) ** p
        lf0 = self._log_f0
        spec = self.spec

        def g(u):
            if u == 0.0:
                return 0.0 if p > 1 else (1.0 if p == 1 else math.inf)
            return u ** (p - 1) * math.exp(dist.log_density(spec, u * theta) - lf0)

        try:
            val = integrate_halfline(g, self.tol)
        except NonConvergenceError as exc:
            raise NonConvergenceError(f"defining integral diverges along {theta}") from exc
        return p * val / nx ** p

    def radial(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        theta = theta / np.linalg.norm(theta)
        key = tuple(np.round(theta, 15))
        if key not in self._cache:
            self._cache[key] = self.moment_integral(theta) ** (1.0 / self.p)
        return self._cache[key]

    def contains(self, x, slack: float = 0.0) -> bool:
        return self.moment_integral(x) >= 1.0 - slack


def ball_body_radial(spec, p: float, theta, tol: float = 1e-10) -> float:
    """r(theta) = (p int_0^inf u^{p-1} f(u theta) du / f(0))^{1/p}."""
    return BallBody(spec, p, tol).radial(theta)


@dataclass(frozen=True)
class MidpointCheck:
    passed: int
    pairs: int
    worst: float


def ball_body_midpoint_check(spec, p: float, pairs: int = 1000, rng=0,
                             slack: float = 1e-9) -> MidpointCheck:
    """Midpoints of random boundary pairs (taken at r(theta)(1-1e-6)) must stay in K_p(f)."""
    gen = as_stream(rng).generator()
    K = BallBody(spec, p)
    T1 = unit_directions(pairs, spec.dim, gen)
    T2 = unit_directions(pairs, spec.dim, gen)
    passed = 0
    worst = math.inf
    for a, b in zip(T1, T2):
        x = K.radial(a) * (1 - 1e-6) * a
        y = K.radial(b) * (1 - 1e-6) * b
        m = 0.5 * (x + y)
        val = K.moment_integral(m) if np.linalg.norm(m) > 0 else math.inf
        worst = min(worst, val)
        passed += val >= 1.0 - slack
    return MidpointCheck(passed, pairs, worst)


def write_radial_csv(path, K: BallBody, thetas) -> None:
    """(theta_1..theta_n, r) rows for plotting."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"theta{i + 1}" for i in range(thetas.shape[1])] + ["r"])
        for t in thetas:
            w.writerow([repr(float(v)) for v in t] + [repr(K.radial(t))])


# ---------------------------------------------------------------------------
# sections


@dataclass(frozen=True)
class SectionVolume:
    value: float
    stderr: float
    ci: tuple
    replicas: int


def section_volume(body, theta, N: int = 200_000, rng=0, replicas: int = 16) -> SectionVolume:
    """(n-1)-volume of K ∩ theta^perp by rejection in a box on the hyperplane.

    The box has half-side R = |interior_point| + R_out, so it covers the whole
    section. Replicas give the error bar.
    """
    theta = np.asarray(theta, dtype=float)
    theta = theta / np.linalg.norm(theta)
    n = body.dim
    if not body.R_out > 0:
        raise ConfigError("section sampling needs a positive outer radius")
    R = float(np.linalg.norm(body.interior_point)) + body.R_out
    U = orthonormal_complement(theta)
    box = (2 * R) ** (n - 1)
    per = max(1, N // replicas)

    def one(stream):
        gen = stream.generator()
        Y = gen.uniform(-R, R, (per, n - 1))
        return box * float(np.mean(body.contains(Y @ U.T)))

    est = summarize(replicate(one, rng, replicas))
    return SectionVolume(est.value, est.stderr, est.ci, replicas)
