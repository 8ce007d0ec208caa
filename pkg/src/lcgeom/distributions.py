"""Exact samplers and densities for the test families.

Every family has a *raw* form (the textbook density) and an *isotropic*
form obtained by the exact affine normalization ``z = Σ^{-1/2}(x - μ)``
with population constants, never with batch statistics. An optional extra
affine image ``A z + b`` rides on top, which is how invariance tests build
non-isotropic positions of the same law.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from . import bodies
from .errors import ConfigError
from .numerics import as_stream, inv_sqrt_sym

FAMILIES = (
    "gaussian",
    "product_exponential",
    "uniform_cube",
    "uniform_simplex",
    "uniform_lp_ball",
    "sconcave",
    "oracle_uniform",
)
UNIFORM_FAMILIES = ("uniform_cube", "uniform_simplex", "uniform_lp_ball", "oracle_uniform")


class UnnormalizedDensityWarning(UserWarning):
    """Log-density returned up to an unknown additive constant."""


@dataclass(frozen=True)
class DistributionSpec:
    family: str
    dim: int
    isotropic: bool = False
    p: Optional[float] = None
    r: Optional[float] = None
    gauge: str = "l2"
    body: Optional[bodies.ConvexBody] = None
    walk_budget: int = 0
    linear: Optional[tuple] = None
    shift: Optional[tuple] = None

    def __post_init__(self):
        for name in ("p", "r"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, float(v))
        object.__setattr__(self, "dim", int(self.dim))
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if int(self.dim) < 1:
            raise ConfigError("dimension must be >= 1")
        if self.family == "uniform_lp_ball":
            if self.p is None or not (self.p >= 1):
                raise ConfigError("uniform_lp_ball needs p in [1, inf]")
        if self.family == "sconcave":
            if self.r is None or not (self.r > 0):
                raise ConfigError("sconcave needs r > 0")
            if self.gauge not in ("l2", "l1"):
                raise ConfigError(f"unsupported gauge {self.gauge!r}")
            if self.isotropic and not self.r > 2:
                raise ConfigError(
                    "moment-existence rule: |X| has moments only of order p < r, so an "
                    f"isotropic s-concave law needs r > 2 (got r={self.r})"
                )
        if self.family == "oracle_uniform":
            if self.body is None:
                raise ConfigError("oracle_uniform needs a body")
            if not self.body.r_in > 0:
                raise ConfigError("oracle_uniform needs a positive inner-radius certificate")
            if self.body.dim != self.dim:
                raise ConfigError("body dimension does not match spec dimension")
            if self.isotropic:
                raise ConfigError("oracle bodies have no closed-form isotropic map; round the body first")
        if (self.linear is None) != (self.shift is None):
            raise ConfigError("linear and shift must be given together")

    # -- identity -----------------------------------------------------------

    @property
    def log_concave(self) -> bool:
        return self.family != "sconcave"

    def to_text(self) -> str:
        lines = [f"family = {self.family}", f"n = {self.dim}"]
        if self.p is not None:
            lines.append(f"p = {self.p!r}")
        if self.r is not None:
            lines.append(f"r = {self.r!r}")
        if self.family == "sconcave":
            lines.append(f"gauge = {self.gauge}")
        lines.append(f"isotropic = {'true' if self.isotropic else 'false'}")
        if self.family == "oracle_uniform":
            lines.append(f"body = {self.body.descriptor}")
            lines.append(f"walk-budget = {self.walk_budget}")
        if self.linear is not None:
            lines.append("linear = " + "|".join(",".join(repr(v) for v in row) for row in self.linear))
            lines.append("shift = " + ",".join(repr(v) for v in self.shift))
        return "\n".join(lines)

    @property
    def spec_id(self) -> str:
        return self.to_text().replace("\n", "; ")

    def transformed(self, A, b=None) -> "DistributionSpec":
        """Law of ``A X + b`` for ``X`` drawn from this spec."""
        A = np.asarray(A, dtype=float)
        b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=float)
        A0, b0 = self._outer()
        A1, b1 = A @ A0, A @ b0 + b
        return DistributionSpec(
            self.family, self.dim, self.isotropic, self.p, self.r, self.gauge, self.body,
            self.walk_budget, tuple(map(tuple, A1.tolist())), tuple(b1.tolist()),
        )

    def _outer(self):
        if self.linear is None:
            return np.eye(self.dim), np.zeros(self.dim)
        return np.array(self.linear, dtype=float), np.array(self.shift, dtype=float)


def parse_spec(text: str, body: Optional[bodies.ConvexBody] = None) -> DistributionSpec:
    """Inverse of :meth:`DistributionSpec.to_text` (also accepts ``;`` separators)."""
    kv = {}
    for raw in text.replace(";", "\n").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        k, sep, v = line.partition("=")
        if not sep:
            raise ConfigError(f"malformed spec line {raw!r}")
        kv[k.strip()] = v.strip()
    return spec_from_mapping(kv, body)


def spec_from_mapping(kv: dict, body=None) -> DistributionSpec:
    kv = dict(kv)
    try:
        family = kv.pop("family")
        n = int(kv.pop("n"))
    except KeyError as exc:
        raise ConfigError(f"spec missing key {exc}") from exc
    iso = kv.pop("isotropic", "false").lower() in ("1", "true", "yes")
    p = kv.pop("p", None)
    r = kv.pop("r", None)
    gauge = kv.pop("gauge", "l2")
    walk = int(kv.pop("walk-budget", 0))
    desc = kv.pop("body", None)
    linear = kv.pop("linear", None)
    shift = kv.pop("shift", None)
    if kv:
        raise ConfigError(f"unknown spec keys {sorted(kv)}")
    if desc is not None and body is None:
        body = bodies.parse_body(desc)
    lin = sh = None
    if linear is not None:
        lin = tuple(tuple(float(v) for v in row.split(",")) for row in linear.split("|") if row)
        sh = tuple(float(v) for v in (shift or "").split(","))
    try:
        return DistributionSpec(
            family, n, iso,
            p=None if p is None else float(p),
            r=None if r is None else float(r),
            gauge=gauge, body=body, walk_budget=walk, linear=lin, shift=sh,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# raw family constants


def lp_coordinate_variance(n: int, p: float) -> float:
    """E x_1^2 for X uniform on the unit l_p ball of R^n."""
    if math.isinf(p):
        return 1.0 / 3.0
    return math.exp(
        gammaln(3.0 / p) - gammaln(1.0 / p) + gammaln(n / p + 1.0) - gammaln((n + 2.0) / p + 1.0)
    )


def _sconcave_log_norm(n: int, r: float, gauge: str) -> float:
    """log c in c (1 + |x|)^{-n-r}; radial law of |x| is BetaPrime(n, r)."""
    log_vol = bodies.log_unit_ball_volume(n, 2.0 if gauge == "l2" else 1.0)
    log_beta = gammaln(n) + gammaln(r) - gammaln(n + r)
    return -(log_vol + math.log(n) + log_beta)


def _raw_mean(spec):
    n = spec.dim
    if spec.family == "uniform_simplex":
        return np.full(n, 1.0 / (n + 1))
    if spec.family == "sconcave" and not spec.r > 1:
        return np.full(n, np.nan)
    if spec.family == "oracle_uniform":
        raise ValueError("mean of an oracle body is not known in closed form")
    return np.zeros(n)


def _raw_cov(spec):
    n = spec.dim
    f = spec.family
    if f == "gaussian":
        return np.eye(n)
    if f == "product_exponential":
        return 2.0 * np.eye(n)
    if f == "uniform_cube":
        return np.eye(n) / 3.0
    if f == "uniform_lp_ball":
        return lp_coordinate_variance(n, spec.p) * np.eye(n)
    if f == "uniform_simplex":
        scale = 1.0 / ((n + 1) ** 2 * (n + 2))
        return scale * ((n + 1) * np.eye(n) - np.ones((n, n)))
    if f == "sconcave":
        r = spec.r
        if not r > 2:
            return np.full((n, n), np.inf)
        er2 = n * (n + 1) / ((r - 1) * (r - 2))
        per = er2 / n if spec.gauge == "l2" else er2 * 2.0 / (n * (n + 1))
        return per * np.eye(n)
    raise ValueError("covariance of an oracle body is not known in closed form")


def _iso_whitener(spec):
    """(W, mu) with W = Σ^{-1/2} for the raw law; identity when not isotropic."""
    n = spec.dim
    if not spec.isotropic:
        return np.eye(n), np.zeros(n)
    mu = _raw_mean(spec)
    f = spec.family
    if f == "uniform_simplex":
        # eigenvalues: 1/((n+1)(n+2)) off the ones-direction, 1/((n+1)^2(n+2)) along it
        P1 = np.ones((n, n)) / n
        W = math.sqrt((n + 1) * (n + 2)) * (np.eye(n) - P1) + (n + 1) * math.sqrt(n + 2) * P1
        return W, mu
    cov = _raw_cov(spec)
    if np.allclose(cov, np.diag(np.diag(cov))):
        return np.diag(1.0 / np.sqrt(np.diag(cov))), mu
    return inv_sqrt_sym(cov), mu


def affine_from_raw(spec):
    """(M, c) such that a spec draw is ``M x_raw + c``."""
    W, mu = _iso_whitener(spec)
    A, b = spec._outer()
    M = A @ W
    return M, b - M @ mu


def mean(spec) -> np.ndarray:
    M, c = affine_from_raw(spec)
    return M @ _raw_mean(spec) + c


def covariance(spec) -> np.ndarray:
    M, _ = affine_from_raw(spec)
    return M @ _raw_cov(spec) @ M.T


def raw_support_body(spec) -> bodies.ConvexBody:
    n = spec.dim
    f = spec.family
    if f == "uniform_cube":
        return bodies.cube(n)
    if f == "uniform_lp_ball":
        return bodies.lp_ball(n, spec.p)
    if f == "uniform_simplex":
        return bodies.simplex(n)
    if f == "oracle_uniform":
        return spec.body
    raise ValueError(f"{f} is not a uniform measure on a body")


def support_body(spec) -> bodies.ConvexBody:
    M, c = affine_from_raw(spec)
    raw = raw_support_body(spec)
    if np.allclose(M, np.eye(spec.dim)) and np.allclose(c, 0.0):
        return raw
    return raw.affine_image(M, c)


def volume(spec) -> Optional[float]:
    """Volume of the support of a uniform spec (None if unknown)."""
    raw = raw_support_body(spec).volume
    if raw is None:
        return None
    M, _ = affine_from_raw(spec)
    return raw * abs(np.linalg.det(M))


# ---------------------------------------------------------------------------
# densities


def _raw_logpdf(spec, X):
    n = spec.dim
    f = spec.family
    if f == "gaussian":
        return -0.5 * n * math.log(2 * math.pi) - 0.5 * np.sum(X * X, axis=1)
    if f == "product_exponential":
        return -n * math.log(2.0) - np.sum(np.abs(X), axis=1)
    if f == "sconcave":
        norm = np.linalg.norm(X, axis=1) if spec.gauge == "l2" else np.sum(np.abs(X), axis=1)
        return _sconcave_log_norm(n, spec.r, spec.gauge) - (n + spec.r) * np.log1p(norm)
    body = raw_support_body(spec)
    if body.volume is None:
        warnings.warn("oracle body volume unknown: log-density is exact only up to an "
                      "additive constant", UnnormalizedDensityWarning, stacklevel=3)
        level = 0.0
    else:
        level = -math.log(body.volume)
    return np.where(body.contains(X), level, -np.inf)


def log_density_many(spec, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    M, c = affine_from_raw(spec)
    Xr = np.linalg.solve(M, (X - c).T).T
    _, logdet = np.linalg.slogdet(M)
    return _raw_logpdf(spec, Xr) - logdet


def log_density(spec, x) -> float:
    """Natural log of the normalized density at ``x`` (``-inf`` off the support)."""
    return float(log_density_many(spec, np.asarray(x, dtype=float)[None])[0])


@dataclass(frozen=True)
class LogConcavityResult:
    passed: bool
    witness: Optional[tuple]
    checked: int


def midpoint_logconcavity(target, pairs, rel_slack: float = 1e-9) -> LogConcavityResult:
    """Check f((x+y)/2)^2 >= f(x) f(y) (1 - rel_slack) on every pair.

    ``target`` is a spec or a vectorized log-density callable.
    """
    logf: Callable = (lambda X: log_density_many(target, X)) if isinstance(
        target, DistributionSpec) else target
    checked = 0
    slack = math.log1p(-rel_slack)
    for x, y in pairs:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lx, ly, lm = np.asarray(logf(np.vstack([x, y, 0.5 * (x + y)])), dtype=float)
        checked += 1
        rhs = lx + ly
        if rhs == -np.inf:
            continue
        if 2.0 * lm < rhs + slack:
            return LogConcavityResult(False, (x, y), checked)
    return LogConcavityResult(True, None, checked)


@dataclass(frozen=True)
class SConcaveParams:
    n: int
    r: float
    s: float
    beta: float
    gamma: float
    label: str = "s-concave"


def sconcave_params(n: int, r: float) -> SConcaveParams:
    """(s, beta, gamma) for density f^{-beta}: s = -1/r, beta = n + r, 1/gamma = 1/s - n."""
    if not r > 0:
        raise ValueError("r must be positive")
    if math.isinf(r):
        return SConcaveParams(n, r, 0.0, math.inf, 0.0, "log-concave limit")
    s = -1.0 / r
    return SConcaveParams(n, r, s, n + r, s / (1.0 - n * s))


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SampleBatch:
    data: np.ndarray
    spec_id: str
    seed: int
    walk_budget: int = 0
    stream: str = ""

    @property
    def N(self):
        return self.data.shape[0]


def _sample_raw(spec, N, gen):
    n = spec.dim
    f = spec.family
    if f == "gaussian":
        return gen.standard_normal((N, n))
    if f == "product_exponential":
        return gen.laplace(0.0, 1.0, (N, n))
    if f == "uniform_cube" or (f == "uniform_lp_ball" and math.isinf(spec.p)):
        return gen.uniform(-1.0, 1.0, (N, n))
    if f == "uniform_simplex":
        E = gen.standard_exponential((N, n + 1))
        return E[:, :n] / E.sum(axis=1, keepdims=True)
    if f == "uniform_lp_ball":
        p = spec.p
        G = gen.standard_gamma(1.0 / p, (N, n)) ** (1.0 / p)
        G *= np.where(gen.random((N, n)) < 0.5, -1.0, 1.0)
        W = gen.standard_exponential(N)
        return G / ((np.sum(np.abs(G) ** p, axis=1) + W) ** (1.0 / p))[:, None]
    if f == "sconcave":
        R = gen.standard_gamma(float(n), N) / gen.standard_gamma(float(spec.r), N)
        if spec.gauge == "l2":
            D = gen.standard_normal((N, n))
            D /= np.linalg.norm(D, axis=1, keepdims=True)
        else:
            D = gen.standard_exponential((N, n))
            D *= np.where(gen.random((N, n)) < 0.5, -1.0, 1.0)
            D /= np.sum(np.abs(D), axis=1, keepdims=True)
        return R[:, None] * D
    if f == "oracle_uniform":
        from .volume import oracle_sample

        return oracle_sample(spec.body, N, spec.walk_budget, gen)
    raise AssertionError(f)


def sample_array(spec: DistributionSpec, N: int, gen: np.random.Generator) -> np.ndarray:
    """``N`` i.i.d. rows from ``spec`` using an already-built generator."""
    if N < 1:
        raise ValueError("N must be >= 1")
    X = _sample_raw(spec, int(N), gen)
    if not spec.isotropic and spec.linear is None:
        return X
    M, c = affine_from_raw(spec)
    return X @ M.T + c


def sample(spec: DistributionSpec, N: int, rng) -> SampleBatch:
    rng = as_stream(rng)
    X = sample_array(spec, N, rng.generator())
    return SampleBatch(X, spec.spec_id, rng.seed, spec.walk_budget, rng.ident())


def family_spec(name: str, n: int, isotropic: bool = True, **kw) -> DistributionSpec:
    """Shorthand used by experiments: ``l1_ball`` / ``l2_ball`` / ``linf_ball`` map to l_p balls."""
    aliases = {"cube": "uniform_cube", "simplex": "uniform_simplex",
               "exponential": "product_exponential"}
    if name.startswith("l") and name.endswith("_ball"):
        p = name[1:-5]
        return DistributionSpec("uniform_lp_ball", n, isotropic,
                                p=math.inf if p == "inf" else float(p), **kw)
    return DistributionSpec(aliases.get(name, name), n, isotropic, **kw)


LOG_CONCAVE_TEST_FAMILIES = ("gaussian", "product_exponential", "uniform_cube",
                             "uniform_simplex", "l1_ball", "l2_ball")

