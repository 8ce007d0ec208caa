"""Boundary measure, half-space conductance, Cheeger lower bounds and Poincare quotients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import distributions as dist
from .errors import ConfigError
from .numerics import as_stream, norm_cdf, norm_ppf, replicate, summarize, unit_directions


# ---------------------------------------------------------------------------
# boundary measure


@dataclass(frozen=True)
class Halfspace:
    """{x : <theta, x> <= t}."""

    theta: np.ndarray
    t: float

    def expanded_count(self, X, eps):
        y = X @ (self.theta / np.linalg.norm(self.theta))
        return int(np.sum(y <= self.t + eps)), int(np.sum(y <= self.t))


@dataclass(frozen=True)
class CenteredBall:
    rho: float

    def expanded_count(self, X, eps):
        r = np.linalg.norm(X, axis=1)
        return int(np.sum(r <= self.rho + eps)), int(np.sum(r <= self.rho))


@dataclass(frozen=True)
class WholeSpace:
    def expanded_count(self, X, eps):
        return X.shape[0], X.shape[0]


@dataclass
class BoundaryEstimate:
    value: float
    stderr: float
    half_eps_value: float
    flags: list = field(default_factory=list)

    @property
    def ci(self):
        h = 1.959963984540054 * self.stderr
        return (self.value - h, self.value + h)


def boundary_measure(spec, S, eps: float = 0.01, N: int = 1_000_000, rng=0) -> BoundaryEstimate:
    """(mu(S + eps B) - mu(S)) / eps, with a second evaluation at eps/2 as a consistency check.

    For a half-space, S + eps B is the half-space shifted by eps; for a
    centered ball it is the ball of radius rho + eps.
    """
    if not 0 < eps <= 0.1:
        raise ConfigError("eps must lie in (0, 0.1]")
    X = dist.sample_array(spec, N, as_stream(rng).generator())
    big, base = S.expanded_count(X, eps)
    half, _ = S.expanded_count(X, eps / 2)
    p = (big - base) / N
    ph = (half - base) / N
    val = p / eps
    se = math.sqrt(max(p * (1 - p), 0.0) / N) / eps
    val_h = ph / (eps / 2)
    se_h = math.sqrt(max(ph * (1 - ph), 0.0) / N) / (eps / 2)
    flags = []
    # the half-step count is nested in the full one, so this is conservative
    if abs(val - val_h) > 3 * math.hypot(se, se_h) + 1e-12:
        flags.append("eps too large: estimate moved at eps/2")
    return BoundaryEstimate(val, se, val_h, flags)


def halfspace_expansion(spec, theta, alpha: float, eps: float, N: int = 1_000_000, rng=0):
    """Empirical mass of {<theta,x> <= Phi^{-1}(alpha) + eps}; returns (value, stderr)."""
    theta = np.asarray(theta, float) / np.linalg.norm(theta)
    y = dist.sample_array(spec, N, as_stream(rng).generator()) @ theta
    p = float(np.mean(y <= float(norm_ppf(alpha)) + eps))
    return p, math.sqrt(p * (1 - p) / N)


def gaussian_halfspace_profile(alpha: float, eps: float) -> float:
    """Phi(Phi^{-1}(alpha) + eps): the Gaussian measure of an eps-enlarged half-space."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    return float(norm_cdf(norm_ppf(alpha) + eps))


# ---------------------------------------------------------------------------
# half-space conductance


@dataclass
class CheegerEstimate:
    value: float
    argmin: tuple
    directions: int
    skipped: int
    label: str = "half-space conductance (upper bound for h)"
    flags: list = field(default_factory=list)
    curves: list = field(default_factory=list)


DEFAULT_T_GRID = tuple(np.round(np.arange(-3.0, 3.0001, 0.25), 10))


def _marginal_ratio(ys, sd, t_grid, bw, tol):
    """density/(F(1-F)) on the grid from the sorted marginal ``ys``; None if unstable."""
    N = ys.size

    def F(x):
        return np.searchsorted(ys, x, side="right") / N

    out = []
    for t in t_grid:
        x = t * sd
        h = bw * sd
        d1 = (F(x + h) - F(x - h)) / (2 * h)
        d2 = (F(x + h / 2) - F(x - h / 2)) / h
        Fx = F(x)
        if Fx <= 0 or Fx >= 1 or d1 <= 0:
            out.append(None)
            continue
        # relative standard error of the half-bandwidth estimate
        k2 = d2 * h * N
        if abs(d1 - d2) > tol * d1 + 3 * d2 / math.sqrt(max(k2, 1.0)):
            return None
        out.append((float(t), d1, Fx, d1 / (Fx * (1 - Fx))))
    return out


def halfspace_cheeger(spec, n_directions: int = 32, t_grid=DEFAULT_T_GRID, N: int = 1_000_000,
                      rng=0, *, bandwidth: float = 0.1, tol: float = 0.05,
                      keep_curves: bool = False) -> CheegerEstimate:
    """min over probed (theta, t) of density_theta(t) / (F_theta(t) (1 - F_theta(t))).

    Directions are the coordinate axes plus ``n_directions`` random ones. The
    t-grid and bandwidth are in units of the marginal standard deviation, so
    scaling the law by s divides the estimate by s exactly. A direction whose
    density estimate moves by more than ``tol`` (plus noise) when the
    bandwidth halves is skipped and flagged.
    """
    n = spec.dim
    stream = as_stream(rng)
    X = dist.sample_array(spec, N, stream.substream(0).generator())
    D = np.vstack([np.eye(n), unit_directions(n_directions, n, stream.substream(1).generator())])
    best, arg, skipped, curves = math.inf, None, 0, []
    for i, d in enumerate(D):
        y = X @ d
        y -= y.mean()
        sd = float(y.std())
        rows = _marginal_ratio(np.sort(y), sd, t_grid, bandwidth, tol)
        if rows is None:
            skipped += 1
            continue
        if keep_curves:
            curves.append((i, rows))
        for row in rows:
            if row is not None and row[3] < best:
                best, arg = row[3], (i, row[0])
    flags = [f"{skipped} direction(s) skipped: bandwidth instability"] if skipped else []
    return CheegerEstimate(best, arg, len(D), skipped, flags=flags, curves=curves)


@dataclass(frozen=True)
class LowerBounds:
    kls: float
    bobkov: float
    eldan: float
    gm: float
    label: str = "up to a universal constant (set to 1)"


def cheeger_lower_bounds(shell) -> LowerBounds:
    """1/E|X|, (Var |X|^2)^{-1/4}, n^{-1/3} (log n)^{-1/2} and n^{-5/12}."""
    for name in ("mean_norm", "var_norm_sq", "n"):
        if getattr(shell, name, None) is None:
            raise ValueError(f"shell statistics lack {name}")
    n = shell.n
    eldan = n ** (-1.0 / 3.0) / math.sqrt(math.log(n)) if n > 1 else math.nan
    return LowerBounds(1.0 / shell.mean_norm, shell.var_norm_sq ** -0.25, eldan, n ** (-5.0 / 12.0))


# ---------------------------------------------------------------------------
# Poincare


@dataclass
class PoincareResult:
    quotient: float
    stderr: float
    var_f: float
    grad_sq: float
    lipschitz_certificate: float | None = None


def poincare_quotient(spec, F: Callable, gradF: Callable, N: int = 200_000, rng=0, *,
                      replicas: int = 16, lipschitz: bool = False) -> PoincareResult:
    """E|grad F|^2 / Var F; an upper estimate for D_2 along this probe.

    With ``lipschitz`` set the probe is 1-Lipschitz and 1/Var F is returned as
    the D_inf certificate.
    """
    per = N // replicas

    def one(s):
        X = dist.sample_array(spec, per, s.generator())
        f = np.asarray(F(X), float)
        g = np.asarray(gradF(X), float)
        return float(np.var(f)), float(np.mean(np.sum(g * g, axis=1)))

    vals = replicate(one, rng, replicas)
    v = float(np.mean([a for a, _ in vals]))
    g = float(np.mean([b for _, b in vals]))
    if v <= 1e-300:
        raise ValueError("probe has vanishing variance")
    q = summarize([b / a for a, b in vals])
    return PoincareResult(g / v, q.stderr, v, g, 1.0 / v if lipschitz else None)


def probe_family(n: int, rng=0):
    """name -> (F, gradF, is_1_lipschitz)."""
    gen = as_stream(rng).generator()
    theta = unit_directions(1, n, gen)[0]
    diag = np.ones(n) / math.sqrt(n)

    def linear(u):
        return (lambda X: X @ u, lambda X: np.broadcast_to(u, X.shape), True)

    return {
        "linear_e1": linear(np.eye(n)[0]),
        "linear_diag": linear(diag),
        "linear_random": linear(theta),
        "coord_square": (lambda X: X[:, 0] ** 2,
                         lambda X: np.column_stack([2 * X[:, 0], np.zeros((X.shape[0], n - 1))]),
                         False),
        "norm_square": (lambda X: np.sum(X * X, axis=1), lambda X: 2 * X, False),
        "smoothed_norm": (lambda X: np.sqrt(1.0 + np.sum(X * X, axis=1)),
                          lambda X: X / np.sqrt(1.0 + np.sum(X * X, axis=1))[:, None], True),
    }


def poincare_survey(spec, N: int = 200_000, rng=0, replicas: int = 16) -> dict:
    stream = as_stream(rng)
    out = {}
    for i, (name, (F, G, lip)) in enumerate(probe_family(spec.dim, stream.substream(0)).items()):
        out[name] = poincare_quotient(spec, F, G, N, stream.substream(1 + i),
                                      replicas=replicas, lipschitz=lip)
    return out
