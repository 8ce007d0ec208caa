"""Deterministic numeric substrate.

Symmetric spectra, half-line quadrature, Kolmogorov distance, seeded
counter-based random streams and replica bookkeeping.
"""

from __future__ import annotations

import contextlib
import contextvars
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from . import kernels
from .errors import NonConvergenceError

_MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# random streams


@dataclass(frozen=True)
class RngStream:
    """Philox-backed stream addressed by ``(seed, index)``.

    The pair is the full Philox key, so the stream is a pure function of it.
    Replica ``k`` of any experiment draws from ``stream.substream(k)``.
    """

    seed: int
    index: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.index & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, k: int) -> "RngStream":
        mixed = np.random.SeedSequence([self.index & _MASK64, int(k) & _MASK64, 0x5EED])
        return RngStream(self.seed, int(mixed.generate_state(1, np.uint64)[0]))

    def ident(self) -> str:
        return f"philox4x64:{self.seed}:{self.index}"


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected RngStream or integer seed, got {type(rng).__name__}")


_workers = contextvars.ContextVar("lcgeom_workers", default=1)


@contextlib.contextmanager
def worker_count(k: int):
    """Run replica maps inside this block on ``k`` threads."""
    token = _workers.set(max(1, int(k)))
    try:
        yield
    finally:
        _workers.reset(token)


def replicate(fn: Callable[[RngStream], object], rng, replicas: int) -> list:
    """``[fn(rng.substream(k)) for k in range(replicas)]``, possibly threaded.

    Output order is the replica order regardless of worker count.
    """
    return replicate_indexed(lambda k, s: fn(s), rng, replicas)


def replicate_indexed(fn: Callable[[int, RngStream], object], rng, replicas: int) -> list:
    """Like :func:`replicate` but ``fn`` also receives the replica number."""
    rng = as_stream(rng)
    jobs = [(k, rng.substream(k)) for k in range(replicas)]
    workers = _workers.get()
    if workers <= 1 or replicas <= 1:
        return [fn(k, s) for k, s in jobs]
    ctx = contextvars.copy_context()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: ctx.copy().run(fn, *job), jobs))


@dataclass(frozen=True)
class Estimate:
    """Replica-batched estimate: mean of replica values with its standard error."""

    value: float
    stderr: float
    replicas: int

    @property
    def ci(self) -> tuple[float, float]:
        half = 1.959963984540054 * self.stderr
        return (self.value - half, self.value + half)

    def __float__(self):
        return float(self.value)


def summarize(values: Sequence[float]) -> Estimate:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return Estimate(float(v.mean()), float("inf"), int(v.size))
    return Estimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), int(v.size))


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    if trials <= 0:
        return (0.0, 1.0)
    ph = successes / trials
    denom = 1.0 + z * z / trials
    centre = (ph + z * z / (2 * trials)) / denom
    half = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return (lo, hi)


def split_counts(N: int, replicas: int) -> list[int]:
    base, extra = divmod(int(N), int(replicas))
    return [base + (1 if k < extra else 0) for k in range(replicas)]


# ---------------------------------------------------------------------------
# linear algebra


def _check_symmetric(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (M + M.T)


def eigh_sym(M, tol: float = 1e-14):
    """Ascending eigenvalues and matching eigenvectors via Jacobi rotations."""
    M = _check_symmetric(M)
    w, V, _ = kernels.jacobi_eigh(M, tol=tol)
    order = np.argsort(w)
    return w[order], V[:, order]


def operator_norm_sym(M, tol: float = 1e-12) -> float:
    """Largest absolute eigenvalue of a symmetric matrix."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = _check_symmetric(M)
    n = M.shape[0]
    w, _, _ = kernels.jacobi_eigh(M, tol=min(1e-14, tol / math.sqrt(n)))
    return float(np.max(np.abs(w)))


def power_iteration_norm(M, iters: int = 2000, seed: int = 0) -> float:
    """Cross-check for :func:`operator_norm_sym` (slow on clustered spectra)."""
    M = _check_symmetric(M)
    v = np.random.default_rng(seed).standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = M @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam = nw
    return float(math.sqrt(lam))


def inv_sqrt_sym(M):
    w, V = eigh_sym(M)
    if w[0] <= 1e-14 * max(1.0, abs(w[-1])):
        raise np.linalg.LinAlgError("matrix is singular or not positive definite")
    return (V / np.sqrt(w)) @ V.T


def sqrt_sym(M):
    w, V = eigh_sym(M)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def orthonormal_complement(theta):
    """Columns spanning the orthogonal complement of the unit vector ``theta``."""
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    Q, _ = np.linalg.qr(np.column_stack([theta, np.eye(n)]))
    return Q[:, 1:n]


def random_orthogonal(n: int, gen: np.random.Generator):
    Q, R = np.linalg.qr(gen.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def unit_directions(count: int, n: int, gen: np.random.Generator):
    G = gen.standard_normal((count, n))
    return G / np.linalg.norm(G, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# distribution functions


def norm_cdf(x):
    return special.ndtr(x)


def norm_ppf(q):
    return special.ndtri(q)


def ks_distance(samples, ref_cdf: Callable) -> float:
    """sup_x |F_N(x) - F(x)|, checked on both sides of every jump of F_N."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    if x.size < 2:
        raise ValueError("need at least two samples")
    if np.any(np.diff(x) < 0):
        x = np.sort(x)
    N = x.size
    F = np.asarray(ref_cdf(x), dtype=float)
    # ties: the empirical CDF just after x is the index past the last copy
    upper = np.searchsorted(x, x, side="right") / N
    lower = np.searchsorted(x, x, side="left") / N
    return float(max(np.max(upper - F), np.max(F - lower), 0.0))


# ---------------------------------------------------------------------------
# quadrature


def integrate_halfline(g: Callable[[float], float], tol: float = 1e-10, *,
                       support: float | None = None, breakpoints=(), start: float = 1.0,
                       max_doublings: int = 80) -> float:
    """Integral of a nonnegative ``g`` over [0, inf).

    The half-line is cut into panels [0, a], [a, 2a], [2a, 4a], ...; each panel
    is integrated adaptively. Growth stops once the geometric extrapolation of
    the panel sequence bounds the remaining tail by ``tol/4`` of the running
    total. ``support`` short-circuits to a finite interval.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")

    def panel(a, b):
        pts = [p for p in breakpoints if a < p < b]
        val, _ = integrate.quad(g, a, b, epsabs=0.0, epsrel=tol / 8, limit=400,
                                points=pts or None)
        return val

    if support is not None:
        if support <= 0:
            return 0.0
        cuts = [0.0] + sorted(p for p in breakpoints if 0 < p < support) + [support]
        return float(sum(panel(a, b) for a, b in zip(cuts[:-1], cuts[1:])))

    total = panel(0.0, start)
    prev = None
    a = start
    for _ in range(max_doublings):
        piece = panel(a, 2 * a)
        total += piece
        if piece == 0.0 and (prev is None or prev == 0.0):
            if total > 0.0:
                return float(total)
        elif prev is not None and 0.0 < piece < prev:
            q = piece / prev
            tail = piece * q / (1.0 - q)
            if tail <= 0.25 * tol * abs(total):
                return float(total + tail)
        prev = piece
        a *= 2
    raise NonConvergenceError("tail of the half-line integral did not settle")


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> linear @ x + shift."""

    linear: np.ndarray
    shift: np.ndarray

    def __call__(self, X):
        return np.asarray(X, dtype=float) @ self.linear.T + self.shift

    def inverse(self) -> "AffineMap":
        Li = np.linalg.inv(self.linear)
        return AffineMap(Li, -Li @ self.shift)

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """self ∘ inner."""
        return AffineMap(self.linear @ inner.linear, self.linear @ inner.shift + self.shift)

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.linear))
