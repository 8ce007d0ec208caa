"""Thin-shell statistics, strong and weak moments, tail forms and the H(p, lambda) chain."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import distributions as dist
from . import kernels
from .errors import ConfigError, MomentNotExistError
from .numerics import (as_stream, replicate_indexed, split_counts, summarize, unit_directions,
                       wilson_interval)

DEFAULT_C = 3.0
DEFAULT_c = 1.0


def p_grid(n: int) -> list:
    """{1, 2, 4, ...} up to 2 ceil(sqrt n), with the endpoint included."""
    top = 2 * math.ceil(math.sqrt(n))
    grid, p = [], 1
    while p <= top:
        grid.append(float(p))
        p *= 2
    if grid[-1] != top:
        grid.append(float(top))
    return grid


def _check_moment(spec, p):
    if not p >= 1:
        raise ConfigError("moment order p must be >= 1")
    if spec.family == "sconcave" and p >= spec.r:
        raise MomentNotExistError(
            f"moment does not exist: |X| has moments only of order p < r = {spec.r} (asked p={p})")


def _batches(spec, N, rng, replicas, fn):
    """Apply ``fn`` to ``replicas`` independent sample blocks whose sizes sum to ``N``."""
    sizes = split_counts(N, replicas)
    return replicate_indexed(lambda k, s: fn(dist.sample_array(spec, sizes[k], s.generator())),
                             rng, replicas)


def _norms(spec, N, rng, replicas):
    return _batches(spec, N, rng, replicas, lambda X: np.linalg.norm(X, axis=1))


# ---------------------------------------------------------------------------
# shells


@dataclass
class ShellStats:
    n: int
    N: int
    mean_norm: float
    var_norm: float
    var_norm_sq: float
    var_norm_sq_moments: float
    e2: float
    e4: float
    stderr: dict
    tail: dict
    flags: list = field(default_factory=list)

    @property
    def var_ratio(self) -> float:
        """Var |X|^2 / E|X|^2."""
        return self.var_norm_sq / self.e2

    def fourth_moment_form(self, budget: float = 10.0) -> bool:
        """(E|X|^4)^{1/4} <= (1 + budget/n) (E|X|^2)^{1/2}."""
        return self.e4 ** 0.25 <= (1 + budget / self.n) * math.sqrt(self.e2)


def shell_stats(spec, N: int, t_grid=(0.05, 0.1, 0.2, 0.5), rng=0, replicas: int = 16,
                norms=None) -> ShellStats:
    """Statistics of |X|_2 pooled over replicas; replica spread gives standard errors."""
    if not spec.isotropic:
        raise ConfigError("shell statistics need an isotropic spec")
    n = spec.dim
    blocks = _norms(spec, N, rng, replicas) if norms is None else [np.asarray(norms, float)]
    r = np.concatenate(blocks)
    r2 = r * r
    sqn = math.sqrt(n)
    e2 = float(np.mean(r2))
    e4 = float(np.mean(r2 * r2))
    per = {
        "mean_norm": [float(np.mean(b)) for b in blocks],
        "var_norm": [float(np.var(b)) for b in blocks],
        "var_norm_sq": [float(np.var(b * b)) for b in blocks],
        "e2": [float(np.mean(b * b)) for b in blocks],
    }
    stderr = {k: summarize(v).stderr for k, v in per.items()}
    tail, flags = {}, []
    dev = np.abs(r - sqn)
    for t in sorted(t_grid):
        k = int(np.sum(dev >= t * sqn))
        p = k / r.size
        tail[float(t)] = (p, wilson_interval(k, r.size))
        if k == 0:
            flags.append(f"tail t={t}: no exceedances, CI degenerate")
    return ShellStats(n, int(r.size), float(np.mean(r)), float(np.var(r)), float(np.var(r2)),
                      e4 - e2 * e2, e2, e4, stderr, tail, flags)


# ---------------------------------------------------------------------------
# strong moments


@dataclass
class MomentEstimate:
    p: float
    value: float
    stderr: float
    flags: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def ci(self):
        h = 1.959963984540054 * self.stderr
        return (self.value - h, self.value + h)


def _power_mean(blocks, p):
    """(mean |v|^p)^{1/p} from replica blocks; median-of-means when p > 8."""
    means = np.array([float(np.mean(np.abs(b) ** p)) for b in blocks])
    flags = []
    if p > 8 and len(means) > 1:
        m = float(np.median(means))
        flags.append("median-of-means")
    else:
        sizes = np.array([len(b) for b in blocks], float)
        m = float(np.sum(means * sizes) / sizes.sum())
    se_m = float(np.std(means, ddof=1) / math.sqrt(len(means))) if len(means) > 1 else math.inf
    if len(means) > 1 and np.std(means, ddof=1) > 0.5 * np.mean(means):
        flags.append("heavy-tail: replica spread above 50%")
    val = m ** (1.0 / p)
    return val, val * se_m / (p * m) if m > 0 else math.inf, flags


def strong_moment(spec, p: float, N: int = 100_000, rng=0, replicas: int = 16,
                  norms=None) -> MomentEstimate:
    """(E|X|_2^p)^{1/p}."""
    _check_moment(spec, p)
    blocks = _norms(spec, N, rng, replicas) if norms is None else norms
    val, se, flags = _power_mean(blocks, p)
    return MomentEstimate(float(p), val, se, flags)


# ---------------------------------------------------------------------------
# weak moments


def _ascend_sphere(Y, z, p, iters):
    """z <- grad F / |grad F| for the convex F(z) = mean |<Y, z>|^p; F increases monotonically."""
    for _ in range(iters):
        s = Y @ z
        g = (np.abs(s) ** (p - 1) * np.sign(s)) @ Y
        ng = np.linalg.norm(g)
        if ng == 0:
            break
        z_new = g / ng
        if np.linalg.norm(z_new - z) < 1e-10:
            z = z_new
            break
        z = z_new
    return z


def _ascend_cube(Y, z, p, iters):
    """Same fixed point over the cube: z <- sign(grad F)."""
    for _ in range(iters):
        s = Y @ z
        g = (np.abs(s) ** (p - 1) * np.sign(s)) @ Y
        z_new = np.where(g >= 0, 1.0, -1.0)
        if np.array_equal(z_new, z):
            break
        z = z_new
    return z


def _dual_candidates(n, norm, gen, random_count):
    if norm == "l2":
        E = np.eye(n)
        return np.vstack([E, unit_directions(random_count, n, gen)])
    if norm == "linf":
        # dual ball is the l1 ball: its vertices are exhaustive
        return np.eye(n)
    if norm == "l1":
        S = np.where(gen.random((random_count, n)) < 0.5, -1.0, 1.0)
        return np.vstack([np.ones((1, n)), S])
    raise ConfigError(f"unknown norm {norm!r}")


def _weak_search(Ys, Ye, p, norm, gen, random_count=64, refine=4, iters=30):
    """Search on ``Ys``, evaluate the winner on the independent ``Ye``."""
    Z = _dual_candidates(Ys.shape[1], norm, gen, random_count)
    vals = kernels.directional_moments(Ys, Z, p)
    start = np.argsort(-vals, kind="stable")[:refine]
    cands = [Z[i] for i in start]
    if norm == "l2":
        cands += [_ascend_sphere(Ys, Z[i], p, iters) for i in start]
    elif norm == "l1":
        cands += [_ascend_cube(Ys, Z[i], p, iters) for i in start]
    C = np.array(cands)
    best = C[int(np.argmax(kernels.directional_moments(Ys, C, p)))]
    m_each = np.abs(Ye @ best) ** p
    m = float(np.mean(m_each))
    se_m = float(np.std(m_each, ddof=1) / math.sqrt(len(m_each)))
    val = m ** (1.0 / p)
    return val, val * se_m / (p * m) if m > 0 else math.inf, best, len(Z) + len(cands)


def weak_moment(spec, p: float, N: int = 40_000, rng=0, *, random_count: int = 64,
                norm: str = "l2", batch=None) -> MomentEstimate:
    """Lower bound for sigma_p = sup_{|z|_* <= 1} (E|<z, X>|^p)^{1/p}.

    Candidates: coordinate directions, ``random_count`` random ones and
    fixed-point ascent from the best few. The search half of the sample picks
    the direction; the other half evaluates it, so the value is an honest
    estimate of a moment that sigma_p dominates.
    """
    _check_moment(spec, p)
    stream = as_stream(rng)
    X = dist.sample_array(spec, N, stream.substream(0).generator()) if batch is None else batch
    h = X.shape[0] // 2
    gen = stream.substream(1).generator()
    val, se, z, tried = _weak_search(X[:h], X[h:], p, norm, gen, random_count)
    return MomentEstimate(float(p), val, se, ["lower-bound"],
                          {"direction": z, "candidates": tried, "norm": norm})


@dataclass
class MomentProfile:
    p_grid: list
    strong: list
    weak: list
    mean_norm: float


def moment_profile(spec, ps=None, N: int = 100_000, rng=0, replicas: int = 16) -> MomentProfile:
    """Strong and weak moments over a p-grid from one shared sample."""
    ps = p_grid(spec.dim) if ps is None else list(ps)
    stream = as_stream(rng)
    X = np.concatenate(_batches(spec, N, stream.substream(0), replicas, lambda A: A))
    sizes = split_counts(N, replicas)
    cuts = np.cumsum(sizes)[:-1]
    norms = np.split(np.linalg.norm(X, axis=1), cuts)
    strong = [strong_moment(spec, p, norms=norms) for p in ps]
    weak = [weak_moment(spec, p, rng=stream.substream(1 + i), batch=X) for i, p in enumerate(ps)]
    return MomentProfile(ps, strong, weak, float(np.mean(np.concatenate(norms))))


def _norm_of(X, norm):
    if norm == "l2":
        return np.linalg.norm(X, axis=1)
    if norm == "l1":
        return np.sum(np.abs(X), axis=1)
    if norm == "linf":
        return np.max(np.abs(X), axis=1)
    raise ConfigError(f"unknown norm {norm!r}")


@dataclass
class WeakStrongRow:
    p: float
    strong: float
    mean_norm: float
    sigma: float
    ratio: float
    stderr: float
    flags: list


def weak_strong_check(spec, ps=None, norm: str = "l2", N: int = 100_000, rng=0,
                      replicas: int = 16) -> list:
    """ratio(p) = (E|X|^p)^{1/p} / (E|X| + sigma_p) in the chosen norm."""
    ps = p_grid(spec.dim) if ps is None else list(ps)
    for p in ps:
        _check_moment(spec, p)
    stream = as_stream(rng)
    blocks = _batches(spec, N, stream.substream(0), replicas, lambda A: A)
    X = np.concatenate(blocks)
    nb = [_norm_of(b, norm) for b in blocks]
    mean_norm = float(np.mean(np.concatenate(nb)))
    rows = []
    for i, p in enumerate(ps):
        s_val, s_se, flags = _power_mean(nb, p)
        w = weak_moment(spec, p, rng=stream.substream(1 + i), norm=norm, batch=X)
        denom = mean_norm + w.value
        ratio = s_val / denom
        se = ratio * math.hypot(s_se / s_val, w.stderr / denom)
        rows.append(WeakStrongRow(float(p), s_val, mean_norm, w.value, ratio, se, flags))
    return rows


# ---------------------------------------------------------------------------
# Borell growth


def borell_growth(spec, z, ps, N: int = 100_000, rng=0):
    """g(p) = (E|<z, X>|^p)^{1/p} / p; returns (table, max g)."""
    if not spec.log_concave:
        raise ConfigError("Borell growth applies to log-concave marginals")
    z = np.asarray(z, dtype=float)
    z = z / np.linalg.norm(z)
    y = dist.sample_array(spec, N, as_stream(rng).generator()) @ z
    table = {float(p): float(np.mean(np.abs(y) ** p) ** (1.0 / p) / p) for p in ps}
    return table, max(table.values())


# ---------------------------------------------------------------------------
# H(p, lambda)


@dataclass
class HConditionReport:
    p: float
    m: int
    ratio: float
    gauge: str
    projection: str
    note: str = "named gauge only: a large ratio does not refute H(p, lambda)"


def _forms(m):
    W = np.array([w for w in itertools.product((-1.0, 0.0, 1.0), repeat=m) if any(w)])
    return W / np.linalg.norm(W, axis=1, keepdims=True)


def _gauge(Y, gauge):
    if gauge == "euclidean":
        return np.linalg.norm(Y, axis=1)
    if gauge == "forms3m":
        m = Y.shape[1]
        if m > 8:
            raise ConfigError("the 3^m-forms gauge is limited to m <= 8")
        W = _forms(m)
        out = np.empty(Y.shape[0])
        for a in range(0, Y.shape[0], 4096):
            out[a:a + 4096] = np.max(np.abs(Y[a:a + 4096] @ W.T), axis=1)
        return out
    raise ConfigError(f"unknown gauge {gauge!r}")


def h_condition_ratio(spec, p: float, projection, gauge: str = "euclidean", N: int = 100_000,
                      rng=0, batch=None) -> HConditionReport:
    """lambda_hat = (E|Y|^p)^{1/p} / E|Y| for Y = projection @ X."""
    A = np.atleast_2d(np.asarray(projection, dtype=float))
    m = math.ceil(p)
    if A.shape[0] != m:
        raise ConfigError(f"projection must have m = ceil(p) = {m} rows")
    if np.linalg.matrix_rank(A) < m:
        raise ValueError("degenerate projection (rank < m)")
    X = dist.sample_array(spec, N, as_stream(rng).generator()) if batch is None else batch
    g = _gauge(X @ A.T, gauge)
    lam = float(np.mean(g ** p) ** (1.0 / p) / np.mean(g))
    return HConditionReport(float(p), m, lam, gauge, f"{A.shape[0]}x{A.shape[1]}")


# ---------------------------------------------------------------------------
# proof chain


def _sphere_grid(m, gen, count):
    if m == 1:
        return np.array([[1.0]])
    if m == 2:
        a = np.linspace(0.0, math.pi, count, endpoint=False)
        return np.column_stack([np.cos(a), np.sin(a)])
    if m == 3:
        # Fibonacci hemisphere is enough: the objective is even in z
        k = np.arange(count) + 0.5
        zc = k / count
        phi = math.pi * (1 + math.sqrt(5)) * k
        s = np.sqrt(1 - zc * zc)
        return np.column_stack([s * np.cos(phi), s * np.sin(phi), zc])
    return unit_directions(count, m, gen)


def _min_on_sphere(Xs, Xf, A, p, gen, count):
    """min_{|z|=1} (E|<A^T z, X>|^p)^{1/p}.

    Coarse grid and local refinement run on the subsample ``Xs``; the chosen
    direction is then evaluated on the full sample ``Xf``.
    """
    m = A.shape[0]
    Z = _sphere_grid(m, gen, count)
    vals = kernels.directional_moments(Xs, Z @ A, p)
    z = Z[int(np.argmin(vals))]

    def f(v):
        return float(kernels.directional_moments(Xs, (v @ A)[None], p)[0])

    if m == 2:
        a0 = math.atan2(z[1], z[0])
        h = math.pi / count
        res = minimize_scalar(lambda a: f(np.array([math.cos(a), math.sin(a)])),
                              bounds=(a0 - 2 * h, a0 + 2 * h), method="bounded",
                              options={"xatol": 1e-7})
        z = np.array([math.cos(res.x), math.sin(res.x)])
    elif m > 2:
        best = f(z)
        step = 0.1
        while step > 1e-5:
            improved = False
            for d in np.vstack([np.eye(m), -np.eye(m)]):
                v = z + step * d
                v /= np.linalg.norm(v)
                fv = f(v)
                if fv < best:
                    z, best, improved = v, fv, True
            if not improved:
                step *= 0.5
    return float(kernels.directional_moments(Xf, (z @ A)[None], p)[0]) ** (1.0 / p)


@dataclass
class ChainLedger:
    name: str
    lhs: float
    main: float
    constant: float
    holds: bool
    detail: dict = field(default_factory=dict)


def proof_chain_check(spec, p: float, m: int | None = None, N: int = 100_000, rng=0, *,
                      gaussians: int = 1000, draws: int = 100, budget: float = DEFAULT_C):
    """Monte-Carlo sides of the three steps behind the weak/strong moment bound.

    Step 1 (Gaussian concentration): (E_G E_X|<G,X>|^p)^{1/p} against
    E_G (E_X|<G,X>|^p)^{1/p}. Step 2 (Gordon): the latter against
    E_A min_z (E_X|<z,AX>|^p)^{1/p}. Steps 1 and 2 report
    (lhs - main)/(sqrt(p) sigma_p). Step 3 checks, per A draw,
    min_z (E|<z,AX>|^p)^{1/p} <= lambda_hat E|AX|_2 with lambda_hat from
    h_condition_ratio on the same sample.
    """
    n = spec.dim
    m = math.ceil(p) if m is None else int(m)
    if n > 8 or p > 4 or m > 4:
        raise ConfigError("proof_chain_check is limited to n <= 8, p <= 4, m <= 4")
    if not spec.log_concave:
        raise ConfigError("proof_chain_check needs a log-concave spec")
    stream = as_stream(rng)
    X = dist.sample_array(spec, N, stream.substream(0).generator())
    gen = stream.substream(1).generator()
    sigma = weak_moment(spec, p, rng=stream.substream(2), batch=X).value

    G = gen.standard_normal((gaussians, n))
    mom = kernels.directional_moments(X, G, p)
    lhs12 = float(np.mean(mom) ** (1.0 / p))
    main12 = float(np.mean(mom ** (1.0 / p)))
    scale = math.sqrt(p) * sigma
    c12 = (lhs12 - main12) / scale

    Xs = X[: min(N, 20000)]
    mins, lams, norms, per_draw = [], [], [], []
    for _ in range(draws):
        A = gen.standard_normal((m, n))
        mn = _min_on_sphere(Xs, X, A, p, gen, 720 if m == 2 else 2000)
        y = np.linalg.norm(X @ A.T, axis=1)
        e_norm = float(np.mean(y))
        if m == math.ceil(p):
            lam = h_condition_ratio(spec, p, A, batch=X).ratio
        else:
            lam = float(np.mean(y ** p) ** (1.0 / p) / e_norm)
        mins.append(mn)
        lams.append(lam)
        norms.append(e_norm)
        per_draw.append(mn <= lam * e_norm * (1 + 1e-12))
    main13 = float(np.mean(mins))
    c13 = (main12 - main13) / scale
    c14 = [a / b for a, b in zip(mins, norms)]
    return [
        ChainLedger("concentration", lhs12, main12, c12, c12 <= budget, {"sigma_p": sigma}),
        ChainLedger("gordon", main12, main13, c13, c13 <= budget, {"sigma_p": sigma}),
        ChainLedger("geometric", float(np.mean(mins)), float(np.mean(norms)), max(c14),
                    sum(per_draw) >= math.ceil(0.99 * draws),
                    {"draws_holding": int(sum(per_draw)), "draws": draws,
                     "lambda_hat_max": max(lams)}),
    ]


# ---------------------------------------------------------------------------
# tail forms


def tail_bound(form: str, t, n: int, C: float = DEFAULT_C, c: float = DEFAULT_c, r=None):
    t = np.asarray(t, dtype=float)
    sq = math.sqrt(n)
    if form == "paouris":
        return np.minimum(1.0, C * np.exp(-c * t * sq))
    if form == "gm":
        return np.minimum(1.0, C * np.exp(-c * sq * np.minimum(t ** 3, t)))
    if form == "small-ball":
        return np.minimum(1.0, C * (c * t) ** sq)
    if form == "sconcave":
        if r is None:
            raise ConfigError("sconcave tail form needs r")
        with np.errstate(divide="ignore"):
            return np.minimum(1.0, (c * max(1.0, r / sq) / t) ** (r / 2.0))
    raise ConfigError(f"unknown tail form {form!r}")


@dataclass
class TailLedger:
    form: str
    n: int
    N: int
    t: list
    empirical: list
    ci: list
    bound: list
    markov: list
    constants: dict
    dominates: bool
    slope: float | None
    flags: list


def _tail_event(form, r, t, sqn):
    if form == "gm":
        return np.abs(r - sqn) >= t * sqn
    if form == "small-ball":
        return r <= t * sqn
    if form == "sconcave":
        return r > t * sqn
    return r >= t * sqn


def tail_form_check(spec, N: int, form: str, t_grid, rng=0, *, C: float = DEFAULT_C,
                    c: float = DEFAULT_c, replicas: int = 16, markov: bool = True) -> TailLedger:
    """Empirical tail probabilities of |X|_2 against a named functional form.

    ``paouris`` is P(|X| >= t sqrt n) <= C e^{-c t sqrt n}, ``gm`` is the
    two-sided shell form, ``small-ball`` is P(|X| <= t sqrt n) <= C (c t)^{sqrt n}
    and ``sconcave`` is P(|X| > t sqrt n) <= (c max(1, r/sqrt n)/t)^{r/2}.
    """
    if not spec.isotropic:
        raise ConfigError("tail forms need an isotropic spec")
    if form == "sconcave" and spec.family != "sconcave":
        raise ConfigError("the sconcave form needs an s-concave spec")
    n = spec.dim
    sqn = math.sqrt(n)
    r_par = spec.r if spec.family == "sconcave" else None
    norms = np.concatenate(_norms(spec, N, rng, replicas))
    ts = [float(t) for t in t_grid]
    emp, cis = [], []
    for t in ts:
        k = int(np.sum(_tail_event(form, norms, t, sqn)))
        emp.append(k / norms.size)
        cis.append(wilson_interval(k, norms.size))
    bound = [float(b) for b in tail_bound(form, ts, n, C, c, r_par)]
    flags = []
    if form == "paouris" and min(ts) < 10:
        flags.append("extrapolated: the large-deviation form is stated for t >= 10")
    if form == "small-ball" and max(ts) >= 0.1:
        flags.append("extrapolated: the small-ball form is stated for eps < 1/10")
    mk = []
    if markov and form in ("paouris", "sconcave"):
        for t in ts:
            p = t * sqn
            if (r_par is not None and p >= r_par) or p < 1 or p > 64:
                mk.append(None)
                continue
            e = float(np.mean(norms ** p))
            mk.append(min(1.0, e / (t * sqn) ** p))
    slope = None
    pos = [(t, e) for t, e in zip(ts, emp) if t > 0 and e > 0]
    if len(pos) >= 2:
        slope = float(np.polyfit(np.log([a for a, _ in pos]), np.log([b for _, b in pos]), 1)[0])
    dominates = all(b >= e for b, e in zip(bound, emp))
    return TailLedger(form, n, int(norms.size), ts, emp, cis, bound, mk,
                      {"C": C, "c": c}, dominates, slope, flags)
