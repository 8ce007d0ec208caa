"""Hit-and-run walks, rounding, multiphase volume estimation and hull volumes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import kernels
from ._accel import USE_NUMBA
from .bodies import ConvexBody, log_unit_ball_volume
from .errors import BudgetExhausted, CertificateViolation
from .numerics import AffineMap, as_stream, inv_sqrt_sym, norm_ppf, unit_directions


# ---------------------------------------------------------------------------
# hit-and-run


def _walk(body: ConvexBody, x0, steps, gen, burn=0, thin=1, center=None, radius=0.0):
    """Advance ``len(x0)`` independent chains by ``steps`` hit-and-run moves.

    Returns ``(kept, last, calls)`` where ``kept`` has shape ``(C, (steps-burn)//thin, n)``.
    The optional ball ``|x - center| <= radius`` is intersected with the body.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    C, n = x0.shape
    dirs = gen.standard_normal((steps, C, n))
    us = gen.random((steps, C))
    reach = 2.0 * body.R_out
    if radius > 0:
        reach = min(reach, 2.0 * radius)
    reach *= 1.0 + 1e-9
    tol = 1e-9 * body.R_out
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    if body.program is not None:
        prog = body.program.kernel_args(c, radius)
        kept, last, calls, ok = kernels.har_chains(x0, dirs, us, prog, reach, tol, burn, thin)
    else:
        member = body.membership

        def inside(P):
            ok = np.asarray(member(P), dtype=bool)
            if radius > 0:
                ok &= np.sum((P - c) ** 2, axis=1) <= radius * radius
            return ok

        empty = kernels_empty(n)
        kept, last, calls, ok = kernels._har_chains_np(
            x0, dirs, us, *empty, c, float(radius), reach,
            kernels._bisection_steps(reach, tol), burn, thin, inside=inside)
    if not ok:
        raise CertificateViolation(
            f"chord escaped 2*R_out={2 * body.R_out:g}: outer-radius certificate is wrong")
    return kept, last, int(calls)


def kernels_empty(n):
    return (np.zeros((0, n)), np.zeros(0), np.zeros((0, n, n)), np.zeros((0, n)), np.zeros(0))


def hit_and_run_step(body: ConvexBody, x, rng):
    """One hit-and-run move from an interior point ``x``."""
    x = np.asarray(x, dtype=float)
    if not body.contains(x):
        raise ValueError("starting point is not inside the body")
    gen = as_stream(rng).generator()
    _, last, _ = _walk(body, x[None], 1, gen)
    return last[0]


def hit_and_run(body: ConvexBody, x0, steps, rng, burn=0, thin=1):
    """Run chains from the rows of ``x0``; returns the kept states ``(C, K, n)``."""
    kept, _, _ = _walk(body, x0, steps, as_stream(rng).generator(), burn, thin)
    return kept


def oracle_sample(body: ConvexBody, N: int, walk_budget: int, gen, chains: int = 32):
    """Approximately uniform points of ``body``.

    Chains start at the certified interior point, burn in for
    ``max(walk_budget, n^2)`` moves and keep every ``n``-th state.
    """
    n = body.dim
    C = max(1, min(N, chains))
    per = -(-N // C)
    burn = max(int(walk_budget), n * n)
    thin = max(1, n)
    x0 = np.repeat(body.interior_point[None], C, axis=0)
    kept, _, _ = _walk(body, x0, burn + per * thin, gen, burn, thin)
    return kept.transpose(1, 0, 2).reshape(-1, n)[:N]


# ---------------------------------------------------------------------------
# rounding


def _boundary_distance(body, center, dirs, reach):
    """Distance from ``center`` to the boundary along each unit row of ``dirs``."""
    lo = np.zeros(len(dirs))
    hi = np.full(len(dirs), reach)
    if np.any(body.contains(center + hi[:, None] * dirs)):
        raise CertificateViolation("probe escaped the outer-radius certificate")
    for _ in range(kernels._bisection_steps(reach, 1e-10 * reach)):
        mid = 0.5 * (lo + hi)
        ins = body.contains(center + mid[:, None] * dirs)
        lo = np.where(ins, mid, lo)
        hi = np.where(ins, hi, mid)
    return lo, hi


def _probe_directions(n, gen, extra=64):
    E = np.eye(n)
    return np.vstack([E, -E, unit_directions(extra, n, gen)])


@dataclass
class Rounding:
    transform: AffineMap
    d_hat: float
    r_hat: float
    R_hat: float
    body: ConvexBody
    center: np.ndarray
    calls: int


def round_body(body: ConvexBody, N: int = 4000, walk_budget: int = 0, rng=0) -> Rounding:
    """Whiten ``body`` with the empirical inertia ellipsoid of hit-and-run samples.

    The sandwich ratio of the image is estimated by probing ``2n`` coordinate
    and 64 random directions from the sample mean (which maps to the origin).
    """
    gen = as_stream(rng).generator()
    n = body.dim
    X = oracle_sample(body, N, walk_budget, gen)
    mu = X.mean(axis=0)
    cov = (X - mu).T @ (X - mu) / X.shape[0]
    try:
        W = inv_sqrt_sym(cov)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("sample covariance singular: raise the walk budget") from exc
    T = AffineMap(W, -W @ mu)
    rounded = body.affine_image(W, T.shift)
    center = np.zeros(n)
    reach = 2.0 * rounded.R_out + float(np.linalg.norm(rounded.interior_point))
    dist, _ = _boundary_distance(rounded, center, _probe_directions(n, gen), reach)
    r_hat, R_hat = float(dist.min()), float(dist.max())
    calls = N * 0  # walk calls are not tracked by oracle_sample
    return Rounding(T, R_hat / r_hat, r_hat, R_hat, rounded, center, calls)


def _certified_inner_radius(body, center, r0, gen, checks=4000):
    r = r0
    n = body.dim
    for _ in range(60):
        D = unit_directions(checks, n, gen)
        U = gen.random(checks) ** (1.0 / n)
        if np.all(body.contains(center + r * U[:, None] * D)):
            # the probe sphere itself
            if np.all(body.contains(center + r * D)):
                return r
        r *= 0.9
    raise CertificateViolation("could not certify an inner ball around the center")


def _separation_radius(body, center, dirs, dist):
    """Outer radius from the bounding box of separating half-spaces, if available."""
    if body.separation is None:
        return math.inf
    A, b = [], []
    for u, t in zip(dirs, dist):
        cut = body.separate(center + (t * (1 + 1e-6) + 1e-9) * u)
        if cut is None:
            continue
        A.append(cut[0])
        b.append(cut[1])
    if len(A) <= body.dim:
        return math.inf
    A = np.array(A)
    b = np.array(b) - A @ center
    corner = np.zeros(body.dim)
    for i in range(body.dim):
        ext = []
        for sgn in (1.0, -1.0):
            c = np.zeros(body.dim)
            c[i] = -sgn
            res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * body.dim, method="highs")
            if res.status != 0:
                return math.inf
            ext.append(abs(res.x[i]))
        corner[i] = max(ext)
    return float(np.linalg.norm(corner)) * (1 + 1e-9)


@dataclass
class VolumeEstimate:
    value: float
    rel_ci: float
    phases: int
    phase_ratios: list
    base_volume: float
    oracle_calls: int
    walk: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def ci(self):
        return (self.value * (1 - self.rel_ci), self.value * (1 + self.rel_ci))


def volume_multiphase(body: ConvexBody, eps: float = 0.1, eta: float = 0.05, rng=0, *,
                      chains: int = 16, start_samples: int = 64, max_calls: int = 50_000_000,
                      rounding_samples: int = 4000) -> VolumeEstimate:
    """Telescoping estimate over K_i = K ∩ 2^{i/n} r B around a rounded position.

    Each ratio Vol(K_{i-1})/Vol(K_i) is the fraction of hit-and-run states in
    K_i that also lie in K_{i-1}; independent chains give the error bars. The
    per-chain sample count doubles until the relative half-width at
    confidence ``1 - eta`` drops below ``eps``.
    """
    stream = as_stream(rng)
    n = body.dim
    if n > 12:
        raise ValueError("volume_multiphase is limited to n <= 12")
    rnd = round_body(body, rounding_samples, 0, stream.substream(0))
    K = rnd.body
    gen = stream.substream(1).generator()
    c = rnd.center
    dirs = _probe_directions(n, gen)
    reach = 2.0 * K.R_out + float(np.linalg.norm(K.interior_point - c))
    dist, _ = _boundary_distance(K, c, dirs, reach)
    r = _certified_inner_radius(K, c, 0.95 * float(dist.min()), gen)
    R_cert = K.R_out + float(np.linalg.norm(K.interior_point - c))
    R = min(R_cert, _separation_radius(K, c, dirs, dist))
    if rnd.d_hat > 10:
        raise ValueError(f"rounded sandwich ratio {rnd.d_hat:.2f} exceeds 10")
    m = max(1, math.ceil(n * math.log2(R / r)))
    radii = [r * 2.0 ** (i / n) for i in range(m + 1)]
    radii[-1] = max(radii[-1], R)
    burn, thin = n * n, max(1, n)
    z = float(norm_ppf(1.0 - eta / 2.0))

    hits = np.zeros((m, chains))
    tot = np.zeros((m, chains))
    states = [None] * m
    calls = 0
    per = start_samples
    rel = math.inf
    while True:
        for i in range(m):
            if states[i] is None:
                # start inside K_{i}: previous phase states lie in K_{i-1} ⊂ K_i
                x0 = np.repeat(c[None], chains, axis=0) if i == 0 else states[i - 1]
                b = burn
            else:
                x0 = states[i]
                b = 0
            kept, last, k_calls = _walk(K, x0, b + per * thin, gen, b, thin, c, radii[i + 1])
            calls += k_calls
            states[i] = last
            inner = np.sum((kept - c) ** 2, axis=2) <= radii[i] ** 2
            hits[i] += inner.sum(axis=1)
            tot[i] += inner.shape[1]
        frac = hits / tot
        alpha = frac.mean(axis=1)
        se = frac.std(axis=1, ddof=1) / math.sqrt(chains)
        if np.any(alpha <= 0):
            rel = math.inf
        else:
            rel = z * math.sqrt(float(np.sum((se / alpha) ** 2)))
        if rel <= eps:
            break
        if calls > max_calls:
            break
        per = int(tot[0, 0])  # doubles the per-chain total

    detW = abs(float(np.linalg.det(rnd.transform.linear)))
    base = math.exp(log_unit_ball_volume(n) + n * math.log(r)) / detW
    value = base / float(np.prod(alpha))
    est = VolumeEstimate(
        value=value,
        rel_ci=rel,
        phases=m,
        phase_ratios=[float(a) for a in alpha],
        base_volume=base,
        oracle_calls=int(calls),
        walk={"walk": "hit-and-run", "burn_in": burn, "thinning": thin, "chains": chains,
              "samples_per_chain": int(tot[0, 0]), "r_inner": r, "R_outer": R,
              "d_hat": rnd.d_hat, "backend": "numba" if USE_NUMBA else "numpy"},
    )
    if rel > eps:
        est.flags.append("budget-exhausted")
        raise BudgetExhausted(f"volume CI {rel:.3g} above target {eps} after {calls} calls",
                              partial=est)
    return est


# ---------------------------------------------------------------------------
# hull volumes


def uniform_in_ball(M, n, gen):
    D = unit_directions(M, n, gen)
    return D * (gen.random(M) ** (1.0 / n))[:, None]


@dataclass
class HullResult:
    ratio: float
    root: float
    stderr: float
    bound: float
    per_trial: list
    indeterminate: int

    @property
    def root_over_bound(self):
        return self.root / self.bound


def hull_volume_ratio(n: int, N: int, trials: int = 1, rng=0, *, points=None,
                      mc: int = 20000, tol: float = 1e-8) -> HullResult:
    """(Vol conv{±u_i} / Vol B_2^n)^{1/n} by Monte-Carlo membership in the ball.

    Membership is decided by away-step conditional gradient on the distance to
    the hull; undecided points are redrawn. ``points`` (N x n, unit rows)
    replaces the random directions and forces a single trial.
    """
    stream = as_stream(rng)
    bound = math.sqrt(math.log(1.0 + N / n) / n)
    if points is not None:
        points = np.asarray(points, dtype=float)
        trials = 1
    ratios = []
    undecided_total = 0
    for t in range(trials):
        gen = stream.substream(t).generator()
        U = points if points is not None else unit_directions(N, n, gen)
        V = np.vstack([U, -U]).T
        Y = uniform_in_ball(mc, n, gen)
        status = kernels.fw_hull_status(V, Y, tol)
        for _ in range(20):
            bad = status < 0
            if not bad.any():
                break
            undecided_total += int(bad.sum())
            Y[bad] = uniform_in_ball(int(bad.sum()), n, gen)
            status[bad] = kernels.fw_hull_status(V, Y[bad], tol)
        ratios.append(float(np.mean(status == 1)))
    ratios = np.array(ratios)
    ratio = float(ratios.mean())
    if trials > 1:
        se = float(ratios.std(ddof=1) / math.sqrt(trials))
    else:
        se = math.sqrt(max(ratio * (1 - ratio), 1e-300) / mc)
    root = ratio ** (1.0 / n)
    se_root = se * root / (n * ratio) if ratio > 0 else math.inf
    return HullResult(ratio, root, se_root, bound, ratios.tolist(), undecided_total)


def shoelace_area(points) -> float:
    """Area of the convex hull of planar points (monotone chain + shoelace)."""
    P = sorted(map(tuple, np.asarray(points, dtype=float)))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in P:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(P):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    x = np.array([h[0] for h in hull])
    y = np.array([h[1] for h in hull])
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
