"""How many samples make the empirical second-moment matrix close to identity."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from .errors import ConfigError
from .numerics import as_stream, eigh_sym, replicate, wilson_interval


@dataclass
class CovApproxReport:
    """Per-replica deviations; the headline values come from the upper-median replica."""

    n: int
    N: int
    eps_values: np.ndarray
    s_min_values: np.ndarray
    s_max_values: np.ndarray
    eta: float | None = None
    success: dict = field(default_factory=dict)

    @property
    def replicas(self) -> int:
        return len(self.eps_values)

    @property
    def _rep(self) -> int:
        return int(np.argsort(self.eps_values, kind="stable")[self.replicas // 2])

    @property
    def eps_hat(self) -> float:
        return float(self.eps_values[self._rep])

    @property
    def s_min(self) -> float:
        return float(self.s_min_values[self._rep])

    @property
    def s_max(self) -> float:
        return float(self.s_max_values[self._rep])

    @property
    def median(self) -> float:
        return float(np.median(self.eps_values))


def _deviation(X):
    N = X.shape[0]
    S = X.T @ X / N
    w, _ = eigh_sym(0.5 * (S + S.T))
    w = np.clip(w, 0.0, None)
    s = np.sqrt(w)
    eps = max(w[-1] - 1.0, 1.0 - w[0], 0.0)
    return eps, s[0], s[-1]


def cov_deviation(spec, N: int, rng=0, *, replicas: int = 1, targets=(), eta=None,
                  batch=None) -> CovApproxReport:
    """eps_hat = |(1/N) sum X_i X_i^T - Id|_op for an isotropic spec.

    ``s_min``/``s_max`` are extreme singular values of the sample matrix
    divided by sqrt(N). ``batch`` (an ``N x n`` array) bypasses sampling.
    """
    if not spec.isotropic:
        raise ConfigError("covariance approximation is only meaningful for isotropic specs")
    n = spec.dim
    if batch is not None:
        X = np.asarray(batch, dtype=float)
        if X.ndim != 2 or X.shape[1] != n:
            raise ValueError("batch has the wrong shape")
        rows = [_deviation(X)]
        N = X.shape[0]
    else:
        rows = replicate(lambda s: _deviation(dist.sample_array(spec, N, s.generator())),
                         rng, replicas)
    eps, smin, smax = (np.array(c, dtype=float) for c in zip(*rows))
    rep = CovApproxReport(n, int(N), eps, smin, smax, eta)
    for t in targets:
        k = int(np.sum(eps <= t))
        rep.success[float(t)] = (k / len(eps), wilson_interval(k, len(eps)))
    return rep


@dataclass
class ComplexityRow:
    eps: float
    N_star: int
    success_freq: float
    ci: tuple
    lower_bound_only: bool = False


@dataclass
class ComplexityCurve:
    n: int
    eta: float
    replicas: int
    rows: list
    grid: list
    medians: list
    unresolved_eta: bool
    references: dict

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "N_star", "success_freq", "ci_low", "ci_high"])
            for r in self.rows:
                w.writerow([r.eps, r.N_star, r.success_freq, r.ci[0], r.ci[1]])


def reference_curves(n: int, eps: float) -> dict:
    """Historical sample-size bounds, for display only."""
    return {
        "n/eps^2": n / eps ** 2,
        "KLS n^2/eps^2": n * n / eps ** 2,
        "Bourgain n log^3 n/eps^2": n * math.log(n) ** 3 / eps ** 2,
    }


def sample_complexity_curve(spec, eps_grid, eta: float = 0.1, replicas: int = 32, rng=0, *,
                            N_min: int | None = None, N_max: int = 1 << 18) -> ComplexityCurve:
    """Smallest doubling-grid N whose replica success frequency reaches 1 - eta, per eps.

    The grid starts at the power of two at or above ``16 n``. Targets never
    reached by ``N_max`` are reported with ``lower_bound_only`` set.
    """
    eps_grid = [float(e) for e in eps_grid]
    if any(not 0 < e < 1 for e in eps_grid):
        raise ConfigError("eps grid must lie in (0, 1)")
    if replicas < 32:
        raise ConfigError("sample_complexity_curve needs at least 32 replicas")
    n = spec.dim
    stream = as_stream(rng)
    N = N_min or 1 << max(0, math.ceil(math.log2(16 * n)))
    found: dict[float, ComplexityRow] = {}
    grid, medians = [], []
    level = 0
    while True:
        rep = cov_deviation(spec, N, stream.substream(level), replicas=replicas, targets=eps_grid)
        grid.append(N)
        medians.append(rep.median)
        for e in eps_grid:
            freq, ci = rep.success[e]
            if e not in found and freq >= 1 - eta:
                found[e] = ComplexityRow(e, N, freq, ci)
        if len(found) == len(eps_grid) or N >= N_max:
            break
        N *= 2
        level += 1
    rows = []
    for e in eps_grid:
        if e in found:
            rows.append(found[e])
        else:
            freq, ci = rep.success[e]
            rows.append(ComplexityRow(e, N, freq, ci, lower_bound_only=True))
    refs = {e: reference_curves(n, e) for e in eps_grid}
    return ComplexityCurve(n, eta, replicas, rows, grid, medians, eta < 1.0 / replicas, refs)


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def deviation_curve(spec, Ns, replicas: int = 32, rng=0):
    """Median eps_hat for each N; substream ``i`` serves ``Ns[i]``."""
    stream = as_stream(rng)
    return [cov_deviation(spec, int(N), stream.substream(i), replicas=replicas).median
            for i, N in enumerate(Ns)]
