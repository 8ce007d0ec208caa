"""Berry-Esseen style marginal studies and the thin-shell epsilon."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from .errors import ConfigError
from .numerics import (as_stream, ks_distance, norm_cdf, replicate_indexed, split_counts,
                       summarize, unit_directions)


def _unit(theta):
    theta = np.asarray(theta, dtype=float)
    nrm = float(np.linalg.norm(theta))
    if abs(nrm - 1.0) > 1e-6:
        raise ValueError("direction must be a unit vector")
    return theta / nrm


def marginal_ks(spec, theta, N: int = 100_000, rng=0) -> float:
    """Kolmogorov distance between <theta, X> and the standard normal law."""
    if not spec.isotropic:
        raise ConfigError("marginal KS needs an isotropic spec")
    theta = _unit(theta)
    y = dist.sample_array(spec, N, as_stream(rng).generator()) @ theta
    return ks_distance(np.sort(y), norm_cdf)


@dataclass
class MarginalStudy:
    n: int
    N: int
    ks: np.ndarray
    directions: np.ndarray
    quantiles: dict
    fractions: dict
    correlated: bool = False

    def write_csv(self, path, thresholds=None):
        thresholds = sorted(self.fractions) if thresholds is None else thresholds
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["direction_id", "ks"] + [f"le_{t}" for t in thresholds])
            for i, k in enumerate(self.ks):
                w.writerow([i, repr(float(k))] + [int(k <= t) for t in thresholds])

    def summary_json(self) -> str:
        return json.dumps({"n": self.n, "N": self.N, "directions": len(self.ks),
                           "quantiles": {str(k): v for k, v in self.quantiles.items()},
                           "fractions": {str(k): v for k, v in self.fractions.items()},
                           "correlated": self.correlated}, sort_keys=True)


def direction_survey(spec, N_dirs: int = 200, N: int = 100_000, rng=0, *,
                     thresholds=(0.01, 0.02, 0.03), correlated: bool = False) -> MarginalStudy:
    """KS distances over uniformly random directions.

    Each direction draws its own sample unless ``correlated`` is set, in which
    case one sample serves every direction.
    """
    if N_dirs < 100:
        raise ConfigError("a direction survey needs at least 100 directions")
    if not spec.isotropic:
        raise ConfigError("direction survey needs an isotropic spec")
    n = spec.dim
    stream = as_stream(rng)
    D = unit_directions(N_dirs, n, stream.substream(0).generator())
    if correlated:
        X = dist.sample_array(spec, N, stream.substream(1).generator())
        ks = np.array([ks_distance(np.sort(X @ d), norm_cdf) for d in D])
    else:
        def one(k, s):
            y = dist.sample_array(spec, N, s.generator()) @ D[k]
            return ks_distance(np.sort(y), norm_cdf)

        ks = np.array(replicate_indexed(one, stream.substream(1), N_dirs))
    qs = {q: float(np.quantile(ks, q)) for q in (0.1, 0.5, 0.9)}
    fr = {float(t): float(np.mean(ks <= t)) for t in thresholds}
    return MarginalStudy(n, N, ks, D, qs, fr, correlated)


def classical_be_bound(theta, tau: float) -> float:
    """tau * |theta|_4^2 for a unit direction."""
    theta = _unit(theta)
    return float(tau * math.sqrt(np.sum(theta ** 4)))


@dataclass
class AbpEstimate:
    value: float
    stderr: float
    replicas: int
    grid_step: float
    flags: list = field(default_factory=list)


def _abp_from_dev(dev, grid):
    # P(dev >= eps) for each grid point, via the sorted deviations
    s = np.sort(dev)
    tail = 1.0 - np.searchsorted(s, grid, side="left") / s.size
    ok = np.nonzero(tail <= grid)[0]
    return (float(grid[ok[0]]) if ok.size else math.nan), ok.size == 0


def abp_epsilon(spec, N: int = 100_000, rng=0, *, replicas: int = 16, grid=None,
                batch=None) -> AbpEstimate:
    """Smallest eps on the grid with P(| |X|/sqrt(n) - 1 | >= eps) <= eps."""
    if not spec.isotropic:
        raise ConfigError("the thin-shell epsilon needs an isotropic spec")
    n = spec.dim
    grid = np.arange(1, 1000) / 1000.0 if grid is None else np.asarray(grid, float)
    sqn = math.sqrt(n)
    flags = []
    if batch is not None:
        blocks = [np.asarray(batch, dtype=float)]
    else:
        sizes = split_counts(N, replicas)
        blocks = replicate_indexed(lambda k, s: dist.sample_array(spec, sizes[k], s.generator()),
                                   rng, replicas)
    devs = [np.abs(np.linalg.norm(b, axis=1) / sqn - 1.0) for b in blocks]
    value, miss = _abp_from_dev(np.concatenate(devs), grid)
    if miss:
        flags.append("no grid point satisfies the condition")
    if value == grid[0]:
        flags.append("at grid minimum: resolution insufficient")
    per = [_abp_from_dev(d, grid)[0] for d in devs]
    se = summarize(per).stderr if len(per) > 1 else math.inf
    step = float(np.min(np.diff(grid))) if grid.size > 1 else math.nan
    return AbpEstimate(value, se, len(blocks), step, flags)
