"""The acceptance suite: thirteen criteria, each producing schema records.

Criterion ``i`` draws only from ``RngStream(seed).substream(i)``, so the
records are a pure function of the seed. Wall-clock budgets live in the
summary, never in the records.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hadamard
from scipy.stats import betaprime

from . import clt, covariance, isoperimetry, isotropy, moments, volume
from . import distributions as dist
from .bodies import ball, cube, simplex
from .errors import MomentNotExistError
from .numerics import RngStream, unit_directions, worker_count
from .report import dumps, record


def _within(x, target, tol):
    return abs(x - target) <= tol


def c01(s):
    n = 64
    st = moments.shell_stats(dist.family_spec("gaussian", n), 200_000, rng=s, replicas=16)
    var_rel = abs(st.var_norm_sq - 2 * n) / (2 * n)
    mean_rel = abs(st.e2 - n) / n
    se = st.stderr["var_norm_sq"]
    return [
        record("C1", "gaussian Var|X|^2 = 2n", params={"n": n, "N": 200_000, "replicas": 16},
               estimate=st.var_norm_sq, ci=[st.var_norm_sq - 1.96 * se, st.var_norm_sq + 1.96 * se],
               bound={"target": 2 * n, "rel_tol": 0.05}, passed=var_rel <= 0.05),
        record("C1", "gaussian E|X|^2 = n", params={"n": n, "N": 200_000, "replicas": 16},
               estimate=st.e2, ci=[st.e2 - 1.96 * st.stderr["e2"], st.e2 + 1.96 * st.stderr["e2"]],
               bound={"target": n, "rel_tol": 0.01}, passed=mean_rel <= 0.01),
    ]


def c02(s):
    out = []
    for i, n in enumerate((16, 64)):
        st = moments.shell_stats(dist.family_spec("cube", n), 200_000, rng=s.substream(i))
        v = st.var_norm_sq / n
        se = st.stderr["var_norm_sq"] / n
        out.append(record("C2", f"cube Var|X|^2/n n={n}", params={"n": n, "N": 200_000},
                          estimate=v, ci=[v - 1.96 * se, v + 1.96 * se],
                          bound={"target": 0.8, "tol": 0.04}, passed=_within(v, 0.8, 0.04)))
    return out


def c03(s):
    out = []
    ns = (16, 64, 256)
    for j, fam in enumerate(("cube", "l1_ball", "exponential")):
        eps = [clt.abp_epsilon(dist.family_spec(fam, n), 100_000, s.substream(3 * j + i))
               for i, n in enumerate(ns)]
        vals = [e.value for e in eps]
        out.append(record("C3", f"eps* decreasing {fam}", params={"n": list(ns), "N": 100_000},
                          estimate=vals, ci=[[e.value - 1.96 * e.stderr, e.value + 1.96 * e.stderr]
                                             for e in eps],
                          bound={"rule": "strictly decreasing"},
                          passed=all(b < a for a, b in zip(vals, vals[1:]))))
    g = clt.abp_epsilon(dist.family_spec("gaussian", 100), 100_000, s.substream(99))
    out.append(record("C3", "gaussian eps* n=100", params={"n": 100, "N": 100_000},
                      estimate=g.value, ci=[g.value - 1.96 * g.stderr, g.value + 1.96 * g.stderr],
                      bound={"target": 0.12, "tol": 0.03}, passed=_within(g.value, 0.12, 0.03),
                      flags=g.flags))
    return out


def c04(s):
    out = []
    fams = ("cube", "l1_ball", "l2_ball", "linf_ball", "exponential")
    k = 0
    for fam in fams:
        for n in (16, 64, 256):
            st = moments.shell_stats(dist.family_spec(fam, n), 100_000, rng=s.substream(k))
            k += 1
            se = st.stderr["var_norm"]
            out.append(record("C4", f"Var|X| <= 4 {fam} n={n}", params={"n": n, "N": 100_000},
                              estimate=st.var_norm, ci=[st.var_norm - 1.96 * se,
                                                        st.var_norm + 1.96 * se],
                              bound={"upper": 4.0}, passed=st.var_norm <= 4.0))
    return out


def c05(s):
    out = []
    Ns = [2 ** k for k in range(9, 15)]
    for j, fam in enumerate(("gaussian", "cube", "l1_ball")):
        med = covariance.deviation_curve(dist.family_spec(fam, 32), Ns, 32, s.substream(j))
        slope = covariance.loglog_slope(Ns, med)
        out.append(record("C5", f"log-log slope {fam}", params={"n": 32, "N": Ns, "replicas": 32},
                          estimate=slope, exact=False, ci=None,
                          bound={"target": -0.5, "tol": 0.1}, passed=_within(slope, -0.5, 0.1),
                          flags=["regression slope of replica medians"]))
    H = hadamard(32).astype(float)
    rep = covariance.cov_deviation(dist.family_spec("gaussian", 32), 32, batch=H)
    out.append(record("C5", "orthogonal batch eps_hat = 0", params={"n": 32, "batch": "hadamard"},
                      estimate=rep.eps_hat, exact=True, bound={"target": 0.0},
                      passed=rep.eps_hat == 0.0))
    return out


def c06(s):
    out = []
    fams = ("gaussian", "exponential", "cube", "simplex", "l1_ball", "l2_ball")
    ps = [1.0, 2.0, 4.0, 8.0, 16.0]
    for j, fam in enumerate(fams):
        rows = moments.weak_strong_check(dist.family_spec(fam, 64), ps, "l2", 100_000,
                                         s.substream(j))
        ratios = [r.ratio for r in rows]
        cis = [[r.ratio - 1.96 * r.stderr, r.ratio + 1.96 * r.stderr] for r in rows]
        out.append(record("C6", f"weak/strong ratio <= 2 {fam}", params={"n": 64, "p": ps},
                          estimate=ratios, ci=cis, bound={"upper": 2.0},
                          constants={"C": 1.0, "c": 1.0}, passed=max(ratios) <= 2.0,
                          flags=["sigma_p is a search lower bound"]))
        if fam == "gaussian":
            out.append(record("C6", "weak/strong ratio <= 1.1 gaussian", params={"n": 64, "p": ps},
                              estimate=ratios, ci=cis, bound={"upper": 1.1},
                              constants={"C": 1.0, "c": 1.0}, passed=max(ratios) <= 1.1))
    return out


def c07(s):
    led = moments.proof_chain_check(dist.family_spec("gaussian", 4), 2.0, 2, 100_000, s,
                                    draws=100)
    out = []
    for lg in led[:2]:
        out.append(record("C7", f"step {lg.name} implied constant <= 3",
                          params={"n": 4, "p": 2, "m": 2}, estimate=lg.constant, ci=None,
                          bound={"upper": 3.0}, passed=lg.constant <= 3.0,
                          flags=["Monte-Carlo constant"]))
    g = led[2]
    out.append(record("C7", "geometric step per draw", params={"n": 4, "p": 2, "m": 2, "draws": 100},
                      estimate=g.detail["draws_holding"], exact=True,
                      bound={"min_draws": 99}, passed=g.detail["draws_holding"] >= 99))
    return out


def c08(s):
    n = 100
    spec = dist.family_spec("cube", n)
    N = 100_000
    ks1 = clt.marginal_ks(spec, np.eye(n)[0], N, s.substream(0))
    ksd = clt.marginal_ks(spec, np.ones(n) / math.sqrt(n), N, s.substream(1))
    sv = clt.direction_survey(spec, 200, N, s.substream(2), thresholds=(0.03,))
    noise = 1.36 / math.sqrt(N)
    return [
        record("C8", "KS(e1)", params={"n": n, "N": N}, estimate=ks1,
               ci=[ks1 - noise, ks1 + noise], bound={"target": 0.057, "tol": 0.01},
               passed=_within(ks1, 0.057, 0.01)),
        record("C8", "KS(diagonal)", params={"n": n, "N": N}, estimate=ksd,
               ci=[max(0.0, ksd - noise), ksd + noise], bound={"upper": 0.02}, passed=ksd <= 0.02),
        record("C8", "fraction of directions with KS <= 0.03", params={"n": n, "N": N, "dirs": 200},
               estimate=sv.fractions[0.03], exact=True, bound={"lower": 0.9},
               passed=sv.fractions[0.03] >= 0.9),
    ]


def c09(s):
    out = []
    n = 8
    g = dist.family_spec("gaussian", n)
    h = isoperimetry.halfspace_cheeger(g, 32, N=1_000_000, rng=s.substream(0))
    target = float(4 / math.sqrt(2 * math.pi))
    out.append(record("C9", "gaussian half-space conductance", params={"n": n, "N": 1_000_000},
                      estimate=h.value, ci=None, bound={"target": target, "rel_tol": 0.08},
                      passed=abs(h.value / target - 1) <= 0.08, flags=[h.label] + h.flags))
    e = isoperimetry.halfspace_cheeger(dist.family_spec("exponential", n), 32, N=1_000_000,
                                       rng=s.substream(1))
    out.append(record("C9", "product exponential half-space conductance",
                      params={"n": n, "N": 1_000_000}, estimate=e.value, ci=None,
                      bound={"target": math.sqrt(2), "rel_tol": 0.1},
                      passed=abs(e.value / math.sqrt(2) - 1) <= 0.1, flags=[e.label] + e.flags))
    probes = isoperimetry.probe_family(n, s.substream(2))
    for i, name in enumerate(("linear_e1", "linear_diag", "linear_random")):
        F, G, lip = probes[name]
        q = isoperimetry.poincare_quotient(g, F, G, 200_000, s.substream(3 + i), lipschitz=lip)
        out.append(record("C9", f"Poincare quotient {name}", params={"n": n, "N": 200_000},
                          estimate=q.quotient, ci=[q.quotient - 1.96 * q.stderr,
                                                   q.quotient + 1.96 * q.stderr],
                          bound={"target": 1.0, "tol": 0.02},
                          passed=_within(q.quotient, 1.0, 0.02)))
    k = 10
    for alpha in (0.3, 0.5):
        for eps in (0.05, 0.1):
            v, se = isoperimetry.halfspace_expansion(g, np.eye(n)[0], alpha, eps, 1_000_000,
                                                     s.substream(k))
            k += 1
            prof = isoperimetry.gaussian_halfspace_profile(alpha, eps)
            out.append(record("C9", f"gaussian profile alpha={alpha} eps={eps}",
                              params={"alpha": alpha, "eps": eps, "N": 1_000_000}, estimate=v,
                              ci=[v - 1.96 * se, v + 1.96 * se], bound={"exact": prof, "k_se": 3},
                              passed=abs(v - prof) <= 3 * se))
    return out


def c10(s):
    out = []
    n = 4
    dirs = unit_directions(100, n, s.substream(0).generator())
    for fam, exact in (("cube", lambda t: 1.0 / np.max(np.abs(t))),
                       ("l1_ball", lambda t: 1.0 / np.sum(np.abs(t)))):
        K = isotropy.BallBody(dist.family_spec(fam, n, isotropic=False), 2.0)
        err = max(abs(K.radial(t) - exact(t)) for t in dirs)
        out.append(record("C10", f"K_p(1_K) radial {fam}", params={"n": n, "p": 2, "dirs": 100},
                          estimate=err, exact=True, bound={"upper": 1e-6}, passed=err <= 1e-6))
    mc = isotropy.ball_body_midpoint_check(dist.family_spec("exponential", 2, isotropic=False), 3.0,
                                           1000, s.substream(1))
    out.append(record("C10", "midpoint convexity product exponential", params={"n": 2, "p": 3},
                      estimate=mc.passed, exact=True, bound={"required": 1000},
                      passed=mc.passed == 1000))
    r = isotropy.ball_body_radial(dist.DistributionSpec("gaussian", 1), 1.0, np.array([1.0]))
    out.append(record("C10", "gaussian n=1 p=1 radius", params={"n": 1, "p": 1}, estimate=r,
                      exact=True, bound={"target": 1.2533, "tol": 1e-6,
                                         "closed_form": math.sqrt(2 * math.pi) / 2},
                      passed=abs(r - math.sqrt(2 * math.pi) / 2) <= 1e-6))
    return out


def c11(s, timings=None):
    out = []
    cases = (("cube side 2 n=4", cube(4), 16.0), ("B_2^3", ball(3), 4 * math.pi / 3),
             ("simplex n=3", simplex(3), 1 / 6))
    for i, (name, body, exact) in enumerate(cases):
        t0 = time.perf_counter()
        est = volume.volume_multiphase(body, 0.1, 0.05, s.substream(i))
        if timings is not None:
            timings[f"C11 volume {name}"] = time.perf_counter() - t0
        out.append(record("C11", f"volume {name}", params={"eps": 0.1, "eta": 0.05},
                          estimate=est.value, ci=list(est.ci),
                          bound={"target": exact, "rel_tol": 0.1},
                          passed=abs(est.value / exact - 1) <= 0.1,
                          flags=[f"phases={est.phases}", f"calls={est.oracle_calls}"]))
    h = volume.hull_volume_ratio(3, 3, rng=s.substream(5), points=np.eye(3), mc=200_000)
    exact = math.exp((math.log(8 / 6) - (math.log(4 * math.pi / 3))) / 3)
    out.append(record("C11", "cross-polytope hull ratio^(1/3)", params={"n": 3, "N": 3},
                      estimate=h.root, ci=[h.root - 1.96 * h.stderr, h.root + 1.96 * h.stderr],
                      bound={"target": 0.683, "tol": 0.02, "closed_form": exact,
                             "reference": h.bound},
                      passed=_within(h.root, 0.683, 0.02)))
    gen = s.substream(6).generator()
    pts = unit_directions(4, 2, gen)
    hp = volume.hull_volume_ratio(2, 4, rng=s.substream(7), points=pts, mc=200_000)
    area = volume.shoelace_area(np.vstack([pts, -pts]))
    mc_area = hp.ratio * math.pi
    out.append(record("C11", "planar hull vs shoelace", params={"n": 2, "N": 4},
                      estimate=mc_area, ci=None, bound={"exact": area, "rel_tol": 0.02},
                      passed=abs(mc_area / area - 1) <= 0.02, flags=["Monte-Carlo area"]))
    return out


def c12(s):
    out = []
    for n, r, s_ex, beta, gamma in ((3, 1.0, -1.0, 4.0, -0.25), (2, 2.0, -0.5, 4.0, -0.25)):
        pr = dist.sconcave_params(n, r)
        ok = (pr.s, pr.beta, pr.gamma) == (s_ex, beta, gamma)
        out.append(record("C12", f"sconcave_params n={n} r={r}", params={"n": n, "r": r},
                          estimate=[pr.s, pr.beta, pr.gamma], exact=True,
                          bound={"exact": [s_ex, beta, gamma]}, passed=ok))
    spec = dist.DistributionSpec("sconcave", 10, True, r=4.0)
    ts = list(np.geomspace(2.0, 20.0, 12))
    led = moments.tail_form_check(spec, 1_000_000, "sconcave", ts, s, C=1.0, c=3.0, markov=False)
    # slope of the exact radial tail on the same grid (BetaPrime(n, r) survival)
    scale = math.sqrt((4.0 - 1) * (4.0 - 2) / 11.0)
    exact = betaprime(10, 4).sf(np.array(ts) * math.sqrt(10) / scale)
    oracle = float(np.polyfit(np.log(ts), np.log(exact), 1)[0])
    out.append(record("C12", "tail slope r=4 n=10", params={"n": 10, "r": 4, "N": 1_000_000,
                                                            "t": [2, 20]},
                      estimate=led.slope, ci=None, bound={"target": -4.0, "tol": 0.5,
                                                          "exact_radial_slope": oracle},
                      passed=led.slope is not None and _within(led.slope, -4.0, 0.5),
                      flags=["least-squares slope over a 12-point geometric grid"]))
    out.append(record("C12", "corollary bound dominates (c=3)", params={"n": 10, "r": 4},
                      estimate=led.empirical, ci=led.ci, bound={"values": led.bound},
                      constants={"c": 3.0}, passed=led.dominates))
    try:
        moments.strong_moment(spec, 4.0, 1000, s)
        refused = False
    except MomentNotExistError:
        refused = True
    out.append(record("C12", "strong_moment refuses p >= r", params={"r": 4, "p": 4},
                      estimate=None, exact=True, bound=None, passed=refused))
    return out


CRITERIA = {1: c01, 2: c02, 3: c03, 4: c04, 5: c05, 6: c06, 7: c07, 8: c08, 9: c09, 10: c10,
            11: c11, 12: c12}


@dataclass
class SuiteResult:
    records: list
    timings: dict = field(default_factory=dict)

    @property
    def text(self) -> str:
        return dumps(self.records)

    def by_criterion(self) -> dict:
        out: dict = {}
        for r in self.records:
            out.setdefault(int(r["experiment"][1:]), []).append(r)
        return out


def run_suite(seed: int = 0, workers: int = 1, criteria=None) -> SuiteResult:
    """Criteria 1-12 at the given worker count."""
    root = RngStream(seed)
    records, timings = [], {}
    wanted = sorted(CRITERIA) if criteria is None else [c for c in sorted(criteria) if c in CRITERIA]
    with worker_count(workers):
        for i in wanted:
            t0 = time.perf_counter()
            fn = CRITERIA[i]
            recs = fn(root.substream(i), timings) if i == 11 else fn(root.substream(i))
            timings[f"C{i}"] = time.perf_counter() - t0
            records.extend(recs)
    return SuiteResult(records, timings)


def determinism_record(a: SuiteResult, b: SuiteResult, workers=(1, 8)) -> dict:
    same = a.text.encode() == b.text.encode()
    return record("C13", "byte-identical reports across worker counts",
                  params={"workers": list(workers), "bytes": len(a.text.encode())},
                  estimate=same, exact=True, bound=None, passed=same)


def run_acceptance(seed: int = 0, workers=(1, 8), criteria=None):
    """Full suite: records of the first run plus the determinism record; and the timings."""
    want13 = criteria is None or 13 in criteria
    first = run_suite(seed, workers[0], criteria)
    records = list(first.records)
    timings = {f"w{workers[0]}:{k}": v for k, v in first.timings.items()}
    if want13:
        second = run_suite(seed, workers[1], criteria)
        timings.update({f"w{workers[1]}:{k}": v for k, v in second.timings.items()})
        records.append(determinism_record(first, second, workers))
    return records, timings

