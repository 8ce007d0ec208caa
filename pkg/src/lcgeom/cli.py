"""Command-line runner: one subcommand per experiment, JSON-lines out.

Exit codes: 0 all enabled checks pass, 1 a check failed, 2 config error,
3 budget exhausted (a partial report is still written).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from . import acceptance, clt, covariance, isoperimetry, isotropy, moments, volume
from . import distributions as dist
from .bodies import parse_body
from .config import SCHEMAS, load_config
from .errors import BudgetExhausted, ConfigError, MomentNotExistError
from .numerics import (RngStream, integrate_halfline, ks_distance, norm_cdf, operator_norm_sym,
                       unit_directions, worker_count)
from .report import record, write_csv, write_report

# name, required keys, description, module operations exercised
CATALOG = (
    ("sample", "spec.family spec.n N",
     "draw a batch, check log-concavity at midpoints, report L_f and the isotropy map",
     ("sample", "log_density", "midpoint_logconcavity", "empirical_isotropy",
      "isotropic_constant_density")),
    ("shell", "spec.family spec.n",
     "thin-shell statistics of |X| and a named tail form against empirical tails",
     ("shell_stats", "tail_form_check")),
    ("moments", "spec.family spec.n",
     "strong and weak moments over a p-grid, Borell growth, s-concave parameters",
     ("strong_moment", "weak_moment", "borell_growth", "sconcave_params")),
    ("weak-strong", "spec.family spec.n",
     "ratio of strong moments to E|X| + sigma_p, and the H(p, lambda) ratio",
     ("weak_strong_check", "h_condition_ratio")),
    ("cov-approx", "spec.family spec.n",
     "operator-norm deviation of the empirical covariance and sample complexity",
     ("cov_deviation", "sample_complexity_curve", "operator_norm_sym")),
    ("clt", "spec.family spec.n",
     "Kolmogorov distance of one-dimensional marginals to the normal law",
     ("marginal_ks", "direction_survey", "classical_be_bound", "ks_distance")),
    ("abp", "spec.family spec.n",
     "smallest eps with P(| |X|/sqrt(n) - 1 | >= eps) <= eps",
     ("abp_epsilon",)),
    ("isoperimetry", "spec.family spec.n",
     "boundary measure, half-space conductance, Cheeger lower bounds, Poincare probes",
     ("boundary_measure", "halfspace_cheeger", "cheeger_lower_bounds", "poincare_quotient",
      "gaussian_halfspace_profile")),
    ("kp-body", "spec.family spec.n p",
     "radial function and midpoint convexity of the Ball body K_p(f)",
     ("ball_body_radial", "integrate_halfline")),
    ("sections", "body",
     "hyperplane section volumes through the origin and the isotropic constant",
     ("section_volume", "isotropic_constant_body")),
    ("volume", "body",
     "multiphase volume estimate after rounding, with hit-and-run walks",
     ("volume_multiphase", "round_body", "hit_and_run_step")),
    ("hull", "n points",
     "volume ratio of a random symmetric hull inside the Euclidean ball",
     ("hull_volume_ratio",)),
    ("proof-check", "spec.family spec.n",
     "Monte-Carlo sides of the three steps behind the weak/strong bound",
     ("proof_chain_check",)),
    ("accept", "",
     "the acceptance suite, including the cross-worker determinism check",
     ()),
)


def list_experiments() -> str:
    lines = []
    for name, keys, desc, ops in CATALOG:
        lines.append(f"{name:13s} {desc}")
        lines.append(f"{'':13s}   required: {keys or '(none)'}")
        if ops:
            lines.append(f"{'':13s}   ops: {', '.join(ops)}")
    return "\n".join(lines) + "\n"


def _ci(est, se):
    return [est - 1.959963984540054 * se, est + 1.959963984540054 * se]


# ---------------------------------------------------------------------------
# experiments: each returns (records, csv tables {filename: (header, rows)})


def run_sample(cfg, s, out):
    spec, N = cfg.spec, cfg["N"]
    batch = dist.sample(spec, N, s.substream(0))
    X = batch.data
    recs = []
    mu = X.mean(axis=0)
    recs.append(record("sample", "sample mean norm", params={"N": N, "stream": batch.stream},
                       estimate=float(np.linalg.norm(mu)),
                       ci=[0.0, float(np.linalg.norm(mu) + 1.96 * X.std(axis=0).max()
                                      / math.sqrt(N))]))
    gen = s.substream(1).generator()
    k = min(cfg["pairs"], N // 2)
    idx = gen.permutation(N)[: 2 * k].reshape(k, 2)
    if spec.log_concave:
        lc = dist.midpoint_logconcavity(spec, ((X[a], X[b]) for a, b in idx))
        recs.append(record("sample", "midpoint log-concavity", params={"pairs": k},
                           estimate=lc.checked, exact=True, passed=lc.passed,
                           flags=[] if lc.passed else ["witness pair found"]))
    lf = [dist.log_density(spec, X[i]) for i in range(min(N, 5))]
    recs.append(record("sample", "log density of first rows", estimate=lf, exact=True))
    T = isotropy.empirical_isotropy(X)
    Y = T(X)
    dev = operator_norm_sym(Y.T @ Y / N - np.eye(spec.dim))
    recs.append(record("sample", "empirical isotropy residual", estimate=dev, exact=True,
                       bound={"upper": 1e-8}, passed=dev <= 1e-8))
    if spec.log_concave and spec.family != "oracle_uniform":
        L = isotropy.isotropic_constant_density(spec)
        recs.append(record("sample", "isotropic constant L_f", estimate=L, exact=True))
    rows = [[i] + [float(v) for v in x] for i, x in enumerate(X[:10_000])]
    return recs, {"sample.csv": (["row"] + [f"x{j}" for j in range(spec.dim)], rows)}


def run_shell(cfg, s, out):
    spec = cfg.spec
    st = moments.shell_stats(spec, cfg["N"], cfg["t-grid"], s.substream(0), cfg["replicas"])
    p = {"n": spec.dim, "N": cfg["N"], "replicas": cfg["replicas"]}
    recs = [record("shell", name, params=p, estimate=getattr(st, key),
                   ci=_ci(getattr(st, key), st.stderr[key]))
            for name, key in (("E|X|", "mean_norm"), ("Var|X|", "var_norm"),
                              ("Var|X|^2", "var_norm_sq"), ("E|X|^2", "e2"))]
    recs.append(record("shell", "Var|X|^2 / E|X|^2", params=p, estimate=st.var_ratio, ci=None,
                       flags=["ratio of pooled estimates"] + st.flags))
    led = moments.tail_form_check(spec, cfg["N"], cfg["tail-form"], cfg["t-grid"], s.substream(1),
                                  C=cfg["C"], c=cfg["c"], replicas=cfg["replicas"])
    recs.append(record("shell", f"tail form {led.form} dominates", params={**p, "t": led.t},
                       estimate=led.empirical, ci=led.ci, bound={"values": led.bound},
                       constants=led.constants, passed=led.dominates, flags=led.flags))
    rows = [[t, e, c[0], c[1], b] for t, e, c, b in zip(led.t, led.empirical, led.ci, led.bound)]
    return recs, {"shell_tails.csv": (["t", "empirical", "ci_low", "ci_high", "bound"], rows)}


def run_moments(cfg, s, out):
    spec = cfg.spec
    ps = cfg["p-grid"] or moments.p_grid(spec.dim)
    recs, rows = [], []
    if spec.family == "sconcave":
        pr = dist.sconcave_params(spec.dim, spec.r)
        recs.append(record("moments", "sconcave params", params={"n": spec.dim, "r": spec.r},
                           estimate={"s": pr.s, "beta": pr.beta, "gamma": pr.gamma}, exact=True))
    for i, p in enumerate(ps):
        try:
            sm = moments.strong_moment(spec, p, cfg["N"], s.substream(2 * i), cfg["replicas"])
        except MomentNotExistError as exc:
            recs.append(record("moments", f"strong moment p={p}", params={"p": p},
                               estimate=None, exact=True, flags=["nonexistent moment", str(exc)]))
            continue
        wm = moments.weak_moment(spec, p, cfg["N"], s.substream(2 * i + 1))
        recs.append(record("moments", f"strong moment p={p}", params={"p": p, "N": cfg["N"]},
                           estimate=sm.value, ci=list(sm.ci), flags=sm.flags))
        recs.append(record("moments", f"weak moment p={p}", params={"p": p, "N": cfg["N"]},
                           estimate=wm.value, ci=list(wm.ci),
                           flags=wm.flags))
        rows.append([p, sm.value, sm.stderr, wm.value, wm.stderr])
    if spec.log_concave:
        z = np.eye(spec.dim)[0]
        table, gmax = moments.borell_growth(spec, z, cfg["borell-p-grid"], cfg["N"], s.substream(999))
        recs.append(record("moments", "Borell growth max_p g(p)", params={"z": "e1"},
                           estimate=gmax, ci=None, bound={"table": table},
                           flags=["Monte-Carlo; bounded for log-concave marginals"]))
    return recs, {"moments.csv": (["p", "strong", "strong_se", "weak", "weak_se"], rows)}


def run_weak_strong(cfg, s, out):
    spec = cfg.spec
    ps = cfg["p-grid"] or moments.p_grid(spec.dim)
    ws = moments.weak_strong_check(spec, ps, cfg["norm"], cfg["N"], s.substream(0), cfg["replicas"])
    budget = cfg["C"] + 1.0
    recs = [record("weak-strong", f"ratio p={r.p}", params={"p": r.p, "norm": cfg["norm"]},
                   estimate=r.ratio, ci=_ci(r.ratio, r.stderr), bound={"upper": budget},
                   constants={"C": cfg["C"], "c": cfg["c"]}, passed=r.ratio <= budget,
                   flags=["sigma_p is a search lower bound"] + r.flags) for r in ws]
    hp = cfg["h-p"]
    m = math.ceil(hp)
    A = s.substream(1).generator().standard_normal((m, spec.dim))
    h = moments.h_condition_ratio(spec, hp, A, "euclidean", cfg["N"], s.substream(2))
    recs.append(record("weak-strong", f"H(p, lambda) ratio p={hp}",
                       params={"p": hp, "m": m, "gauge": h.gauge}, estimate=h.ratio, ci=None,
                       flags=[h.note]))
    rows = [[r.p, r.strong, r.mean_norm, r.sigma, r.ratio, r.stderr] for r in ws]
    return recs, {"weak_strong.csv": (["p", "strong", "mean_norm", "sigma", "ratio", "stderr"], rows)}


def run_cov_approx(cfg, s, out):
    spec = cfg.spec
    reps = max(cfg["replicas"], 32)
    Ns = cfg["N-grid"]
    recs, rows = [], []
    for i, N in enumerate(Ns):
        rep = covariance.cov_deviation(spec, N, s.substream(i), replicas=reps)
        lo, hi = np.quantile(rep.eps_values, [0.25, 0.75])
        recs.append(record("cov-approx", f"eps_hat N={N}", params={"N": N, "replicas": reps},
                           estimate=rep.eps_hat, ci=[float(lo), float(hi)],
                           flags=["interquartile range of replicas"]))
        rows.append([N, rep.eps_hat, rep.median, rep.s_min, rep.s_max])
    slope = covariance.loglog_slope(Ns, [r[2] for r in rows]) if len(Ns) > 1 else None
    recs.append(record("cov-approx", "log-log slope of median eps_hat", estimate=slope, ci=None,
                       bound={"reference": -0.5}, flags=["regression on replica medians"]))
    curve = covariance.sample_complexity_curve(spec, cfg["eps-grid"], cfg["eta"], reps,
                                               s.substream(100))
    for r in curve.rows:
        recs.append(record("cov-approx", f"N*(eps={r.eps})", params={"eta": cfg["eta"]},
                           estimate=r.N_star, ci=None, bound=curve.references[r.eps],
                           flags=(["lower bound only"] if r.lower_bound_only else [])
                           + (["eta below 1/replicas"] if curve.unresolved_eta else [])))
    curve.write_csv(os.path.join(out, "cov_complexity.csv"))
    return recs, {"cov_deviation.csv": (["N", "eps_hat", "median", "s_min", "s_max"], rows)}


def run_clt(cfg, s, out):
    spec, N, n = cfg.spec, cfg["N"], cfg.spec.dim
    noise = 1.36 / math.sqrt(N)
    recs = []
    for i, (name, th) in enumerate((("e1", np.eye(n)[0]), ("diagonal", np.ones(n) / math.sqrt(n)))):
        k = clt.marginal_ks(spec, th, N, s.substream(i))
        recs.append(record("clt", f"KS({name})", params={"N": N}, estimate=k,
                           ci=[max(0.0, k - noise), k + noise],
                           bound={"classical_be": clt.classical_be_bound(th, cfg["tau"])}))
    sv = clt.direction_survey(spec, cfg["directions"], N, s.substream(2),
                              thresholds=cfg["thresholds"])
    for t, f in sv.fractions.items():
        recs.append(record("clt", f"fraction of directions with KS <= {t}",
                           params={"directions": len(sv.ks)}, estimate=f, exact=True))
    g = s.substream(3).generator().standard_normal(N)
    ref = ks_distance(np.sort(g), norm_cdf)
    recs.append(record("clt", "KS of a true normal sample (noise floor)", params={"N": N},
                       estimate=ref, ci=[0.0, noise]))
    sv.write_csv(os.path.join(out, "clt_directions.csv"))
    with open(os.path.join(out, "clt_summary.json"), "w") as fh:
        fh.write(sv.summary_json() + "\n")
    return recs, {}


def run_abp(cfg, s, out):
    e = clt.abp_epsilon(cfg.spec, cfg["N"], s, replicas=cfg["replicas"])
    return [record("abp", "eps*", params={"N": cfg["N"], "n": cfg.spec.dim, "grid_step": e.grid_step},
                   estimate=e.value, ci=_ci(e.value, e.stderr), flags=e.flags)], {}


def run_isoperimetry(cfg, s, out):
    spec, N, n = cfg.spec, cfg["N"], cfg.spec.dim
    recs = []
    b = isoperimetry.boundary_measure(spec, isoperimetry.Halfspace(np.eye(n)[0], 0.0), cfg["eps"],
                                      N, s.substream(0))
    recs.append(record("isoperimetry", "boundary measure of {x_1 <= 0}", params={"eps": cfg["eps"]},
                       estimate=b.value, ci=list(b.ci), flags=b.flags))
    h = isoperimetry.halfspace_cheeger(spec, cfg["directions"], N=N, rng=s.substream(1))
    recs.append(record("isoperimetry", "half-space conductance", params={"N": N},
                       estimate=h.value, ci=None, flags=[h.label] + h.flags))
    st = moments.shell_stats(spec, min(N, 200_000), rng=s.substream(2))
    lb = isoperimetry.cheeger_lower_bounds(st)
    recs.append(record("isoperimetry", "Cheeger lower-bound forms",
                       estimate={"kls": lb.kls, "bobkov": lb.bobkov, "eldan": lb.eldan, "gm": lb.gm},
                       ci=None, flags=[lb.label]))
    for name, q in isoperimetry.poincare_survey(spec, min(N, 200_000), s.substream(3),
                                                cfg["replicas"]).items():
        recs.append(record("isoperimetry", f"Poincare quotient {name}", estimate=q.quotient,
                           ci=_ci(q.quotient, q.stderr)))
    if spec.family == "gaussian":
        for k, (alpha, eps) in enumerate(((0.3, 0.05), (0.5, 0.1))):
            v, se = isoperimetry.halfspace_expansion(spec, np.eye(n)[0], alpha, eps, N,
                                                     s.substream(10 + k))
            prof = isoperimetry.gaussian_halfspace_profile(alpha, eps)
            recs.append(record("isoperimetry", f"gaussian profile alpha={alpha} eps={eps}",
                               estimate=v, ci=_ci(v, se), bound={"exact": prof},
                               passed=abs(v - prof) <= 3 * se))
    return recs, {}


def run_kp_body(cfg, s, out):
    spec, p = cfg.spec, cfg["p"]
    K = isotropy.BallBody(spec, p)
    D = unit_directions(cfg["directions"], spec.dim, s.substream(0).generator())
    radii = [K.radial(t) for t in D]
    recs = [record("kp-body", "radial function", params={"p": p, "directions": len(D)},
                   estimate={"min": min(radii), "max": max(radii)}, exact=True,
                   flags=["adaptive quadrature to 1e-10"])]
    mc = isotropy.ball_body_midpoint_check(spec, p, cfg["pairs"], s.substream(1))
    recs.append(record("kp-body", "midpoint convexity", params={"pairs": mc.pairs},
                       estimate=mc.passed, exact=True, passed=mc.passed == mc.pairs))
    # sanity: the quadrature integrates the Gaussian-free test function exactly
    unit = integrate_halfline(lambda u: math.exp(-u))
    recs.append(record("kp-body", "quadrature check int e^-u", estimate=unit, exact=True,
                       bound={"target": 1.0, "tol": 1e-9}, passed=abs(unit - 1) <= 1e-9))
    isotropy.write_radial_csv(os.path.join(out, "kp_radial.csv"), K, D)
    return recs, {}


def run_sections(cfg, s, out):
    body = parse_body(cfg["body"])
    n = body.dim
    D = np.vstack([np.eye(n)[:1], unit_directions(cfg["directions"], n, s.substream(0).generator())])
    recs, rows = [], []
    for i, th in enumerate(D):
        sv = isotropy.section_volume(body, th, cfg["N"], s.substream(1 + i), cfg["replicas"])
        recs.append(record("sections", f"section volume direction {i}", estimate=sv.value,
                           ci=list(sv.ci)))
        rows.append([i] + [float(v) for v in th] + [sv.value, sv.stderr])
    spec = dist.DistributionSpec("oracle_uniform", n, body=body)
    L = isotropy.isotropic_constant_body(spec, rng=s.substream(500))
    recs.append(record("sections", "isotropic constant L_K", estimate=L.value,
                       ci=None if L.exact else list(L.ci), exact=L.exact))
    header = ["direction"] + [f"theta{j}" for j in range(n)] + ["volume", "stderr"]
    return recs, {"sections.csv": (header, rows)}


def run_volume(cfg, s, out):
    body = parse_body(cfg["body"])
    rnd = volume.round_body(body, cfg["round-samples"], 0, s.substream(0))
    step = volume.hit_and_run_step(body, body.interior_point, s.substream(1))
    recs = [record("volume", "rounded sandwich ratio", estimate=rnd.d_hat, ci=None,
                   bound={"upper": 10.0}, passed=rnd.d_hat <= 10.0,
                   flags=["probe estimate from 2n+64 directions"]),
            record("volume", "hit-and-run step stays inside", estimate=bool(body.contains(step)),
                   exact=True, passed=bool(body.contains(step)))]
    try:
        est = volume.volume_multiphase(body, cfg["eps"], cfg["eta"], s.substream(2),
                                       rounding_samples=cfg["round-samples"],
                                       max_calls=cfg["max-calls"])
    except BudgetExhausted as exc:
        est = exc.partial
        recs.append(_volume_record(body, est, cfg))
        exc.records = recs
        raise
    recs.append(_volume_record(body, est, cfg))
    return recs, {"phases.csv": (["phase", "ratio"], list(enumerate(est.phase_ratios)))}


def _volume_record(body, est, cfg):
    exact = body.volume
    passed = None if exact is None else abs(est.value / exact - 1) <= cfg["eps"]
    return record("volume", "volume", params={"eps": cfg["eps"], "eta": cfg["eta"], **est.walk},
                  estimate=est.value, ci=list(est.ci),
                  bound=None if exact is None else {"exact": exact, "rel_tol": cfg["eps"]},
                  passed=passed, flags=est.flags + [f"phases={est.phases}",
                                                    f"calls={est.oracle_calls}"])


def run_hull(cfg, s, out):
    h = volume.hull_volume_ratio(cfg["n"], cfg["points"], cfg["trials"], s, mc=cfg["mc"])
    return [record("hull", "(Vol conv / Vol B)^(1/n)", params={"n": cfg["n"], "N": cfg["points"]},
                   estimate=h.root, ci=_ci(h.root, h.stderr),
                   bound={"sqrt(log(1+N/n)/n)": h.bound},
                   flags=[f"undecided points redrawn: {h.indeterminate}"])], {}


def run_proof_check(cfg, s, out):
    m = cfg["m"] or None
    led = moments.proof_chain_check(cfg.spec, cfg["p"], m, cfg["N"], s, draws=cfg["draws"],
                                    budget=cfg["C"])
    return [record("proof-check", f"step {lg.name}", params={"p": cfg["p"], "m": m},
                   estimate=lg.constant, ci=None, bound={"upper": cfg["C"]},
                   constants={"C": cfg["C"]}, passed=lg.holds,
                   flags=[f"lhs={lg.lhs:.6g}", f"main={lg.main:.6g}"]) for lg in led], {}


RUNNERS = {
    "sample": run_sample, "shell": run_shell, "moments": run_moments,
    "weak-strong": run_weak_strong, "cov-approx": run_cov_approx, "clt": run_clt,
    "abp": run_abp, "isoperimetry": run_isoperimetry, "kp-body": run_kp_body,
    "sections": run_sections, "volume": run_volume, "hull": run_hull,
    "proof-check": run_proof_check,
}


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="lcgeom", description="log-concave geometry experiments")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default="reports")
    ap.add_argument("--replicas", type=int, default=None)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--config", default=None)
    ap.add_argument("experiment", choices=list(SCHEMAS) + ["list"])
    ap.add_argument("overrides", nargs="*", metavar="key=value")
    return ap


def _exit_code(records):
    return 1 if any(r["pass"] is False for r in records) else 0


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.experiment == "list":
        sys.stdout.write(list_experiments())
        return 0
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.replicas is not None:
        overrides.append(f"replicas={args.replicas}")
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.experiment, args.config, overrides)
        if not os.path.isdir(args.out):
            os.makedirs(args.out, exist_ok=True)
        if not os.access(args.out, os.W_OK):
            raise ConfigError(f"output path {args.out} is not writable")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    name = cfg.experiment
    text = cfg.to_text()
    if cfg.spec is not None:
        text += "".join(f"# spec: {ln}\n" for ln in cfg.spec.to_text().splitlines())
    summary = {"experiment": name, "seed": cfg.seed, "workers": args.workers,
               "rng": RngStream(cfg.seed).ident()}

    if name == "accept":
        workers = (1, max(args.workers, 8))
        records, timings = acceptance.run_acceptance(cfg.seed, workers, cfg["criteria"])
        budget_ok = all(v <= 180.0 for k, v in timings.items() if "C11 volume" in k)
        summary.update(timings=timings, volume_budget_ok=budget_ok,
                       criteria={r["experiment"]: r["pass"] for r in records})
        write_report(args.out, name, records, text, summary)
        code = _exit_code(records) or (0 if budget_ok else 1)
        print(f"{sum(r['pass'] is True for r in records)}/{len(records)} checks passed")
        return code

    stream = RngStream(cfg.seed)
    try:
        with worker_count(args.workers):
            records, tables = RUNNERS[name](cfg, stream, args.out)
    except BudgetExhausted as exc:
        recs = getattr(exc, "records", [])
        summary.update(runtime=time.perf_counter() - t0, budget_exhausted=str(exc))
        write_report(args.out, name, recs, text, summary)
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, MomentNotExistError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for fname, (header, rows) in tables.items():
        write_csv(os.path.join(args.out, fname), header, rows)
    summary["runtime"] = time.perf_counter() - t0
    path = write_report(args.out, name, records, text, summary)
    print(path)
    return _exit_code(records)


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
