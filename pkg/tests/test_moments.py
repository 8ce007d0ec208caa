import math

import numpy as np
import pytest
from scipy.special import gamma, gammaln

from lcgeom import distributions as dist
from lcgeom import moments
from lcgeom.errors import ConfigError, MomentNotExistError
from lcgeom.numerics import RngStream, unit_directions


def test_p_grid():
    assert moments.p_grid(64) == [1.0, 2.0, 4.0, 8.0, 16.0]
    assert moments.p_grid(10) == [1.0, 2.0, 4.0, 8.0]
    assert moments.p_grid(5) == [1.0, 2.0, 4.0, 6.0]


def test_gaussian_var_norm_tends_to_half():
    st = moments.shell_stats(dist.family_spec("gaussian", 256), 100_000, rng=RngStream(0))
    assert st.var_norm == pytest.approx(0.5, rel=0.05)


def test_var_norm_sq_two_ways_agree():
    st = moments.shell_stats(dist.family_spec("cube", 16), 50_000, rng=RngStream(1))
    assert st.var_norm_sq == pytest.approx(st.var_norm_sq_moments, rel=1e-8)


@pytest.mark.parametrize("fam", ["cube", "l1_ball", "l2_ball", "linf_ball", "exponential"])
@pytest.mark.parametrize("n", [16, 64])
def test_fourth_moment_form_unconditional(fam, n):
    st = moments.shell_stats(dist.family_spec(fam, n), 20_000, rng=RngStream(2))
    assert st.fourth_moment_form(10.0)


def test_shell_tail_table_and_flags():
    st = moments.shell_stats(dist.family_spec("gaussian", 16), 2000, (0.05, 5.0), RngStream(3))
    p, (lo, hi) = st.tail[0.05]
    assert 0 < p < 1 and lo <= p <= hi
    assert st.tail[5.0][0] == 0.0
    assert any("t=5.0" in f for f in st.flags)


@pytest.mark.parametrize("n", [4, 16])
def test_strong_moment_gaussian_oracles(n):
    spec = dist.family_spec("gaussian", n)
    m2 = moments.strong_moment(spec, 2.0, 100_000, RngStream(4))
    assert abs(m2.value - math.sqrt(n)) <= 4 * m2.stderr
    m4 = moments.strong_moment(spec, 4.0, 100_000, RngStream(5))
    assert abs(m4.value - (n * (n + 2)) ** 0.25) <= 4 * m4.stderr


def test_strong_moment_refuses_beyond_r():
    spec = dist.DistributionSpec("sconcave", 3, True, r=5.0)
    with pytest.raises(MomentNotExistError, match="moment does not exist"):
        moments.strong_moment(spec, 6.0, 100, RngStream(0))
    with pytest.raises(MomentNotExistError):
        moments.strong_moment(spec, 5.0, 100, RngStream(0))


def test_median_of_means_above_eight():
    m = moments.strong_moment(dist.family_spec("exponential", 4), 12.0, 20_000, RngStream(6))
    assert "median-of-means" in m.flags


def test_weak_moment_isotropic_p2():
    for i, fam in enumerate(("gaussian", "cube", "simplex")):
        w = moments.weak_moment(dist.family_spec(fam, 6), 2.0, 100_000, RngStream(7 + i))
        assert abs(w.value - 1.0) <= 4 * w.stderr + 0.01


def test_weak_moment_gaussian_p4():
    w = moments.weak_moment(dist.family_spec("gaussian", 8), 4.0, 200_000, RngStream(10))
    assert abs(w.value - 3 ** 0.25) <= 4 * w.stderr


def test_gaussian_directional_moments_rotation_invariant():
    from lcgeom import kernels

    X = dist.sample_array(dist.family_spec("gaussian", 5), 100_000, RngStream(11).generator())
    Z = unit_directions(64, 5, np.random.default_rng(0))
    per = np.abs(X @ Z.T) ** 4
    vals = per.mean(axis=0)
    assert np.allclose(vals, kernels.directional_moments(X, Z, 4.0))
    se = per.std(axis=0).mean() / math.sqrt(len(X))
    assert vals.max() - vals.min() <= 2 * 3 * se


def test_profile_monotone_and_weak_below_strong():
    prof = moments.moment_profile(dist.family_spec("exponential", 9), N=40_000, rng=RngStream(12))
    strong = [s.value for s in prof.strong]
    assert all(b >= a for a, b in zip(strong, strong[1:]))
    for s, w in zip(prof.strong, prof.weak):
        assert w.value <= s.value + 3 * (s.stderr + w.stderr)


def test_weak_strong_p1_bounded_by_one():
    for norm in ("l2", "l1", "linf"):
        rows = moments.weak_strong_check(dist.family_spec("cube", 8), [1.0], norm, 20_000,
                                         RngStream(13))
        assert rows[0].ratio <= 1.0


def test_weak_strong_gaussian_linf():
    rows = moments.weak_strong_check(dist.family_spec("gaussian", 64), [8.0], "linf", 100_000,
                                     RngStream(14))
    assert rows[0].ratio <= 2.0


def test_weak_strong_gaussian_l2_chi_oracle():
    rows = moments.weak_strong_check(dist.family_spec("gaussian", 64), [2.0, 8.0, 16.0], "l2",
                                     100_000, RngStream(15))
    assert max(r.ratio for r in rows) <= 1.1


def test_borell_growth():
    table, _ = moments.borell_growth(dist.family_spec("cube", 3), np.eye(3)[0], [2.0], 200_000,
                                     RngStream(16))
    assert table[2.0] == pytest.approx(0.5, abs=0.005)
    table, gmax = moments.borell_growth(dist.family_spec("exponential", 2), [1.0, 0], [4.0, 8.0],
                                        400_000, RngStream(17))
    for p in (4.0, 8.0):
        exact = gamma(p + 1) ** (1 / p) / (math.sqrt(2) * p)
        assert table[p] == pytest.approx(exact, rel=0.05)
    limit = 1 / (math.e * math.sqrt(2))
    assert abs(math.exp(gammaln(2001.0) / 2000) / (math.sqrt(2) * 2000) - limit) < 0.001
    with pytest.raises(ConfigError):
        moments.borell_growth(dist.DistributionSpec("sconcave", 2, True, r=5.0), [1, 0], [2.0])


def test_h_condition_examples():
    spec = dist.family_spec("gaussian", 6)
    h = moments.h_condition_ratio(spec, 1.0, np.ones((1, 6)), N=1000, rng=RngStream(18))
    assert h.ratio == pytest.approx(1.0, abs=1e-12)
    A = np.eye(6)[:4]
    h4 = moments.h_condition_ratio(spec, 4.0, A, N=400_000, rng=RngStream(19))
    exact = 24 ** 0.25 / (math.sqrt(2) * gamma(2.5))
    assert h4.ratio == pytest.approx(exact, rel=0.01)
    assert "does not refute" in h4.note
    f = moments.h_condition_ratio(spec, 2.0, np.eye(6)[:2], "forms3m", 20_000, RngStream(20))
    assert f.ratio >= 1.0


def test_h_condition_shape_errors():
    spec = dist.family_spec("gaussian", 4)
    with pytest.raises(ConfigError):
        moments.h_condition_ratio(spec, 2.0, np.eye(4)[:3], N=10)
    with pytest.raises(ValueError):
        moments.h_condition_ratio(spec, 2.0, np.ones((2, 4)), N=10)


def test_proof_chain_gaussian():
    led = moments.proof_chain_check(dist.family_spec("gaussian", 4), 2.0, 2, 20_000, RngStream(21),
                                    gaussians=200, draws=10)
    assert [lg.name for lg in led] == ["concentration", "gordon", "geometric"]
    assert all(lg.holds for lg in led)
    assert led[2].detail["draws_holding"] == 10


def test_proof_chain_limits():
    with pytest.raises(ConfigError):
        moments.proof_chain_check(dist.family_spec("gaussian", 9), 2.0)


def test_tail_bound_forms():
    t = np.array([0.5, 1.0, 2.0])
    assert np.all(moments.tail_bound("paouris", t, 4) <= 1)
    assert moments.tail_bound("gm", [2.0], 4, C=1, c=1)[0] == pytest.approx(math.exp(-4))
    assert moments.tail_bound("small-ball", [0.1], 4, C=1, c=1)[0] == pytest.approx(0.01)
    assert moments.tail_bound("sconcave", [4.0], 4, c=1, r=4)[0] == pytest.approx((2 / 4) ** 2)
    with pytest.raises(ConfigError):
        moments.tail_bound("nope", t, 4)


def test_tail_form_at_zero_is_one():
    led = moments.tail_form_check(dist.family_spec("gaussian", 9), 5000, "paouris", [0.0],
                                  RngStream(22), C=1.0)
    assert led.empirical[0] == 1.0 and led.bound[0] == 1.0 and led.dominates
    assert any("extrapolated" in f for f in led.flags)


def test_tail_form_gaussian_gm_dominates():
    led = moments.tail_form_check(dist.family_spec("gaussian", 16), 100_000, "gm",
                                  [0.05, 0.1, 0.2, 0.5], RngStream(23))
    assert led.dominates


def test_tail_form_sconcave_requires_sconcave():
    with pytest.raises(ConfigError):
        moments.tail_form_check(dist.family_spec("gaussian", 4), 100, "sconcave", [1.0])
