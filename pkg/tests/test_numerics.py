import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from lcgeom.errors import NonConvergenceError
from lcgeom.numerics import (AffineMap, RngStream, eigh_sym, integrate_halfline, inv_sqrt_sym,
                             ks_distance, norm_cdf, norm_ppf, operator_norm_sym,
                             power_iteration_norm, replicate, split_counts, summarize,
                             wilson_interval, worker_count)


def test_stream_is_pure_function_of_key():
    a = RngStream(7, 3).generator().random(5)
    b = RngStream(7, 3).generator().random(5)
    c = RngStream(7, 4).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_substreams_distinct():
    s = RngStream(0)
    keys = {s.substream(k).index for k in range(1000)}
    assert len(keys) == 1000
    assert s.substream(5) == RngStream(0).substream(5)


def test_replicate_order_independent_of_workers():
    def fn(s):
        return float(s.generator().standard_normal())

    one = replicate(fn, 11, 24)
    with worker_count(8):
        many = replicate(fn, 11, 24)
    assert one == many


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-10, 10)))
def test_operator_norm_matches_numpy(A):
    M = A + A.T
    ref = float(np.max(np.abs(np.linalg.eigvalsh(M)))) if M.any() else 0.0
    assert abs(operator_norm_sym(M) - ref) <= 1e-10 * max(1.0, ref)


def test_operator_norm_identity_and_power_iteration():
    assert operator_norm_sym(np.eye(12)) == 1.0
    M = np.diag([3.0, -5.0, 1.0])
    assert operator_norm_sym(M) == pytest.approx(5.0, abs=1e-14)
    assert power_iteration_norm(M) == pytest.approx(5.0, rel=1e-8)


def test_operator_norm_rejects_asymmetric():
    with pytest.raises(ValueError):
        operator_norm_sym(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        operator_norm_sym(np.array([[np.nan]]))


def test_eigh_sorted_and_inverse_sqrt():
    A = np.random.default_rng(0).standard_normal((5, 5))
    S = A @ A.T + np.eye(5)
    w, V = eigh_sym(S)
    assert np.all(np.diff(w) >= 0)
    W = inv_sqrt_sym(S)
    assert np.allclose(W @ S @ W, np.eye(5), atol=1e-10)


def test_ks_matches_scipy():
    x = np.random.default_rng(1).standard_normal(5000)
    assert ks_distance(x, norm_cdf) == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-12)


def test_ks_ties_and_errors():
    x = np.array([0.0, 0.0, 1.0, 1.0])
    ref = lambda t: np.clip(t, 0, 1)  # noqa: E731
    assert ks_distance(x, ref) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        ks_distance(np.array([]), norm_cdf)


@pytest.mark.parametrize("k", [0, 1, 3, 6])
def test_halfline_gamma_integrals(k):
    val = integrate_halfline(lambda u: u ** k * math.exp(-u))
    assert val == pytest.approx(math.factorial(k), rel=1e-9)


def test_halfline_heavy_tail_and_divergence():
    assert integrate_halfline(lambda u: 1 / (1 + u) ** 3) == pytest.approx(0.5, rel=1e-8)
    with pytest.raises(NonConvergenceError):
        integrate_halfline(lambda u: 1 / (1 + u))


def test_halfline_support_cut():
    assert integrate_halfline(lambda u: 1.0, support=2.5) == pytest.approx(2.5)


def test_phi_roundtrip():
    q = np.linspace(0.01, 0.99, 9)
    assert np.allclose(norm_cdf(norm_ppf(q)), q)


def test_wilson_and_summaries():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0 and 0 < hi < 0.05
    assert split_counts(10, 3) == [4, 3, 3]
    e = summarize([1.0, 2.0, 3.0])
    assert e.value == 2.0 and e.ci[0] < 2 < e.ci[1]


def test_affine_map_algebra():
    A = AffineMap(np.array([[2.0, 0], [1, 1]]), np.array([1.0, -1]))
    x = np.array([[0.3, 0.4]])
    assert np.allclose(A.inverse()(A(x)), x)
    assert np.allclose(A.compose(A.inverse())(x), x)


def test_operator_norm_spec_examples():
    assert operator_norm_sym(np.eye(5)) == pytest.approx(1.0, abs=1e-14)
    assert operator_norm_sym(np.diag([1.0, 2, 3])) == pytest.approx(3.0, abs=1e-14)
    z = np.random.default_rng(3).standard_normal(7)
    z /= np.linalg.norm(z)
    assert operator_norm_sym(np.outer(z, z)) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 32), seed=st.integers(0, 2**31))
def test_operator_norm_rotation_invariant(n, seed):
    from lcgeom.numerics import random_orthogonal

    gen = np.random.default_rng(seed)
    A = gen.standard_normal((n, n))
    M = A + A.T
    Q = random_orthogonal(n, gen)
    R = Q @ M @ Q.T
    assert operator_norm_sym(0.5 * (R + R.T)) == pytest.approx(operator_norm_sym(M), rel=1e-10)


def test_ks_spec_examples():
    g = RngStream(0).generator().standard_normal(1_000_000)
    assert ks_distance(g, norm_cdf) <= 0.002
    assert ks_distance(np.zeros(10), norm_cdf) == pytest.approx(0.5)
    # exact uniform[-sqrt3, sqrt3] CDF against Phi, on a dense grid
    t = np.linspace(-3, 3, 600_001)
    Fu = np.clip((t + math.sqrt(3)) / (2 * math.sqrt(3)), 0, 1)
    assert np.max(np.abs(Fu - norm_cdf(t))) == pytest.approx(0.057, abs=0.001)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(0.1, 5), b=st.floats(-3, 3))
def test_ks_invariant_under_increasing_maps(seed, a, b):
    x = np.random.default_rng(seed).standard_normal(500)
    d0 = ks_distance(x, norm_cdf)
    # y = a x + b with reference CDF transported accordingly
    d1 = ks_distance(a * x + b, lambda y: norm_cdf((y - b) / a))
    assert d1 == pytest.approx(d0, abs=1e-12)


HALFLINE_TABLE = [
    (lambda t: math.exp(-t), 1.0),
    (lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), 0.5),
    (lambda t: t * t * (1 + t) ** -7, 2 * 6 / 720),  # Gamma(3) Gamma(4) / Gamma(7)
    (lambda t: 1 / (1 + t * t), math.pi / 2),
    (lambda t: t ** 3 * math.exp(-2 * t), 6 / 16),
    (lambda t: math.exp(-t ** 3), math.gamma(4 / 3)),
    (lambda t: math.sqrt(t) * math.exp(-t), math.gamma(1.5)),
    (lambda t: (1 + t) ** -2.5, 1 / 1.5),
    (lambda t: t ** 9 * math.exp(-t), math.factorial(9)),
    (lambda t: math.exp(-50 * (t - 3) ** 2), math.sqrt(math.pi / 50)),
]


@pytest.mark.parametrize("case", range(len(HALFLINE_TABLE)))
def test_halfline_oracle_table(case):
    g, exact = HALFLINE_TABLE[case]
    tol = 1e-9
    assert abs(integrate_halfline(g, tol, breakpoints=(3.0,)) - exact) <= tol * max(1, exact)
