import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcgeom import covariance as cov
from lcgeom import distributions as dist
from lcgeom.errors import ConfigError
from lcgeom.numerics import RngStream, random_orthogonal


@pytest.mark.parametrize("n", [4, 16, 25])
def test_scaled_basis_batch_is_exact(n):
    B = math.sqrt(n) * np.eye(n)
    rep = cov.cov_deviation(dist.family_spec("gaussian", n), n, batch=B)
    assert rep.eps_hat == 0.0
    assert rep.s_min == rep.s_max == 1.0


def test_near_exact_for_non_square_n():
    n = 7
    rep = cov.cov_deviation(dist.family_spec("gaussian", n), n, batch=math.sqrt(n) * np.eye(n))
    assert rep.eps_hat <= 4 * np.finfo(float).eps


def test_gaussian_reference_value():
    rep = cov.cov_deviation(dist.family_spec("gaussian", 32), 2 ** 14, RngStream(0), replicas=32)
    spread = float(np.std(rep.eps_values))
    assert abs(rep.median - 0.09) <= max(3 * spread, 0.01)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_rotation_invariance(seed):
    gen = np.random.default_rng(seed)
    X = gen.standard_normal((200, 6))
    Q = random_orthogonal(6, gen)
    spec = dist.family_spec("gaussian", 6)
    a = cov.cov_deviation(spec, 200, batch=X).eps_hat
    b = cov.cov_deviation(spec, 200, batch=X @ Q.T).eps_hat
    assert abs(a - b) <= 1e-10


def test_singular_values_bracket_deviation():
    rep = cov.cov_deviation(dist.family_spec("cube", 8), 500, RngStream(1), replicas=4)
    for e, lo, hi in zip(rep.eps_values, rep.s_min_values, rep.s_max_values):
        assert e == pytest.approx(max(hi ** 2 - 1, 1 - lo ** 2), abs=1e-12)


def test_loose_target_hits_first_grid_point():
    curve = cov.sample_complexity_curve(dist.family_spec("cube", 16), [0.9], 0.1, 32, RngStream(2))
    assert curve.rows[0].N_star == curve.grid[0] == 256
    assert not curve.rows[0].lower_bound_only


def test_unresolved_eta_and_lower_bound_rows():
    curve = cov.sample_complexity_curve(dist.family_spec("gaussian", 4), [0.01], 0.01, 32,
                                        RngStream(3), N_max=128)
    assert curve.unresolved_eta
    assert curve.rows[0].lower_bound_only


def test_median_non_increasing_on_doubling_grid():
    Ns = [2 ** k for k in range(7, 12)]
    meds = cov.deviation_curve(dist.family_spec("l1_ball", 8), Ns, 32, RngStream(4))
    assert all(b <= a for a, b in zip(meds, meds[1:]))


def test_success_frequencies_use_wilson():
    rep = cov.cov_deviation(dist.family_spec("gaussian", 4), 400, RngStream(5), replicas=16,
                            targets=(0.5, 1e-6))
    freq, (lo, hi) = rep.success[0.5]
    assert freq == 1.0 and hi == 1.0 and lo < 1.0
    assert rep.success[1e-6][0] == 0.0


def test_errors():
    with pytest.raises(ConfigError):
        cov.cov_deviation(dist.family_spec("gaussian", 3, isotropic=False), 10)
    with pytest.raises(ConfigError):
        cov.sample_complexity_curve(dist.family_spec("gaussian", 3), [0.5], replicas=8)
    with pytest.raises(ConfigError):
        cov.sample_complexity_curve(dist.family_spec("gaussian", 3), [1.5])


def test_reference_curves_and_csv(tmp_path):
    refs = cov.reference_curves(10, 0.5)
    assert refs["n/eps^2"] == 40.0
    curve = cov.sample_complexity_curve(dist.family_spec("cube", 4), [0.9, 0.5], 0.1, 32,
                                        RngStream(6))
    p = tmp_path / "c.csv"
    curve.write_csv(p)
    assert len(p.read_text().splitlines()) == 3
