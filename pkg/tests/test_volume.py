import math

import numpy as np
import pytest

from lcgeom import volume
from lcgeom.bodies import ball, cube, ellipsoid, from_membership, simplex
from lcgeom.errors import BudgetExhausted, CertificateViolation
from lcgeom.numerics import RngStream, random_orthogonal


def test_har_ball_mean_is_zero():
    B = ball(3)
    kept = volume.hit_and_run(B, np.zeros((16, 3)), 2000, RngStream(0), burn=100, thin=3)
    chain_means = kept.mean(axis=1)
    se = chain_means.std(axis=0, ddof=1) / math.sqrt(16)
    assert np.all(np.abs(chain_means.mean(axis=0)) <= 3.5 * se)


def test_har_uniform_on_square_chi2():
    from scipy import stats

    kept = volume.hit_and_run(cube(2), np.zeros((32, 2)), 1500, RngStream(1), burn=50, thin=5)
    X = kept.reshape(-1, 2)
    H, _, _ = np.histogram2d(X[:, 0], X[:, 1], bins=4, range=[[-1, 1], [-1, 1]])
    assert stats.chisquare(H.ravel()).pvalue > 1e-3


def test_har_detailed_balance_two_bins():
    kept = volume.hit_and_run(cube(2), np.zeros((64, 2)), 3000, RngStream(2), burn=20)
    left = kept[:, :, 0] < 0
    a_to_b = (left[:, :-1] & ~left[:, 1:]).sum(axis=1)
    b_to_a = (~left[:, :-1] & left[:, 1:]).sum(axis=1)
    diff = a_to_b - b_to_a
    se = math.sqrt(float(np.sum(a_to_b + b_to_a)))
    assert abs(diff.sum()) <= 3 * se


def test_har_step_inside_and_errors():
    K = simplex(3)
    y = volume.hit_and_run_step(K, K.interior_point, RngStream(3))
    assert K.contains(y)
    with pytest.raises(ValueError):
        volume.hit_and_run_step(K, np.array([2.0, 2, 2]), RngStream(3))


def test_har_membership_only_body_matches_program_body():
    B = ball(3)
    M = from_membership(3, B.membership, np.zeros(3), 1.0, 1.0)
    a = volume.hit_and_run(B, np.zeros((2, 3)), 50, RngStream(4))
    b = volume.hit_and_run(M, np.zeros((2, 3)), 50, RngStream(4))
    assert np.allclose(a, b, atol=1e-9)


def test_wrong_outer_certificate_raises():
    liar = from_membership(2, cube(2).membership, np.zeros(2), 0.5, 0.6)
    with pytest.raises(CertificateViolation):
        volume.hit_and_run(liar, np.zeros((1, 2)), 20, RngStream(5))


def test_round_examples():
    r = volume.round_body(ellipsoid([1.0, 4.0]), 4000, rng=RngStream(6))
    assert r.d_hat <= 1.3
    b = volume.round_body(ball(3), 4000, rng=RngStream(7))
    assert b.d_hat <= 1.1
    assert np.allclose(b.transform.linear * math.sqrt(1 / 5), np.eye(3), atol=0.1)
    c = volume.round_body(cube(3, math.sqrt(3)), 4000, rng=RngStream(8))
    assert c.d_hat == pytest.approx(math.sqrt(3), rel=0.15)


def _check_invariants(est):
    assert all(0 < a <= 1 for a in est.phase_ratios)
    growth = np.prod([1 / a for a in est.phase_ratios])
    assert est.base_volume * growth == pytest.approx(est.value, rel=1e-12)
    assert est.ci[0] < est.value < est.ci[1]


def test_volume_ellipse():
    E = ellipsoid([1.0, 3.0])
    est = volume.volume_multiphase(E, 0.1, 0.05, RngStream(9))
    _check_invariants(est)
    assert est.value == pytest.approx(3 * math.pi, rel=0.1)
    assert est.walk["walk"] == "hit-and-run" and est.oracle_calls > 0


def test_volume_rotation_invariant():
    K = cube(3)
    Q = random_orthogonal(3, np.random.default_rng(10))
    a = volume.volume_multiphase(K, 0.1, 0.05, RngStream(11))
    b = volume.volume_multiphase(K.affine_image(Q), 0.1, 0.05, RngStream(12))
    for e in (a, b):
        _check_invariants(e)
    assert abs(a.value - b.value) <= math.hypot(a.value * a.rel_ci, b.value * b.rel_ci)


def test_volume_budget_exhausted_carries_partial():
    with pytest.raises(BudgetExhausted) as exc:
        volume.volume_multiphase(ball(3), 0.001, 0.05, RngStream(13), max_calls=10_000)
    part = exc.value.partial
    assert part is not None and "budget-exhausted" in part.flags
    assert part.rel_ci > 0.001


def test_volume_dimension_limit():
    with pytest.raises(ValueError):
        volume.volume_multiphase(ball(13), rng=RngStream(0))


def test_cross_polytope_hull_ratio():
    h = volume.hull_volume_ratio(3, 3, rng=RngStream(14), points=np.eye(3), mc=200_000)
    exact = ((8 / 6) / (4 * math.pi / 3)) ** (1 / 3)
    assert h.root == pytest.approx(exact, abs=0.01)
    assert h.root == pytest.approx(0.683, abs=0.02)


def test_hull_ratio_bounded_and_monotone_on_nested_sets():
    gen = np.random.default_rng(15)
    U = gen.standard_normal((12, 3))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    prev = 0.0
    for k in (3, 6, 12):
        h = volume.hull_volume_ratio(3, k, rng=RngStream(16), points=U[:k], mc=20_000)
        assert 0 <= h.ratio <= 1
        assert h.ratio >= prev
        prev = h.ratio


def test_hull_random_trials():
    h = volume.hull_volume_ratio(4, 20, trials=3, rng=RngStream(17), mc=5000)
    assert len(h.per_trial) == 3 and h.stderr > 0
    assert h.bound == pytest.approx(math.sqrt(math.log(1 + 5) / 4))


def test_planar_hull_matches_shoelace():
    gen = np.random.default_rng(18)
    U = gen.standard_normal((5, 2))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    h = volume.hull_volume_ratio(2, 5, rng=RngStream(19), points=U, mc=200_000)
    area = volume.shoelace_area(np.vstack([U, -U]))
    assert h.ratio * math.pi == pytest.approx(area, rel=0.02)


def test_shoelace_square():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]])
    assert volume.shoelace_area(pts) == pytest.approx(1.0)
