import math

import numpy as np
import pytest

from lcgeom import distributions as dist
from lcgeom import isoperimetry as iso
from lcgeom import moments
from lcgeom.errors import ConfigError
from lcgeom.numerics import RngStream, norm_cdf

N = 400_000


def test_boundary_measure_examples():
    g = iso.boundary_measure(dist.family_spec("gaussian", 3), iso.Halfspace(np.eye(3)[0], 0.0),
                             0.01, N, RngStream(0))
    assert g.value == pytest.approx(1 / math.sqrt(2 * math.pi), abs=4 * g.stderr + 0.002)
    e = iso.boundary_measure(dist.family_spec("exponential", 3), iso.Halfspace(np.eye(3)[0], 0.0),
                             0.01, N, RngStream(1))
    assert e.value == pytest.approx(2 ** -0.5, abs=4 * e.stderr + 0.004)
    w = iso.boundary_measure(dist.family_spec("cube", 3), iso.WholeSpace(), 0.01, 1000, RngStream(2))
    assert w.value == 0.0


def test_boundary_measure_of_a_ball_shell():
    # Gaussian n=2: mu+(rho B) = rho exp(-rho^2/2)
    b = iso.boundary_measure(dist.family_spec("gaussian", 2), iso.CenteredBall(1.0), 0.01, N,
                             RngStream(3))
    assert b.value == pytest.approx(math.exp(-0.5), abs=4 * b.stderr + 0.005)


def test_boundary_measure_halves_with_marginal_density():
    # cube n=2 along the diagonal: triangular marginal, half the peak density at sqrt(2)/2
    spec = dist.family_spec("cube", 2, isotropic=False)
    d = np.ones(2) / math.sqrt(2)
    a = iso.boundary_measure(spec, iso.Halfspace(d, 0.0), 0.01, 1_000_000, RngStream(4))
    b = iso.boundary_measure(spec, iso.Halfspace(d, math.sqrt(2) / 2), 0.01, 1_000_000,
                             RngStream(5))
    assert b.value / a.value == pytest.approx(0.5, abs=0.03)


def test_boundary_eps_range():
    with pytest.raises(ConfigError):
        iso.boundary_measure(dist.family_spec("cube", 2), iso.WholeSpace(), 0.5, 10)


def test_gaussian_profile_examples():
    assert iso.gaussian_halfspace_profile(0.5, 0.0) == pytest.approx(0.5)
    assert iso.gaussian_halfspace_profile(0.5, 0.1) == pytest.approx(0.5398, abs=1e-4)
    assert iso.gaussian_halfspace_profile(0.5, 6.0) >= 1 - 1e-9
    with pytest.raises(ValueError):
        iso.gaussian_halfspace_profile(1.0, 0.1)


@pytest.mark.parametrize("alpha", [0.3, 0.5])
@pytest.mark.parametrize("eps", [0.05, 0.1])
def test_gaussian_expansion_matches_profile(alpha, eps):
    v, se = iso.halfspace_expansion(dist.family_spec("gaussian", 5), np.ones(5), alpha, eps, N,
                                    RngStream(6))
    assert abs(v - iso.gaussian_halfspace_profile(alpha, eps)) <= 3 * se


def test_gaussian_cheeger_and_scaling():
    spec = dist.family_spec("gaussian", 3)
    h = iso.halfspace_cheeger(spec, 8, N=N, rng=RngStream(7))
    assert h.value == pytest.approx(4 / math.sqrt(2 * math.pi), rel=0.08)
    assert "upper bound" in h.label
    h2 = iso.halfspace_cheeger(spec.transformed(2 * np.eye(3)), 8, N=N, rng=RngStream(7))
    assert h2.value == pytest.approx(h.value / 2, rel=1e-9)


def test_exponential_cheeger_near_sqrt2():
    h = iso.halfspace_cheeger(dist.family_spec("exponential", 2), 8, N=1_000_000, rng=RngStream(8))
    assert h.value == pytest.approx(math.sqrt(2), rel=0.1)


@pytest.mark.parametrize("fam", ["gaussian", "cube", "exponential", "l1_ball"])
def test_cheeger_above_bobkov_bound(fam):
    spec = dist.family_spec(fam, 4)
    h = iso.halfspace_cheeger(spec, 4, N=200_000, rng=RngStream(9))
    lb = iso.cheeger_lower_bounds(moments.shell_stats(spec, 100_000, rng=RngStream(10)))
    assert h.value >= lb.bobkov
    assert min(lb.kls, lb.bobkov, lb.eldan, lb.gm) > 0
    assert "universal constant" in lb.label


def test_lower_bounds_need_shell_fields():
    with pytest.raises(ValueError):
        iso.cheeger_lower_bounds(object())


def test_poincare_examples():
    g = dist.family_spec("gaussian", 3)
    probes = iso.probe_family(3, RngStream(11))
    for name in ("linear_e1", "linear_diag", "linear_random"):
        F, G, lip = probes[name]
        q = iso.poincare_quotient(g, F, G, 200_000, RngStream(12), lipschitz=lip)
        assert abs(q.quotient - 1) <= 3 * q.stderr + 0.01
        assert q.lipschitz_certificate == pytest.approx(1.0, abs=0.02)
    F, G, _ = probes["norm_square"]
    q = iso.poincare_quotient(g, F, G, 400_000, RngStream(13))
    assert q.quotient == pytest.approx(2.0, abs=4 * q.stderr + 0.02)
    F, G, _ = iso.probe_family(3)["coord_square"]
    q = iso.poincare_quotient(dist.family_spec("cube", 3), F, G, 400_000, RngStream(14))
    assert q.quotient == pytest.approx(5.0, abs=4 * q.stderr + 0.05)


def test_poincare_survey_gaussian_lower_limit():
    out = iso.poincare_survey(dist.family_spec("gaussian", 3), 100_000, RngStream(15))
    for q in out.values():
        assert q.quotient >= 0
        assert q.quotient >= 1 - 3 * q.stderr - 0.01


def test_profile_matches_phi():
    assert iso.gaussian_halfspace_profile(0.3, 0.2) == pytest.approx(
        float(norm_cdf(-0.5244005127080407 + 0.2)), rel=1e-9)
