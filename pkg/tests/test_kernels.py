"""Compiled and numpy kernels agree on identical inputs."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcgeom import kernels
from lcgeom.bodies import ball, cube, simplex


def _sym(seed, n):
    A = np.random.default_rng(seed).standard_normal((n, n))
    return A + A.T


@pytest.mark.parametrize("n", [1, 2, 5, 16, 33])
def test_jacobi_backends_match_eigh(n):
    M = _sym(n, n)
    ref = np.linalg.eigvalsh(M)
    for fn in (kernels._jacobi_eigh_nb, kernels._jacobi_eigh_np):
        w, V, _ = fn(M.copy(), 1e-14, 100)
        assert np.allclose(np.sort(w), ref, atol=1e-10 * max(1, abs(ref).max()))
        assert np.allclose(M @ V, V * w, atol=1e-9)
        assert np.allclose(V.T @ V, np.eye(n), atol=1e-10)


@pytest.mark.parametrize("body", [cube(3), ball(4, 2.0), simplex(3)], ids=["cube", "ball", "simplex"])
def test_inside_backends_agree(body):
    X = np.random.default_rng(1).uniform(-2.5, 2.5, (4000, body.dim))
    args = body.program.kernel_args()
    a = kernels._inside_many_nb(X, *args)
    b = kernels._inside_many_np(X, *args)
    assert np.array_equal(a, b)


def test_inside_with_phase_ball():
    body = cube(2)
    X = np.random.default_rng(2).uniform(-1.5, 1.5, (2000, 2))
    args = body.program.kernel_args(np.array([0.2, 0.0]), 0.5)
    got = kernels._inside_many_nb(X, *args)
    want = (np.max(np.abs(X), axis=1) <= 1) & (np.sum((X - [0.2, 0]) ** 2, axis=1) <= 0.25)
    assert np.array_equal(got, want)


def test_har_backends_agree():
    body = cube(3)
    gen = np.random.default_rng(3)
    C, S = 4, 50
    x0 = np.zeros((C, 3))
    dirs = gen.standard_normal((S, C, 3))
    us = gen.random((S, C))
    reach = 2 * body.R_out * (1 + 1e-9)
    steps = kernels._bisection_steps(reach, 1e-9 * body.R_out)
    args = body.program.kernel_args()
    a = kernels._har_chains_nb(x0, dirs, us, *args, reach, steps, 10, 2)
    b = kernels._har_chains_np(x0, dirs, us, *args, reach, steps, 10, 2)
    assert np.allclose(a[0], b[0], atol=1e-9)
    assert np.allclose(a[1], b[1], atol=1e-9)
    assert a[3] and b[3]
    assert a[0].shape == (C, 20, 3)


def test_har_flags_bad_outer_certificate():
    body = cube(2)
    gen = np.random.default_rng(4)
    dirs = gen.standard_normal((5, 1, 2))
    us = gen.random((5, 1))
    args = body.program.kernel_args()
    # a reach of 0.5 lands inside the cube: the certificate is contradicted
    out = kernels._har_chains_nb(np.zeros((1, 2)), dirs, us, *args, 0.5, 20, 0, 1)
    assert out[3] is False or out[3] == 0


def test_fw_backends_agree():
    gen = np.random.default_rng(5)
    U = gen.standard_normal((6, 3))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    V = np.vstack([U, -U]).T
    X = gen.uniform(-1, 1, (500, 3))
    a = kernels._fw_hull_nb(V, X, 1e-8, 20000)
    b = kernels._fw_hull_np(V, X, 1e-8, 20000)
    decided = (a >= 0) & (b >= 0)
    assert decided.mean() > 0.95
    assert np.array_equal(a[decided], b[decided])


def test_fw_cross_polytope_exact():
    V = np.hstack([np.eye(3), -np.eye(3)])
    X = np.random.default_rng(6).uniform(-1, 1, (2000, 3))
    s = kernels.fw_hull_status(V, X)
    l1 = np.abs(X).sum(axis=1)
    clear = np.abs(l1 - 1) > 1e-4
    assert np.array_equal(s[clear] == 1, l1[clear] < 1)


@settings(max_examples=25, deadline=None)
@given(p=st.sampled_from([1.0, 2.0, 3.0, 2.5, 7.0]), seed=st.integers(0, 2**31))
def test_directional_moments_backends(p, seed):
    gen = np.random.default_rng(seed)
    Y = gen.standard_normal((300, 4))
    Z = gen.standard_normal((7, 4))
    ref = np.mean(np.abs(Y @ Z.T) ** p, axis=0)
    assert np.allclose(kernels._dir_moments_nb(Y, Z, p), ref, rtol=1e-12)
    assert np.allclose(kernels._dir_moments_np(Y, Z, p), ref, rtol=1e-12)
