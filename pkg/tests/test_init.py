import numpy as np
import pytest

from tcca.cca import cca_1d
from tcca.init import init_effective, init_random, rank1_factors
from tcca.synth import P2dccaModel, error_metric, generate, population_optimum
from tcca.tensor import kronecker


def test_random_deterministic_and_unit():
    a = init_random((3, 4), (2, 5), 7)
    b = init_random((3, 4), (2, 5), 7)
    for x, y in zip(a[0].factors + a[1].factors, b[0].factors + b[1].factors):
        np.testing.assert_array_equal(x, y)
        assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-14)
    assert a[0].dims == (3, 4) and a[1].dims == (2, 5)


def test_random_seeds_differ():
    a = init_random((3, 4), (2, 5), 1)
    b = init_random((3, 4), (2, 5), 2)
    assert np.max(np.abs(a[0].factors[0] - b[0].factors[0])) > 1e-6


def test_rank1_factors_exact(rng):
    u1, u2 = rng.standard_normal(4), rng.standard_normal(3)
    c = 3.0 * kronecker(u2, u1)
    fs, sigma = rank1_factors(c, (4, 3))
    np.testing.assert_allclose(sigma * kronecker(fs[1], fs[0]), c, atol=1e-12)
    for f, u in zip(fs, (u1, u2)):
        assert abs(abs(f @ u) / np.linalg.norm(u) - 1) <= 1e-12


def test_rank1_factors_residual_matches_svd(rng):
    c = rng.standard_normal(12)
    fs, sigma = rank1_factors(c, (4, 3))
    M = c.reshape(4, 3, order="F")
    sv = np.linalg.svd(M, compute_uv=False)
    resid = np.linalg.norm(c - sigma * kronecker(fs[1], fs[0]))
    assert resid == pytest.approx(np.sqrt(np.sum(sv[1:] ** 2)), abs=1e-10)
    assert all(abs(np.linalg.norm(f) - 1) <= 1e-12 for f in fs)


def test_rank1_factors_three_modes(rng):
    us = [rng.standard_normal(d) for d in (2, 3, 2)]
    c = kronecker(us[2], us[1], us[0])
    fs, sigma = rank1_factors(c, (2, 3, 2))
    np.testing.assert_allclose(sigma * kronecker(fs[2], fs[1], fs[0]), c, atol=1e-12)


def test_effective_reproduces_cca_factors(rng):
    n = 400
    X = rng.standard_normal((n, 3, 2))
    Y = rng.standard_normal((n, 2, 2))
    u, v = init_effective(X, Y)
    sol = cca_1d(X, Y, ridge=(1e-6 * np.mean(X ** 2), 1e-6 * np.mean(Y ** 2)), center=False)
    fu, _ = rank1_factors(sol.u, (3, 2))
    for a, b in zip(u.factors, fu):
        assert abs(abs(a @ b) - 1) <= 1e-10


def test_effective_close_to_population_factors():
    model = P2dccaModel.build(2, (20, 15, 15, 20), 0.9, seed=21)
    X, Y = generate(model, 5000, seed=22)
    opt = population_optimum(model)
    assert error_metric((opt.u, opt.v), init_effective(X, Y)) <= 0.1


def test_effective_quality_improves_with_n():
    model = P2dccaModel.build(2, (20, 15, 15, 20), 0.8, seed=5)
    opt = population_optimum(model)
    errs = []
    for n in (300, 3000):
        vals = [error_metric((opt.u, opt.v), init_effective(*generate(model, n, seed=s)))
                for s in range(5)]
        errs.append(np.median(vals))
    assert errs[1] < errs[0]
