import math

import numpy as np
import pytest
from scipy import stats

from addscreen.datagen import (
    EX1_BETA,
    Scenario,
    draw_errors,
    gen_example,
    make_rng,
    mvn_ar1,
    mvn_block,
    test_functions as tf,
)

# symbolic evaluation of g4 at 0.3 (sympy, 20 digits)
G4_AT_0_3 = 0.72297075318302023188
# Var(5 g1 + 3 g2 + 4 g3 + 6 g4) under X ~ N(0, 1), by adaptive quadrature
EX2_SIGNAL_VAR = 357.5123049503729


def test_ar1_independent_when_rho_zero():
    X = mvn_ar1(10_000, 3, 0.0, make_rng(0))
    assert abs(np.corrcoef(X[:, 0], X[:, 1])[0, 1]) < 0.03


def test_ar1_lag_correlation_and_variance():
    X = mvn_ar1(100_000, 6, 0.8, make_rng(1))
    assert abs(np.corrcoef(X[:, 1], X[:, 4])[0, 1] - 0.8**3) < 0.02
    np.testing.assert_allclose(X.var(axis=0), 1.0, atol=0.03)


def test_ar1_rejects_bad_rho():
    with pytest.raises(ValueError):
        mvn_ar1(10, 3, 1.0, make_rng(0))


def test_block_correlations():
    active = [0, 1, 2, 3]
    X = mvn_block(100_000, 8, active, make_rng(2))
    C = np.corrcoef(X.T)
    assert abs(C[0, 3] - 0.5) < 0.02
    assert abs(C[5, 7] - 0.5) < 0.02
    assert abs(C[1, 6] - 0.1) < 0.02
    np.testing.assert_allclose(X.var(axis=0), 1.0, atol=0.03)


def test_block_any_four_indices():
    X = mvn_block(100_000, 12, range(8), make_rng(3))
    idx = [1, 6, 8, 11]
    emp = np.cov(X[:, idx].T)
    inside = np.array([i < 8 for i in idx])
    truth = np.where(inside[:, None] == inside[None, :], 0.5, 0.1)
    np.fill_diagonal(truth, 1.0)
    np.testing.assert_allclose(emp, truth, atol=0.02)


def test_block_rejects_bad_sets():
    with pytest.raises(ValueError):
        mvn_block(10, 5, [], make_rng(0))
    with pytest.raises(ValueError):
        mvn_block(10, 3, [0, 1, 2], make_rng(0))


def test_function_values():
    assert tf("g2", 0.5) == 0.0
    assert tf("g3", 0.25) == pytest.approx(1.0)
    assert tf("g4", 0.3) == pytest.approx(G4_AT_0_3, abs=1e-14)
    assert tf("f1", 0.25) == pytest.approx(5.0)
    assert tf("f2", 0.5) == pytest.approx(2.5)
    assert tf("f5", 0.5) == -1.0
    with pytest.raises(ValueError):
        tf("g9", 0.1)


def test_ex2_signal_variance_monte_carlo():
    X = make_rng(4).standard_normal(100_000)
    sig = 5 * tf("g1", X) + 3 * tf("g2", X) + 4 * tf("g3", X) + 6 * tf("g4", X)
    assert sig.var() == pytest.approx(EX2_SIGNAL_VAR, rel=0.03)


def test_ex1_noiseless_assembly():
    sc = Scenario(1, 50, 20, signal_c=2.0)
    d = gen_example(sc, make_rng(5), noise=0.0)
    np.testing.assert_allclose(d.y, 2.0 * d.X[:, :5] @ np.array(EX1_BETA), atol=1e-14)
    assert d.true_active == frozenset(range(5)) == d.true_linear


def test_ex4_uniform_covariates_and_truth():
    d = gen_example(Scenario(4, 10_000, 10, sigma=0.2), make_rng(6))
    assert d.X.min() >= 0 and d.X.max() <= 1
    assert stats.kstest(d.X[:, 0], "uniform").statistic < 0.02
    assert d.true_nonlinear == frozenset({0, 1})
    assert d.true_linear == frozenset({2, 3, 4})
    assert d.true_active == d.true_linear | d.true_nonlinear


@pytest.mark.parametrize("example", [1, 2, 3, 4])
def test_truth_sets_disjoint_and_complete(example):
    d = gen_example(Scenario(example, 40, 12), make_rng(7))
    assert not (d.true_linear & d.true_nonlinear)
    assert d.true_active == d.true_linear | d.true_nonlinear
    assert d.X.shape == (40, 12) and d.y.shape == (40,)


def test_determinism():
    sc = Scenario(3, 60, 30, seed=11)
    a, b = gen_example(sc), gen_example(sc)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    c, d = gen_example(sc, make_rng(11, 2)), gen_example(sc, make_rng(11, 2))
    assert np.array_equal(c.y, d.y)


def test_replication_streams_uncorrelated():
    sc = Scenario(1, 10_000, 10)
    y0 = gen_example(sc, make_rng(0, 0)).y
    y1 = gen_example(sc, make_rng(0, 1)).y
    assert abs(np.corrcoef(y0, y1)[0, 1]) < 0.05


def test_cauchy_median():
    e = draw_errors("t1", 100_000, make_rng(8))
    assert abs(np.median(e)) < 0.05


def test_t5_variance():
    e = draw_errors("t5", 200_000, make_rng(9))
    assert e.var() == pytest.approx(5 / 3, rel=0.1)


def test_scenario_validation_and_defaults():
    assert Scenario(1, 100, 100).sigma == pytest.approx(math.sqrt(6.83))
    assert Scenario(2, 100, 100).sigma == pytest.approx(math.sqrt(1.74))
    assert Scenario(1, 100, 100).signal_c == 1.0
    with pytest.raises(ValueError):
        Scenario(2, 100, 100, signal_c=1.0)
    with pytest.raises(ValueError):
        Scenario(5, 100, 100)
    with pytest.raises(ValueError):
        Scenario(1, 20, 100)
    with pytest.raises(ValueError):
        Scenario(1, 100, 5)
    with pytest.raises(ValueError):
        Scenario(1, 100, 100, error_law="laplace")
    assert Scenario(4, 400, 1000, sigma=0.5).label == "ex4_n400_p1000_sigma0.5_normal"
