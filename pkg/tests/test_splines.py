import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy import integrate

from addscreen.splines import (
    DuplicateKnotError,
    SplineBasis,
    build_basis,
    bspline_values,
    cox_de_boor,
    design_block,
    eval_basis,
    eval_basis_d2,
    gram_matrices,
)


def _bernstein_exprs():
    x = sp.Symbol("x")
    return x, [sp.binomial(3, k) * x**k * (1 - x) ** (3 - k) for k in range(4)]


def _bernstein_basis():
    return SplineBasis(4, 4, (0.0, 1.0), np.zeros(0), "unit_interval")


def test_quantile_knots_on_uniform_grid():
    x = np.linspace(0, 1, 301)
    basis = build_basis(x, K=6, order=4)
    np.testing.assert_allclose(basis.interior_knots, np.quantile(x, [1 / 3, 2 / 3]), atol=0)
    np.testing.assert_allclose(basis.interior_knots, [1 / 3, 2 / 3], atol=1e-12)
    assert basis.boundary == (0.0, 1.0)


def test_bernstein_values_at_half():
    x, exprs = _bernstein_exprs()
    oracle = [float(e.subs(x, sp.Rational(1, 2))) for e in exprs]
    np.testing.assert_allclose(oracle, [0.125, 0.375, 0.375, 0.125])
    np.testing.assert_allclose(eval_basis(_bernstein_basis(), 0.5), oracle, atol=1e-15)


def test_bernstein_second_derivatives_match_symbolic():
    x, exprs = _bernstein_exprs()
    basis = _bernstein_basis()
    for pt in (0.0, 0.2, 0.5, 0.9, 1.0):
        oracle = [float(sp.diff(e, x, 2).subs(x, pt)) for e in exprs]
        np.testing.assert_allclose(eval_basis_d2(basis, pt), oracle, atol=1e-10)


def test_endpoint_values():
    basis = build_basis(np.random.default_rng(0).normal(size=200))
    a, b = basis.boundary
    np.testing.assert_array_equal(eval_basis(basis, a), np.eye(6)[0])
    np.testing.assert_array_equal(eval_basis(basis, b), np.eye(6)[-1])


def test_evaluation_clamps_outside_domain():
    basis = build_basis(np.linspace(-1, 2, 50))
    np.testing.assert_array_equal(eval_basis(basis, -5.0), eval_basis(basis, -1.0))
    np.testing.assert_array_equal(eval_basis(basis, 9.0), eval_basis(basis, 2.0))


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    K=st.integers(4, 10),
    order=st.integers(2, 5),
)
def test_partition_of_unity_and_support(seed, K, order):
    if K < order:
        K = order
    x = np.random.default_rng(seed).normal(size=120)
    basis = build_basis(x, K, order)
    pts = np.concatenate([x, np.linspace(*basis.boundary, 101)])
    B = eval_basis(basis, pts)
    np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-13)
    assert np.all(B >= -1e-15)
    assert np.all((B > 0).sum(axis=1) <= order)


def test_local_and_full_recursion_agree():
    rng = np.random.default_rng(1)
    basis = build_basis(rng.uniform(size=80), K=8, order=4)
    pts = np.sort(np.concatenate([rng.uniform(size=200), basis.knots]))
    pts = basis.clamp(pts)
    np.testing.assert_allclose(bspline_values(basis.knots, 4, pts), cox_de_boor(basis.knots, 4, pts), atol=1e-14)


def test_batched_knots_match_single():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 3))
    bases = [build_basis(X[:, j]) for j in range(3)]
    t = np.stack([b.knots for b in bases])
    batched = bspline_values(t[:, None, :], 4, X.T)
    for j, b in enumerate(bases):
        np.testing.assert_allclose(batched[j], eval_basis(b, X[:, j]), atol=1e-15)


def test_greville_reproduces_identity():
    basis = build_basis(np.random.default_rng(3).exponential(size=100), K=7)
    xs = np.linspace(*basis.boundary, 57)
    np.testing.assert_allclose(eval_basis(basis, xs) @ basis.greville, xs, atol=1e-12)


def test_second_derivative_finite_difference():
    rng = np.random.default_rng(4)
    basis = build_basis(rng.uniform(size=150), K=8, order=4)
    h = 1e-3
    knots = np.unique(basis.knots)
    pts = np.linspace(basis.boundary[0] + 0.01, basis.boundary[1] - 0.01, 97)
    # keep the 3-point stencil inside one polynomial piece
    pts = pts[np.min(np.abs(pts[:, None] - knots[None, :]), axis=1) > 2 * h]
    fd = (eval_basis(basis, pts + h) - 2 * eval_basis(basis, pts) + eval_basis(basis, pts - h)) / h**2
    np.testing.assert_allclose(eval_basis_d2(basis, pts), fd, atol=1e-6)


def test_d2_requires_order_three():
    basis = build_basis(np.linspace(0, 1, 40), K=4, order=2)
    with pytest.raises(ValueError):
        eval_basis_d2(basis, 0.5)


def test_gram_matches_adaptive_quadrature():
    basis = build_basis(np.random.default_rng(5).uniform(size=90), K=6, order=4)
    g = basis.gram
    a, b = basis.boundary
    brk = list(np.unique(basis.knots))
    for i, k in [(0, 0), (1, 2), (3, 3), (2, 5)]:
        fa = lambda x: eval_basis(basis, x)[i] * eval_basis(basis, x)[k]
        fd = lambda x: eval_basis_d2(basis, x)[i] * eval_basis_d2(basis, x)[k]
        va = integrate.quad(fa, a, b, points=brk[1:-1], epsabs=1e-13, limit=200)[0]
        vd = integrate.quad(fd, a, b, points=brk[1:-1], epsabs=1e-11, limit=200)[0]
        assert g.A[i, k] == pytest.approx(va, rel=1e-9, abs=1e-13)
        assert g.D[i, k] == pytest.approx(vd, rel=1e-8, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), K=st.integers(4, 9))
def test_gram_definiteness_and_null_space(seed, K):
    basis = build_basis(np.random.default_rng(seed).normal(size=100), K, 4)
    A, D = basis.gram.A, basis.gram.D
    np.testing.assert_allclose(A, A.T)
    np.testing.assert_allclose(D, D.T)
    assert np.linalg.eigvalsh(A)[0] > 0
    ev = np.linalg.eigvalsh(D)
    assert ev[0] > -1e-9 * ev[-1]
    assert np.sum(ev < 1e-9 * ev[-1]) == 2


def test_null_space_combinations_are_linear():
    basis = build_basis(np.random.default_rng(6).uniform(size=120), K=7)
    e, V = np.linalg.eigh(basis.gram.D)
    xs = np.linspace(*basis.boundary, 100)
    for c in V[:, :2].T:
        np.testing.assert_allclose(eval_basis_d2(basis, xs) @ c, 0.0, atol=1e-6)
        vals = eval_basis(basis, xs) @ c
        coef = np.polyfit(xs, vals, 1)
        assert np.max(np.abs(np.polyval(coef, xs) - vals)) < 1e-8


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_zero_d_norm_iff_linear(seed):
    rng = np.random.default_rng(seed)
    basis = build_basis(rng.uniform(size=100), K=6)
    xs = np.linspace(*basis.boundary, 100)
    B = eval_basis(basis, xs)
    # linear functions: coefficients a + b * greville
    lin = rng.normal() + rng.normal() * basis.greville
    assert lin @ basis.gram.D @ lin < 1e-9 * (1 + lin @ lin)
    c = rng.normal(size=6)
    vals = B @ c
    resid = np.max(np.abs(np.polyval(np.polyfit(xs, vals, 1), xs) - vals))
    assert (c @ basis.gram.D @ c < 1e-12) == (resid < 1e-8)


def test_gram_rejects_too_few_nodes():
    with pytest.raises(ValueError):
        gram_matrices(_bernstein_basis(), nodes=2)


def test_build_basis_errors():
    with pytest.raises(ValueError):
        build_basis([0.0, 1.0, np.nan, 2.0, 3.0, 4.0, 5.0])
    with pytest.raises(ValueError):
        build_basis(np.arange(5.0), K=6)
    with pytest.raises(DuplicateKnotError):
        build_basis([0, 1, 2, 3, 4] * 10, K=6)
    with pytest.raises(DuplicateKnotError):
        build_basis(np.r_[np.zeros(50), np.arange(1.0, 6.0)], K=6)
    with pytest.raises(ValueError):
        build_basis(np.arange(20.0), domain_source="bogus")


def test_design_block_centering():
    x = np.random.default_rng(7).normal(size=50)
    basis = build_basis(x)
    Z = design_block(basis, x, center=True)
    np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-15)
    np.testing.assert_allclose(design_block(basis, x).sum(axis=1), 1.0)
