import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from addscreen.screening import (
    ScreeningConfig,
    ScreeningWarning,
    UtilityScores,
    compute_scores,
    cr_sis_scores,
    default_d,
    ecdf_values,
    marginal_fit,
    marginal_fits,
    ncrs_scores,
    nis_scores,
    select_active,
    sirs_scores,
    sis_scores,
)
from addscreen.splines import build_basis, eval_basis


def _brute_ecdf(y):
    return np.array([np.sum(y <= v) for v in y]) / y.size


def _lstsq_fit(x, y, K=6, order=4):
    B = eval_basis(build_basis(x, K, order), x)
    beta = np.linalg.lstsq(B, y, rcond=None)[0]
    return B @ beta


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=40))
def test_ecdf_matches_brute_force(vals):
    y = np.array(vals, dtype=float)
    np.testing.assert_array_equal(ecdf_values(y), _brute_ecdf(y))


def test_ecdf_rejects_bad_input():
    with pytest.raises(ValueError):
        ecdf_values([])
    with pytest.raises(ValueError):
        ecdf_values([1.0, np.inf])


def test_marginal_fit_reproduces_linear_response():
    x = np.linspace(-2, 3, 80)
    fitted, flag = marginal_fit(x, 2 * x + 1)
    assert not flag
    np.testing.assert_allclose(fitted, 2 * x + 1, atol=1e-8)


def test_marginal_fits_match_lstsq_oracle():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(90, 7))
    y = np.sin(X[:, 0]) + rng.normal(size=90)
    fitted, deg = marginal_fits(X, y)
    assert not deg.any()
    for j in range(7):
        np.testing.assert_allclose(fitted[:, j], _lstsq_fit(X[:, j], y), atol=1e-9)


def test_ncrs_matches_direct_formula():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(70, 6))
    y = X[:, 0] ** 2 + 0.5 * rng.normal(size=70)
    G = _brute_ecdf(y)
    expect, raw = [], []
    for j in range(6):
        m = _lstsq_fit(X[:, j], y)
        expect.append(np.mean((m - m.mean()) * (G - G.mean())) ** 2)
        raw.append(np.mean(m * G) ** 2)
    np.testing.assert_allclose(ncrs_scores(X, y).scores, expect, rtol=1e-9)
    np.testing.assert_allclose(ncrs_scores(X, y, ScreeningConfig(centered=False)).scores, raw, rtol=1e-9)


def test_sis_is_squared_pearson():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 4))
    y = X @ [1.0, -2.0, 0.0, 0.5] + rng.normal(size=50)
    expect = [np.corrcoef(X[:, j], y)[0, 1] ** 2 for j in range(4)]
    np.testing.assert_allclose(sis_scores(X, y).scores, expect, rtol=1e-12)


def test_nis_matches_direct_formula():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(60, 3))
    y = np.cos(X[:, 1]) + rng.normal(size=60)
    expect = [np.mean((_lstsq_fit(X[:, j], y) - y.mean()) ** 2) for j in range(3)]
    np.testing.assert_allclose(nis_scores(X, y).scores, expect, rtol=1e-9)


def test_sirs_matches_double_loop():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(40, 3))
    y = np.round(X[:, 0] + rng.normal(size=40), 1)  # ties in y
    Xs = (X - X.mean(0)) / X.std(0)
    n = 40
    expect = []
    for j in range(3):
        tot = 0.0
        for k in range(n):
            tot += (np.sum(Xs[:, j] * (y < y[k])) / n) ** 2
        expect.append(tot / n)
    np.testing.assert_allclose(sirs_scores(X, y).scores, expect, rtol=1e-10)


def test_cr_sis_matches_direct_formula():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(45, 3)) * [1, 5, 0.1] + [0, 3, -2]
    y = X[:, 1] + rng.standard_cauchy(45)
    Xs = (X - X.mean(0)) / X.std(0)
    G = _brute_ecdf(y)
    expect = [np.mean(Xs[:, j] * G) ** 2 for j in range(3)]
    np.testing.assert_allclose(cr_sis_scores(X, y).scores, expect, rtol=1e-12)


def test_scores_are_rank_invariant_in_y():
    # NCRS uses y only through its fits and ECDF; a monotone transform of y
    # changes the fits, so only CR-SIS and SIRS are exactly invariant.
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 5))
    y = X[:, 0] + rng.normal(size=50)
    for fn in (cr_sis_scores, sirs_scores):
        np.testing.assert_allclose(fn(X, y).scores, fn(X, np.exp(y)).scores, rtol=1e-12)


def test_degenerate_column_scores_zero_with_warning():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(40, 3))
    X[:, 1] = np.repeat([0.0, 1.0], 20)
    y = rng.normal(size=40)
    with pytest.warns(ScreeningWarning):
        s = ncrs_scores(X, y)
    assert s.scores[1] == 0.0
    assert list(s.degenerate) == [1]
    with pytest.warns(ScreeningWarning):
        fitted, flag = marginal_fit(X[:, 1], y)
    assert flag
    np.testing.assert_allclose(fitted, y.mean())


def test_top_d_ordering_and_ties():
    s = UtilityScores("NCRS", np.array([0.2, 0.9, 0.2, 0.5, 0.9]), n=100)
    act = select_active(s, ScreeningConfig(d=4))
    assert act.indices.tolist() == [1, 4, 3, 0]
    assert act.rule == "top_d" and act.d_effective == 4


def test_default_d_and_cap():
    assert default_d(200) == 37
    assert default_d(400) == 66
    s = UtilityScores("SIS", np.linspace(0, 1, 20), n=400)
    with pytest.warns(ScreeningWarning):
        act = select_active(s)
    assert act.d_effective == 20


def test_threshold_rule():
    s = UtilityScores("NCRS", np.array([0.01, 0.2, 0.05, 0.3]), n=100)
    act = select_active(s, ScreeningConfig(threshold_c=0.5, threshold_alpha=0.25))
    cut = 0.5 * 100 ** -0.25
    assert act.indices.tolist() == [3, 1]
    assert all(s.scores[j] >= cut for j in act.indices)
    assert act.rule == "threshold"


def test_config_validation():
    with pytest.raises(ValueError):
        ScreeningConfig(d=3, threshold_c=1.0)
    with pytest.raises(ValueError):
        ScreeningConfig(threshold_c=1.0, threshold_alpha=0.5)
    with pytest.raises(ValueError):
        ScreeningConfig(threshold_alpha=0.1)
    with pytest.raises(ValueError):
        ScreeningConfig(d=0)


def test_compute_scores_dispatch():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(40, 3))
    y = X[:, 0] + rng.normal(size=40)
    for name in ("ncrs", "SIS", "nis", "sirs", "CR-SIS"):
        s = compute_scores(name, X, y)
        assert s.p == 3 and np.all(s.scores >= 0)
    with pytest.raises(ValueError):
        compute_scores("lasso", X, y)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        ncrs_scores(np.zeros((10, 2)), np.zeros(9))


def test_chunking_does_not_change_scores(monkeypatch):
    import addscreen.screening as scr

    rng = np.random.default_rng(9)
    X = rng.normal(size=(60, 25))
    y = X[:, 3] ** 2 + rng.normal(size=60)
    full = ncrs_scores(X, y).scores
    monkeypatch.setattr(scr, "_CHUNK", 4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        np.testing.assert_array_equal(ncrs_scores(X, y).scores, full)
