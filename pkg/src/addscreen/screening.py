"""Marginal screening utilities: NCRS and the SIS, NIS, SIRS and CR-SIS rules.

All score functions take ``X`` of shape ``(n, p)`` and ``y`` of shape
``(n,)`` and return a :class:`UtilityScores`. Covariate indices are
0-based throughout.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .splines import DEFAULT_K, DEFAULT_ORDER, bspline_values, clamped_knots, quantile_knots

METHODS = ("NCRS", "SIS", "NIS", "SIRS", "CRSIS")

# columns per batch when building (n, p, K) design tensors
_CHUNK = 512


class ScreeningWarning(UserWarning):
    pass


@dataclass
class UtilityScores:
    method: str
    scores: np.ndarray
    n: int
    centered: bool = True
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def p(self) -> int:
        return self.scores.size

    def ranking(self) -> np.ndarray:
        """Column indices by decreasing score, smaller index first on ties."""
        return np.argsort(-self.scores, kind="stable")


@dataclass(frozen=True)
class ActiveSet:
    indices: np.ndarray
    rule: str
    d_effective: int
    param: tuple = ()


@dataclass
class ScreeningConfig:
    """Screening settings.

    Exactly one rule is active: top-``d`` (``d=None`` means the default
    ``floor(n / log n)``) or, when ``threshold_c`` is set, the threshold
    rule ``score >= c * n**(-alpha)`` with ``alpha`` in ``[0, 1/2)``.
    """

    d: Optional[int] = None
    threshold_c: Optional[float] = None
    threshold_alpha: Optional[float] = None
    K: int = DEFAULT_K
    order: int = DEFAULT_ORDER
    centered: bool = True

    def __post_init__(self):
        if self.threshold_c is not None:
            if self.d is not None:
                raise ValueError("set either d or threshold_c, not both")
            if self.threshold_c <= 0:
                raise ValueError("threshold_c must be positive")
            alpha = 0.0 if self.threshold_alpha is None else self.threshold_alpha
            if not 0 <= alpha < 0.5:
                raise ValueError("threshold_alpha must lie in [0, 1/2)")
            self.threshold_alpha = alpha
        elif self.threshold_alpha is not None:
            raise ValueError("threshold_alpha requires threshold_c")
        if self.d is not None and self.d < 1:
            raise ValueError("d must be positive")


def default_d(n: int) -> int:
    return int(math.floor(n / math.log(n)))


def ecdf_values(y):
    """``G_n(y_i) = #{j: y_j <= y_i} / n`` for every observation."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("empty response")
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite values")
    s = np.sort(y)
    return np.searchsorted(s, y, side="right") / y.size


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.size:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in X or y")
    return X, y


def _distinct_counts(X):
    s = np.sort(X, axis=0)
    return 1 + np.count_nonzero(np.diff(s, axis=0) > 0, axis=0)


def marginal_fits(X, y, K=DEFAULT_K, order=DEFAULT_ORDER, ridge_jitter=1e-8):
    """Componentwise spline least-squares fits for every column of ``X``.

    Returns
    -------
    fitted : ndarray, shape (n, p)
        ``m_j(X_ij)`` for each column.
    degenerate : ndarray of bool, shape (p,)
        Columns that cannot carry ``K`` knots; their fit is ``mean(y)``.
    """
    X, y = _check_xy(X, y)
    n, p = X.shape
    if n <= K:
        raise ValueError(f"need n > K, got n={n}, K={K}")
    fitted = np.empty((n, p))
    degenerate = _distinct_counts(X) < K
    a = X.min(axis=0)
    b = X.max(axis=0)
    inner = quantile_knots(X, K, order, axis=0)  # (p, K - q)
    if inner.shape[-1]:
        bad = (inner[:, 0] <= a) | (inner[:, -1] >= b) | np.any(np.diff(inner, axis=1) <= 0, axis=1)
        degenerate |= bad
    good = np.flatnonzero(~degenerate)
    fitted[:, degenerate] = y.mean()
    for start in range(0, good.size, _CHUNK):
        cols = good[start : start + _CHUNK]
        t = clamped_knots(a[cols], b[cols], inner[cols], order)
        Z = bspline_values(t[:, None, :], order, X[:, cols].T)  # (c, n, K)
        Zt = Z.transpose(0, 2, 1)
        G = Zt @ Z
        r = Zt @ y
        ev = np.linalg.eigvalsh(G)
        deficient = ev[:, 0] <= 1e-12 * ev[:, -1]
        if np.any(deficient):
            G[deficient] += ridge_jitter * np.eye(K)
        beta = np.linalg.solve(G, r[..., None])[..., 0]
        fitted[:, cols] = (Z @ beta[..., None])[..., 0].T
    return fitted, degenerate


def marginal_fit(x_column, y, K=DEFAULT_K, order=DEFAULT_ORDER):
    """Single-covariate version of :func:`marginal_fits`.

    Returns the fitted values and a flag that is True for a degenerate
    covariate (constant fit at ``mean(y)``).
    """
    x = np.asarray(x_column, dtype=float).ravel()
    fitted, deg = marginal_fits(x[:, None], y, K, order)
    if deg[0]:
        warnings.warn("degenerate covariate: marginal fit set to mean(y)", ScreeningWarning, stacklevel=2)
    return fitted[:, 0], bool(deg[0])


def _warn_degenerate(method, mask):
    if np.any(mask):
        warnings.warn(
            f"{method}: {int(mask.sum())} degenerate column(s) scored 0",
            ScreeningWarning,
            stacklevel=3,
        )


def ncrs_scores(X, y, cfg: ScreeningConfig | None = None) -> UtilityScores:
    """Squared covariance between the marginal spline fit and the ECDF of ``y``.

    With ``cfg.centered=False`` the raw second moment
    ``[(1/n) sum m_j(X_ij) G_n(Y_i)]^2`` is used instead.
    """
    cfg = cfg or ScreeningConfig()
    X, y = _check_xy(X, y)
    n = y.size
    G = ecdf_values(y)
    m, deg = marginal_fits(X, y, cfg.K, cfg.order)
    if cfg.centered:
        s = ((m - m.mean(axis=0)).T @ (G - G.mean())) / n
    else:
        s = (m.T @ G) / n
    s = s**2
    s[deg] = 0.0
    _warn_degenerate("NCRS", deg)
    return UtilityScores("NCRS", s, n, cfg.centered, np.flatnonzero(deg))


def nis_scores(X, y, K=DEFAULT_K, order=DEFAULT_ORDER) -> UtilityScores:
    """Empirical ``E[(m_j(X_j) - mean y)^2]`` of the marginal spline fits."""
    X, y = _check_xy(X, y)
    m, deg = marginal_fits(X, y, K, order)
    s = np.mean((m - y.mean()) ** 2, axis=0)
    s[deg] = 0.0
    _warn_degenerate("NIS", deg)
    return UtilityScores("NIS", s, y.size, True, np.flatnonzero(deg))


def _standardize(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    zero = sd <= 1e-12 * np.maximum(1.0, np.abs(mu))
    Xs = (X - mu) / np.where(zero, 1.0, sd)
    Xs[:, zero] = 0.0
    return Xs, zero


def cr_sis_scores(X, y) -> UtilityScores:
    """``[(1/n) sum X_ij G_n(Y_i)]^2`` on standardized columns."""
    X, y = _check_xy(X, y)
    Xs, zero = _standardize(X)
    s = (Xs.T @ ecdf_values(y) / y.size) ** 2
    _warn_degenerate("CRSIS", zero)
    return UtilityScores("CRSIS", s, y.size, False, np.flatnonzero(zero))


def sis_scores(X, y) -> UtilityScores:
    """Squared Pearson correlation of each column with ``y``."""
    X, y = _check_xy(X, y)
    Xs, zero = _standardize(X)
    yc = y - y.mean()
    sy = np.sqrt(np.mean(yc**2))
    if sy == 0:
        s = np.zeros(X.shape[1])
    else:
        s = (Xs.T @ yc / (y.size * sy)) ** 2
    _warn_degenerate("SIS", zero)
    return UtilityScores("SIS", np.minimum(s, 1.0), y.size, True, np.flatnonzero(zero))


def sirs_scores(X, y) -> UtilityScores:
    """``(1/n) sum_k [(1/n) sum_i X_ij I(Y_i < Y_k)]^2`` on standardized columns."""
    X, y = _check_xy(X, y)
    n = y.size
    Xs, zero = _standardize(X)
    order = np.argsort(y, kind="stable")
    csum = np.vstack([np.zeros((1, Xs.shape[1])), np.cumsum(Xs[order], axis=0)])
    below = np.searchsorted(y[order], y, side="left")  # #{i: y_i < y_k}
    partial = csum[below] / n
    s = np.mean(partial**2, axis=0)
    _warn_degenerate("SIRS", zero)
    return UtilityScores("SIRS", s, n, True, np.flatnonzero(zero))


def compute_scores(method: str, X, y, cfg: ScreeningConfig | None = None) -> UtilityScores:
    cfg = cfg or ScreeningConfig()
    key = method.upper().replace("-", "").replace("_", "")
    if key == "NCRS":
        return ncrs_scores(X, y, cfg)
    if key == "SIS":
        return sis_scores(X, y)
    if key == "NIS":
        return nis_scores(X, y, cfg.K, cfg.order)
    if key == "SIRS":
        return sirs_scores(X, y)
    if key == "CRSIS":
        return cr_sis_scores(X, y)
    raise ValueError(f"unknown screening method {method!r}; choose from {METHODS}")


def select_active(scores: UtilityScores, cfg: ScreeningConfig | None = None) -> ActiveSet:
    """Apply the top-``d`` or threshold rule to a score vector."""
    cfg = cfg or ScreeningConfig()
    order = scores.ranking()
    if cfg.threshold_c is not None:
        cut = cfg.threshold_c * scores.n ** (-cfg.threshold_alpha)
        keep = order[scores.scores[order] >= cut]
        return ActiveSet(keep, "threshold", keep.size, (cfg.threshold_c, cfg.threshold_alpha))
    d = default_d(scores.n) if cfg.d is None else cfg.d
    if d > scores.p:
        warnings.warn(f"d={d} exceeds p={scores.p}; capped", ScreeningWarning, stacklevel=2)
        d = scores.p
    return ActiveSet(order[:d].copy(), "top_d", d, (d,))
