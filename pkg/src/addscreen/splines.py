"""Normalized B-spline bases, their second derivatives and Gram matrices.

The evaluation routines are written for batches: knot vectors may carry
leading axes (one knot vector per covariate) so that a whole design
tensor of shape ``(n, p, K)`` is produced in a handful of array passes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "DuplicateKnotError",
    "GramPair",
    "SplineBasis",
    "build_basis",
    "bspline_values",
    "clamped_knots",
    "cox_de_boor",
    "design_block",
    "eval_basis",
    "eval_basis_d2",
    "gram_matrices",
    "quantile_knots",
]

DEFAULT_K = 6
DEFAULT_ORDER = 4


class DuplicateKnotError(ValueError):
    """Raised when the data cannot support ``K`` distinct knots."""


@dataclass(frozen=True)
class GramPair:
    """Mass matrix ``A`` and second-derivative penalty ``D`` of one basis."""

    A: np.ndarray
    D: np.ndarray


@dataclass(frozen=True, eq=False)
class SplineBasis:
    """Clamped B-spline system of a single covariate.

    Parameters
    ----------
    order : int
        Polynomial order ``q`` (degree ``q - 1``).
    num_basis : int
        Number of basis functions ``K``.
    boundary : tuple of float
        Domain ``[a, b]``; evaluation clamps into it.
    interior_knots : ndarray
        ``K - q`` knots strictly inside ``(a, b)``.
    domain_source : str
        ``"data_quantiles"`` or ``"unit_interval"``.
    """

    order: int
    num_basis: int
    boundary: tuple[float, float]
    interior_knots: np.ndarray
    domain_source: str = "data_quantiles"

    def __post_init__(self):
        a, b = self.boundary
        q, K = self.order, self.num_basis
        if not a < b:
            raise ValueError(f"boundary must satisfy a < b, got {self.boundary}")
        if K < q:
            raise ValueError(f"num_basis={K} must be at least order={q}")
        inner = np.asarray(self.interior_knots, dtype=float)
        if inner.shape != (K - q,):
            raise ValueError(f"expected {K - q} interior knots, got {inner.shape}")
        if inner.size and (inner[0] <= a or inner[-1] >= b or np.any(np.diff(inner) < 0)):
            raise DuplicateKnotError("interior knots must be nondecreasing and inside (a, b)")
        inner.setflags(write=False)
        object.__setattr__(self, "interior_knots", inner)

    @cached_property
    def knots(self) -> np.ndarray:
        """Full clamped knot vector of length ``K + q``."""
        return clamped_knots(self.boundary[0], self.boundary[1], self.interior_knots, self.order)

    @cached_property
    def greville(self) -> np.ndarray:
        """Greville abscissae; ``sum_k greville[k] * B_k(x) == x``."""
        t, q = self.knots, self.order
        return np.array([t[k + 1 : k + q].mean() for k in range(self.num_basis)])

    @cached_property
    def gram(self) -> GramPair:
        return gram_matrices(self)

    def clamp(self, x):
        return np.clip(x, self.boundary[0], self.boundary[1])


def clamped_knots(a, b, interior, order):
    """Knot vector with ``order``-fold boundary knots.

    ``a``, ``b`` may be arrays with a leading batch shape, in which case
    ``interior`` must have shape ``batch + (K - q,)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    interior = np.asarray(interior, dtype=float)
    left = np.repeat(a[..., None], order, axis=-1)
    right = np.repeat(b[..., None], order, axis=-1)
    return np.concatenate([left, interior, right], axis=-1)


def quantile_knots(x, num_basis, order, axis=0):
    """Interior knots at equally spaced empirical quantiles along ``axis``."""
    m = num_basis - order
    levels = np.arange(1, m + 1) / (m + 1)
    q = np.quantile(x, levels, axis=axis)
    return np.moveaxis(np.atleast_1d(q), 0, -1)


def build_basis(x_column, K=DEFAULT_K, order=DEFAULT_ORDER, domain_source="data_quantiles"):
    """Build the basis of one covariate with quantile-placed interior knots."""
    x = np.asarray(x_column, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("covariate contains non-finite values")
    if K < order:
        raise ValueError(f"K={K} must be at least order={order}")
    if x.size < K:
        raise ValueError(f"need at least K={K} observations, got {x.size}")
    if np.unique(x).size < K:
        raise DuplicateKnotError(f"fewer than K={K} distinct values in covariate")
    inner = quantile_knots(x, K, order)
    if domain_source == "unit_interval":
        a, b = 0.0, 1.0
    elif domain_source == "data_quantiles":
        a, b = float(x.min()), float(x.max())
    else:
        raise ValueError(f"unknown domain_source {domain_source!r}")
    if inner.size and (np.any(np.diff(inner) <= 0) or inner[0] <= a or inner[-1] >= b):
        raise DuplicateKnotError("quantile knots coincide; covariate has too many ties")
    return SplineBasis(order, K, (a, b), inner, domain_source)


def _order1(t, x):
    """Indicator (order 1) B-splines on knot vector ``t`` at points ``x``.

    ``t`` has shape ``batch + (m,)`` and ``x`` shape ``(n,) + batch``.
    Intervals are half open except that the right boundary belongs to the
    last nonempty interval.
    """
    lo = t[..., :-1]
    hi = t[..., 1:]
    xe = x[..., None]
    B = ((lo <= xe) & (xe < hi)).astype(float)
    # x == b: assign to the last interval of positive length
    b = t[..., -1]
    at_end = np.broadcast_to(x == b, B.shape[:-1])
    if np.any(at_end):
        m = t.shape[-1]
        pos = hi > lo
        last = m - 2 - np.argmax(pos[..., ::-1], axis=-1)
        onehot = np.arange(m - 1) == last[..., None]
        B = np.where(at_end[..., None], np.broadcast_to(onehot, B.shape), B)
    return B


def _safe_inv(den):
    # 1/den with 0 for coincident knots (the 0/0 := 0 convention)
    out = np.zeros_like(den)
    np.divide(1.0, den, out=out, where=den > 0)
    return out


def _raise_order(B, t, x, k):
    """Cox–de Boor step from order ``k - 1`` to order ``k``."""
    n_out = t.shape[-1] - k
    xe = x[..., None]
    ti = t[..., :n_out]
    ti1 = t[..., 1 : 1 + n_out]
    tik = t[..., k : k + n_out]
    inv_l = _safe_inv(t[..., k - 1 : k - 1 + n_out] - ti)
    inv_r = _safe_inv(tik - ti1)
    left = (xe - ti) * inv_l
    left *= B[..., :n_out]
    right = (tik - xe) * inv_r
    right *= B[..., 1 : 1 + n_out]
    left += right
    return left


def _diff_order(dB, t, k):
    """Derivative recursion: maps d^r of order ``k - 1`` to d^(r+1) of order ``k``."""
    n_out = t.shape[-1] - k
    inv_l = _safe_inv(t[..., k - 1 : k - 1 + n_out] - t[..., :n_out])
    inv_r = _safe_inv(t[..., k : k + n_out] - t[..., 1 : 1 + n_out])
    return (k - 1) * (dB[..., :n_out] * inv_l - dB[..., 1 : 1 + n_out] * inv_r)


def _local_values(t, order, x):
    """Nonzero-span evaluation (de Boor's triangular scheme).

    Only the ``order`` functions supported on the span of each point are
    computed and then scattered into the full ``K`` columns.
    """
    K = t.shape[-1] - order
    deg = order - 1
    inner = t[..., order:K]
    span = deg + np.sum(inner <= x[..., None], axis=-1)
    span = np.minimum(span, K - 1)
    tb = np.broadcast_to(t, x.shape + t.shape[-1:])

    def knot(offset):
        return np.take_along_axis(tb, (span + offset)[..., None], axis=-1)[..., 0]

    left = [None] + [x - knot(1 - j) for j in range(1, order)]
    right = [None] + [knot(j) - x for j in range(1, order)]
    N = [np.ones_like(x)]
    for j in range(1, order):
        saved = np.zeros_like(x)
        for r in range(j):
            temp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N.append(saved)
    out = np.zeros(x.shape + (K,))
    for r in range(order):
        np.put_along_axis(out, (span - deg + r)[..., None], N[r][..., None], axis=-1)
    return out


def bspline_values(t, order, x, deriv=0):
    """Evaluate all order-``order`` B-splines (or a derivative) on knots ``t``.

    Parameters
    ----------
    t : ndarray, shape ``batch + (K + order,)``
        Clamped knot vector(s) with strictly increasing interior knots.
    x : ndarray, shape ``(n,) + batch`` or broadcastable against it
        (e.g. ``(n, 1)`` for shared points); assumed inside the knot span.
    deriv : int
        0, 1 or 2.

    Returns
    -------
    ndarray of shape ``(n,) + batch + (K,)``
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if deriv == 0:
        return _local_values(t, order, x)
    return cox_de_boor(t, order, x, deriv)


def cox_de_boor(t, order, x, deriv=0):
    """Same as :func:`bspline_values` via the full bottom-up recursion."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if deriv >= order:
        return np.zeros(x.shape + (t.shape[-1] - order,))
    B = _order1(t, x)
    for k in range(2, order - deriv + 1):
        B = _raise_order(B, t, x, k)
    for k in range(order - deriv + 1, order + 1):
        B = _diff_order(B, t, k)
    return B


def eval_basis(basis: SplineBasis, x):
    """Basis values at ``x`` (scalar or 1-D); ``x`` is clamped to the domain."""
    xs = basis.clamp(np.asarray(x, dtype=float))
    out = bspline_values(basis.knots, basis.order, np.atleast_1d(xs))
    return out[0] if np.ndim(x) == 0 else out


def eval_basis_d2(basis: SplineBasis, x):
    """Second derivatives of the basis functions at ``x``."""
    if basis.order < 3:
        raise ValueError(f"second derivatives need order >= 3, got {basis.order}")
    xs = basis.clamp(np.asarray(x, dtype=float))
    out = bspline_values(basis.knots, basis.order, np.atleast_1d(xs), deriv=2)
    return out[0] if np.ndim(x) == 0 else out


def gram_matrices(basis: SplineBasis, nodes=None) -> GramPair:
    """Exact ``A = int B B^T`` and ``D = int B'' B''^T`` over ``[a, b]``.

    Gauss–Legendre with ``nodes`` points (default ``order + 1``) on each
    knot interval integrates the piecewise polynomial integrands exactly.
    """
    q = basis.order
    nodes = q + 1 if nodes is None else nodes
    if nodes < q:
        raise ValueError(f"need at least {q} quadrature nodes, got {nodes}")
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    breaks = np.unique(basis.knots)
    lo, hi = breaks[:-1], breaks[1:]
    half = 0.5 * (hi - lo)
    pts = (0.5 * (hi + lo))[:, None] + half[:, None] * gx[None, :]
    wts = half[:, None] * gw[None, :]
    pts, wts = pts.ravel(), wts.ravel()
    B = bspline_values(basis.knots, q, pts)
    A = (B * wts[:, None]).T @ B
    if q >= 3:
        B2 = bspline_values(basis.knots, q, pts, deriv=2)
        D = (B2 * wts[:, None]).T @ B2
    else:
        D = np.zeros_like(A)
    A = 0.5 * (A + A.T)
    D = 0.5 * (D + D.T)
    return GramPair(A, D)


def design_block(basis: SplineBasis, x_column, center=False):
    """``n x K`` matrix of basis values; optionally column-centered."""
    Z = eval_basis(basis, np.asarray(x_column, dtype=float).ravel())
    if center:
        Z = Z - Z.mean(axis=0)
    return Z
