"""Doubly penalized additive spline fit with zero/linear/nonlinear identification.

The objective for fixed tuning parameters is::

    1/2 ||y - Z b||^2 + n * lam1 * sum_j w1_j ||b_j||_A + n * lam2 * sum_j w2_j ||b_j||_D

minimized by local quadratic approximation (a majorize-minimize scheme)
started from an A-norm group lasso fit that also supplies the adaptive
weights. ``y`` and the columns of ``Z`` are centered; the intercept is
``mean(y)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .screening import ActiveSet, ScreeningConfig, ScreeningWarning, compute_scores, select_active
from .splines import DEFAULT_K, DEFAULT_ORDER, DuplicateKnotError, build_basis, eval_basis

ZERO, LINEAR, NONLINEAR = "zero", "linear", "nonlinear"


class NumericalFailure(RuntimeError):
    """The penalized normal equations could not be solved."""

    def __init__(self, msg, lambdas=None):
        super().__init__(msg if lambdas is None else f"{msg} (lambda={lambdas})")
        self.lambdas = lambdas


@dataclass
class PenaltyConfig:
    """Tuning grids and iteration controls.

    A grid left as ``None`` is built from the data. lambda1 and lambda2 use
    ``n_grid`` log-spaced points over ``[grid_span, 1] * max|Z^T y| / n``;
    lambda0 uses ``n_grid0`` points over ``[lambda0_span, 1]`` times the
    smallest value that zeroes every block. ``sam=True`` switches to the single-penalty variant
    (lambda2 = 0, no linear components).
    """

    lambda0_grid: Optional[Sequence[float]] = None
    lambda1_grid: Optional[Sequence[float]] = None
    lambda2_grid: Optional[Sequence[float]] = None
    n_grid: int = 10
    grid_span: float = 1e-4
    n_grid0: int = 25
    lambda0_span: float = 1e-3
    drop_threshold: float = 1e-6
    weight_cap: float = 1e8
    max_iter: int = 100
    conv_tol: float = 1e-4
    ridge_jitter: float = 1e-8
    gl_tol: float = 1e-6
    gl_max_sweeps: int = 1000
    sam: bool = False

    def __post_init__(self):
        for name in ("lambda0_grid", "lambda1_grid", "lambda2_grid"):
            grid = getattr(self, name)
            if grid is None:
                continue
            grid = tuple(float(v) for v in grid)
            if not grid:
                raise ValueError(f"{name} must be nonempty")
            # a zero lambda2 is how the single-penalty variant is expressed
            if any(v < 0 for v in grid) or (name != "lambda2_grid" and any(v <= 0 for v in grid)):
                raise ValueError(f"{name} must be strictly positive")
            setattr(self, name, grid)
        if self.drop_threshold <= 0:
            raise ValueError("drop_threshold must be positive")
        if self.n_grid < 1 or self.n_grid0 < 1:
            raise ValueError("grid sizes must be positive")


@dataclass(frozen=True)
class Weights:
    w1: np.ndarray
    w2: np.ndarray


@dataclass
class Component:
    kind: str
    slope: Optional[float] = None
    offset: Optional[float] = None


@dataclass
class GroupLassoResult:
    blocks: list
    lambda0: float
    converged: bool
    sweeps: int


@dataclass
class FitResult:
    """Fitted additive model on the screened covariates.

    ``blocks[j]`` holds the K spline coefficients of component ``j`` and
    ``centers[j]`` the training means of its basis columns, so component
    ``j`` evaluates to ``(B_j(x) - centers[j]) @ blocks[j]``.
    """

    intercept: float
    blocks: list
    classification: list
    lambda1: float
    lambda2: float
    ebic: float = math.nan
    rss: float = math.nan
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    centers: Optional[list] = None
    bases: Optional[list] = None
    columns: Optional[np.ndarray] = None
    lambda0: Optional[float] = None
    max_residual: float = 0.0
    residual_bounds: list = field(default_factory=list)

    @property
    def kinds(self) -> list:
        return [c.kind for c in self.classification]

    @property
    def lambdas(self) -> tuple:
        return (self.lambda1, self.lambda2)

    def count(self, kind: str) -> int:
        return sum(c.kind == kind for c in self.classification)


# --------------------------------------------------------------------------
# small linear-algebra helpers


def _psd_root(M, rel_tol=1e-10):
    """``F`` with ``F^T F = M``; eigenvalues below ``rel_tol * max`` are dropped.

    The discarded directions are returned as an orthonormal null basis.
    """
    e, V = np.linalg.eigh(0.5 * (M + M.T))
    keep = e > rel_tol * max(e[-1], 0.0)
    F = np.sqrt(e[keep])[:, None] * V[:, keep].T
    return F, V[:, ~keep]


def _block_norm(root, b):
    v = root @ b
    return math.sqrt(float(v @ v))


def _solve_spd(M, rhs):
    """Solve a symmetric positive definite system after Jacobi scaling."""
    diag = np.diag(M).copy()
    if np.any(diag <= 0) or not np.all(np.isfinite(M)):
        raise np.linalg.LinAlgError("system is not positive definite")
    s = 1.0 / np.sqrt(diag)
    Ms = M * s[:, None] * s[None, :]
    c = linalg.cho_factor(Ms, check_finite=False)
    return linalg.cho_solve(c, rhs * s, check_finite=False) * s


def _split(Z, d):
    K = Z.shape[1] // d
    return [Z[:, j * K : (j + 1) * K] for j in range(d)]


# --------------------------------------------------------------------------
# group lasso initializer


def _chol_upper(A, jitter):
    try:
        return linalg.cholesky(A, lower=False)
    except linalg.LinAlgError:
        return linalg.cholesky(A + jitter * np.eye(A.shape[0]), lower=False)


class _GroupLassoProblem:
    """A-norm group lasso in Cholesky coordinates ``theta_j = R_j b_j``."""

    def __init__(self, Z, y, A, jitter=1e-8):
        self.n = Z.shape[0]
        self.d = len(A)
        self.y = np.asarray(y, dtype=float)
        self.R = [_chol_upper(Aj, jitter) for Aj in A]
        blocks = _split(Z, self.d)
        self.Zt = [linalg.solve_triangular(R, Zj.T, trans="T", lower=False).T for R, Zj in zip(self.R, blocks)]
        self.ZtT = [np.ascontiguousarray(Zj.T) for Zj in self.Zt]
        self.L = np.array([max(np.linalg.eigvalsh(Zj.T @ Zj)[-1], 1e-300) for Zj in self.Zt])
        self.lambda_max = max(np.linalg.norm(Zj.T @ self.y) for Zj in self.Zt) / self.n

    def to_b(self, theta):
        return [linalg.solve_triangular(R, t, lower=False) for R, t in zip(self.R, theta)]

    def objective(self, theta, lam):
        r = self.y - sum(Zj @ t for Zj, t in zip(self.Zt, theta))
        return 0.5 * r @ r + self.n * lam * sum(np.linalg.norm(t) for t in theta)

    def solve(self, lam, theta=None, tol=1e-6, max_sweeps=1000):
        K = self.Zt[0].shape[1] if self.d else 0
        theta = [np.zeros(K) for _ in range(self.d)] if theta is None else [t.copy() for t in theta]
        r = self.y - sum((Zj @ t for Zj, t in zip(self.Zt, theta)), np.zeros(self.n))
        thresh = self.n * lam / self.L
        inv_L = 1.0 / self.L
        blocks = list(zip(self.Zt, self.ZtT, thresh, inv_L))
        zero = np.zeros(K)
        converged = False
        sweeps = 0
        for sweeps in range(1, max_sweeps + 1):
            delta2 = 0.0
            size2 = 0.0
            for j, (Zj, ZjT, th, il) in enumerate(blocks):
                old = theta[j]
                v = old + (ZjT @ r) * il
                nv = math.sqrt(v @ v)
                if nv > th:
                    new = (1.0 - th / nv) * v
                    size2 += new @ new
                elif nv == 0.0 or old is zero:
                    theta[j] = zero
                    continue
                else:
                    new = zero
                step = new - old
                r -= Zj @ step
                theta[j] = new
                delta2 += step @ step
            if math.sqrt(delta2) <= tol * max(math.sqrt(size2), 1e-12):
                converged = True
                break
        theta = [t.copy() for t in theta]
        return theta, converged, sweeps


def group_lasso_init(Z, y, A, lambda0, cfg: PenaltyConfig | None = None, theta0=None):
    """Minimize ``1/2 ||y - Z b||^2 + n * lambda0 * sum_j ||b_j||_A``.

    Block coordinate descent with one majorized (prox-gradient) step per
    block and sweep, in coordinates where the A-norm is Euclidean.
    """
    cfg = cfg or PenaltyConfig()
    prob = _GroupLassoProblem(np.asarray(Z, float), y, A, cfg.ridge_jitter)
    theta, ok, sweeps = prob.solve(lambda0, theta0, cfg.gl_tol, cfg.gl_max_sweeps)
    if not ok:
        warnings.warn(f"group lasso did not converge in {sweeps} sweeps", RuntimeWarning, stacklevel=2)
    return GroupLassoResult(prob.to_b(theta), float(lambda0), ok, sweeps)


def adaptive_weights(b_init, A, D, cfg: PenaltyConfig | None = None) -> Weights:
    """``w1 = 1/||b||_A``, ``w2 = 1/||b||_D``, capped; tiny norms get the cap."""
    cfg = cfg or PenaltyConfig()
    w = []
    for mats in (A, D):
        out = np.empty(len(b_init))
        for j, (bj, M) in enumerate(zip(b_init, mats)):
            nrm = _block_norm(_psd_root(M)[0], bj)
            out[j] = cfg.weight_cap if nrm < cfg.drop_threshold else min(1.0 / nrm, cfg.weight_cap)
        w.append(out)
    return Weights(*w)


# --------------------------------------------------------------------------
# local quadratic approximation


class _Problem:
    """Data shared by every LQA run on one design."""

    def __init__(self, Z, y, A, D):
        self.Z = np.asarray(Z, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.n = self.Z.shape[0]
        self.d = len(A)
        self.K = A[0].shape[0] if self.d else 0
        self.A = [np.asarray(M, float) for M in A]
        self.D = [np.asarray(M, float) for M in D]
        self.G = self.Z.T @ self.Z
        self.c = self.Z.T @ self.y
        self.A_root = [_psd_root(M)[0] for M in self.A]
        roots = [_psd_root(M) for M in self.D]
        self.D_root = [r[0] for r in roots]
        self.null = [r[1] for r in roots]
        self.null_A = [N.T @ Aj @ N for N, Aj in zip(self.null, self.A)]

    def rss(self, blocks):
        if not self.d:
            return float(self.y @ self.y)
        r = self.y - self.Z @ np.concatenate(blocks)
        return float(r @ r)

    def project_linear(self, j, bj):
        N = self.null[j]
        coef = np.linalg.solve(self.null_A[j], N.T @ (self.A[j] @ bj))
        return N @ coef


def _bookkeep(prob, b, kinds, thr, allow_linear):
    for j in range(prob.d):
        if kinds[j] == ZERO:
            continue
        if _block_norm(prob.A_root[j], b[j]) < thr:
            kinds[j] = ZERO
            b[j] = np.zeros(prob.K)
        elif kinds[j] == NONLINEAR and allow_linear and _block_norm(prob.D_root[j], b[j]) < thr:
            kinds[j] = LINEAR
            b[j] = prob.project_linear(j, b[j])


def _penalized_objective(prob, b, kinds, w, lam1, lam2):
    pen = 0.0
    for j in range(prob.d):
        if kinds[j] == ZERO:
            continue
        pen += lam1 * w.w1[j] * _block_norm(prob.A_root[j], b[j])
        if kinds[j] == NONLINEAR:
            pen += lam2 * w.w2[j] * _block_norm(prob.D_root[j], b[j])
    return 0.5 * prob.rss(b) + prob.n * pen


def _relative_change(prob, old, new, kinds):
    """Largest blockwise relative change, measured in the A-norm and, for
    nonlinear blocks, also in the D-norm.

    A block whose curvature is decaying towards zero keeps a large relative
    D-norm change, so iteration continues until it crosses the drop
    threshold instead of stalling just above it.
    """
    worst = 0.0
    for j in range(prob.d):
        if kinds[j] == ZERO:
            continue
        delta = new[j] - old[j]
        roots = [prob.A_root[j]] + ([prob.D_root[j]] if kinds[j] == NONLINEAR else [])
        for F in roots:
            worst = max(worst, _block_norm(F, delta) / max(_block_norm(F, old[j]), 1e-300))
    return worst


def _lqa(prob: _Problem, weights: Weights, lam1, lam2, b_init, cfg: PenaltyConfig, allow_linear=True):
    d, K, n = prob.d, prob.K, prob.n
    thr = cfg.drop_threshold
    b = [np.asarray(bj, float).copy() for bj in b_init]
    kinds = [NONLINEAR] * d
    allow_linear = allow_linear and not cfg.sam
    _bookkeep(prob, b, kinds, thr, allow_linear)
    trace = [_penalized_objective(prob, b, kinds, weights, lam1, lam2)]
    residuals, bounds = [], []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        active = [j for j in range(d) if kinds[j] != ZERO]
        if not active:
            converged = True
            break
        idx = np.concatenate([np.arange(j * K, (j + 1) * K) for j in active])
        M = prob.G[np.ix_(idx, idx)]
        rhs = prob.c[idx]
        has_linear = any(kinds[j] == LINEAR for j in active)
        if has_linear:
            T = linalg.block_diag(*[np.eye(K) if kinds[j] == NONLINEAR else prob.null[j] for j in active])
            M = T.T @ M @ T
            rhs = T.T @ rhs
        else:
            M = M.copy()
        pos = 0
        for j in active:
            nA = _block_norm(prob.A_root[j], b[j])
            if kinds[j] == NONLINEAR:
                P = (lam1 * weights.w1[j] / nA) * prob.A[j]
                if lam2 > 0:
                    nD = _block_norm(prob.D_root[j], b[j])
                    P = P + (lam2 * weights.w2[j] / nD) * prob.D[j]
            else:
                P = (lam1 * weights.w1[j] / nA) * prob.null_A[j]
            m = P.shape[0]
            M[pos : pos + m, pos : pos + m] += n * P
            pos += m
        M[np.diag_indices_from(M)] += cfg.ridge_jitter
        try:
            x = _solve_spd(M, rhs)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailure(f"LQA system could not be solved: {exc}", (lam1, lam2)) from exc
        if not np.all(np.isfinite(x)):
            raise NumericalFailure("LQA produced non-finite coefficients", (lam1, lam2))
        residuals.append(float(np.linalg.norm(M @ x - rhs)))
        bounds.append(float(np.linalg.norm(rhs)))
        new = [np.zeros(K) for _ in range(d)]
        full = T @ x if has_linear else x
        for k, j in enumerate(active):
            new[j] = full[k * K : (k + 1) * K]
        _bookkeep(prob, new, kinds, thr, allow_linear)
        trace.append(_penalized_objective(prob, new, kinds, weights, lam1, lam2))
        change = _relative_change(prob, b, new, kinds)
        b = new
        if change < cfg.conv_tol:
            converged = True
            break
    return b, kinds, trace, it, converged, residuals, bounds


def lqa_fit(Z, y, A, D, weights: Weights, lambda1, lambda2, cfg: PenaltyConfig | None = None, b_init=None):
    """Iterate the LQA ridge update from ``b_init`` (zeros give the null model).

    ``Z`` is the column-centered ``n x dK`` design and ``y`` the centered
    response. Returns a :class:`FitResult` with intercept 0 (the caller
    restores ``mean(y)``).
    """
    cfg = cfg or PenaltyConfig()
    prob = _Problem(Z, y, A, D)
    if b_init is None:
        b_init = [np.zeros(prob.K) for _ in range(prob.d)]
    return _fit_from_problem(prob, weights, lambda1, lambda2, b_init, cfg)


def _fit_from_problem(prob, weights, lam1, lam2, b_init, cfg):
    b, kinds, trace, it, ok, res, bounds = _lqa(prob, weights, lam1, lam2, b_init, cfg)
    rss = prob.rss(b)
    d1 = kinds.count(NONLINEAR)
    d2 = kinds.count(LINEAR)
    return FitResult(
        intercept=0.0,
        blocks=b,
        classification=[Component(k) for k in kinds],
        lambda1=float(lam1),
        lambda2=float(lam2),
        ebic=ebic(rss, prob.n, prob.K, max(prob.d, 1), d1, d2),
        rss=rss,
        objective_trace=trace,
        iterations=it,
        converged=ok,
        max_residual=max(res, default=0.0),
        residual_bounds=[r / (1.0 + bnd) for r, bnd in zip(res, bounds)],
    )


def ebic(rss, n, K, d, d1, d2, floor=1e-12):
    """Extended BIC for ``d1`` nonlinear and ``d2`` linear components among ``d``."""
    if rss < 0:
        raise ValueError("rss must be nonnegative")
    if d < 1:
        raise ValueError("d must be at least 1")
    nk = n / K
    return (
        math.log(max(rss / n, floor))
        + d1 * math.log(nk) / nk
        + d2 * math.log(n) / n
        + (d1 * K + d2) / n * math.log(d)
    )


# --------------------------------------------------------------------------
# full path on a screened design


@dataclass
class DesignBlocks:
    """Spline design of the screened covariates (``None`` marks an unusable column)."""

    bases: list
    Z: np.ndarray  # centered, n x dK
    centers: list
    usable: np.ndarray


def build_design(X, K=DEFAULT_K, order=DEFAULT_ORDER) -> DesignBlocks:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    bases, cols, centers = [], [], []
    usable = np.ones(d, dtype=bool)
    for j in range(d):
        try:
            basis = build_basis(X[:, j], K, order)
        except DuplicateKnotError:
            basis = None
            usable[j] = False
        bases.append(basis)
        if basis is None:
            Zj = np.zeros((n, K))
            centers.append(np.zeros(K))
        else:
            Zj = eval_basis(basis, X[:, j])
            centers.append(Zj.mean(axis=0))
            Zj = Zj - centers[-1]
        cols.append(Zj)
    Z = np.hstack(cols) if cols else np.zeros((n, 0))
    return DesignBlocks(bases, Z, centers, usable)


def _geom_grid(scale, span, m):
    if m == 1:
        return (float(scale),)
    return tuple(float(v) for v in scale * np.geomspace(1.0, span, m))


def select_lambda0(prob: _GroupLassoProblem, grid, cfg):
    """Warm-started group lasso path; pick lambda0 by a BIC-type rule.

    The path runs from the largest value down and stops once the active
    blocks carry at least ``n`` coefficients: such a fit interpolates and
    smaller lambda0 values only add active blocks.
    """
    n = prob.n
    K = prob.Zt[0].shape[1]
    best = None
    theta = None
    for lam in sorted(grid, reverse=True):
        theta, ok, sweeps = prob.solve(lam, theta, cfg.gl_tol, cfg.gl_max_sweeps)
        r = prob.y - sum(Zj @ t for Zj, t in zip(prob.Zt, theta))
        nnz = sum(bool(np.any(t)) for t in theta)
        crit = math.log(max(float(r @ r) / n, 1e-12)) + nnz * K * math.log(n) / n
        if best is None or crit < best[0]:
            best = (crit, lam, prob.to_b(theta), ok, sweeps)
        if nnz * K >= n:
            break
    _, lam, blocks, ok, sweeps = best
    return GroupLassoResult(blocks, lam, ok, sweeps)


@dataclass
class PathSetup:
    """Everything the (lambda1, lambda2) search needs, shared by PLAM and SAM."""

    design: DesignBlocks
    ybar: float
    init: GroupLassoResult
    weights: Weights
    problem: _Problem
    scale: float


def prepare_path(X, y, cfg: PenaltyConfig | None = None, K=DEFAULT_K, order=DEFAULT_ORDER) -> PathSetup:
    """Build the design, run the lambda0 path and compute adaptive weights."""
    cfg = cfg or PenaltyConfig()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if d < 1:
        raise ValueError("need at least one screened covariate")
    if y.size != n:
        raise ValueError(f"X has {n} rows but y has {y.size} entries")
    design = build_design(X, K, order)
    ybar = float(y.mean())
    yc = y - ybar
    A, D = [], []
    for basis in design.bases:
        if basis is None:
            A.append(np.eye(K))
            D.append(np.zeros((K, K)))
        else:
            A.append(basis.gram.A)
            D.append(basis.gram.D)
    gl = _GroupLassoProblem(design.Z, yc, A, cfg.ridge_jitter)
    grid0 = cfg.lambda0_grid or _geom_grid(max(gl.lambda_max, 1e-12), cfg.lambda0_span, cfg.n_grid0)
    init = select_lambda0(gl, grid0, cfg)
    for j in np.flatnonzero(~design.usable):
        init.blocks[j] = np.zeros(K)
    weights = adaptive_weights(init.blocks, A, D, cfg)
    prob = _Problem(design.Z, yc, A, D)
    scale = max(float(np.max(np.abs(prob.c))) / n, 1e-12)
    return PathSetup(design, ybar, init, weights, prob, scale)


def search_grid(setup: PathSetup, cfg: PenaltyConfig | None = None, sam=None, columns=None) -> FitResult:
    """Minimum-eBIC LQA fit over the (lambda1, lambda2) grid.

    ``sam`` overrides ``cfg.sam``. Ties go to the larger lambdas.
    """
    cfg = cfg or PenaltyConfig()
    sam = cfg.sam if sam is None else sam
    if sam != cfg.sam:
        cfg = replace(cfg, sam=sam)
    grid1 = cfg.lambda1_grid or _geom_grid(setup.scale, cfg.grid_span, cfg.n_grid)
    if sam:
        grid2 = (0.0,)
    else:
        grid2 = cfg.lambda2_grid or _geom_grid(setup.scale, cfg.grid_span, cfg.n_grid)
    best = None
    for lam1 in sorted(set(grid1)):
        for lam2 in sorted(set(grid2)):
            fit = _fit_from_problem(setup.problem, setup.weights, lam1, lam2, setup.init.blocks, cfg)
            key = (fit.ebic, -lam1, -lam2)
            if best is None or key < best[0]:
                best = (key, fit)
    fit = best[1]
    fit.intercept = setup.ybar
    fit.lambda0 = setup.init.lambda0
    fit.centers = setup.design.centers
    fit.bases = setup.design.bases
    fit.columns = None if columns is None else np.asarray(columns)
    _describe_linear(fit)
    return fit


def fit_path(X, y, cfg: PenaltyConfig | None = None, K=DEFAULT_K, order=DEFAULT_ORDER, columns=None) -> FitResult:
    """Fit the doubly penalized model on screened covariates ``X`` (n x d).

    lambda0 is chosen on its own grid, weights are computed once, then the
    (lambda1, lambda2) grid is searched for the smallest eBIC.
    """
    cfg = cfg or PenaltyConfig()
    return search_grid(prepare_path(X, y, cfg, K, order), cfg, columns=columns)


def _describe_linear(fit: FitResult):
    """Fill slope/offset so that component = offset + slope * x."""
    for j, comp in enumerate(fit.classification):
        if comp.kind != LINEAR or fit.bases[j] is None:
            continue
        basis = fit.bases[j]
        a, b = basis.boundary
        bj = fit.blocks[j]
        # clamped ends: f(a) = b_0, f(b) = b_{K-1}
        slope = (bj[-1] - bj[0]) / (b - a)
        shift = float(fit.centers[j] @ bj)
        comp.slope = float(slope)
        comp.offset = float(bj[0] - slope * a - shift)


def component_values(fit: FitResult, j, x):
    """Centered contribution of component ``j`` at points ``x``."""
    x = np.asarray(x, dtype=float)
    if fit.classification[j].kind == ZERO or fit.bases[j] is None:
        return np.zeros(x.shape)
    return (eval_basis(fit.bases[j], x) - fit.centers[j]) @ fit.blocks[j]


def predict(fit: FitResult, bases, X_new):
    """``intercept + sum_j f_j(x_j)`` with each covariate clamped to its basis domain."""
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim == 1:
        X_new = X_new[:, None]
    d = len(fit.blocks)
    if X_new.shape[1] != d:
        raise ValueError(f"expected {d} columns (one per screened covariate), got {X_new.shape[1]}")
    bases = fit.bases if bases is None else bases
    out = np.full(X_new.shape[0], fit.intercept, dtype=float)
    for j in range(d):
        if fit.classification[j].kind == ZERO or bases[j] is None:
            continue
        out += (eval_basis(bases[j], X_new[:, j]) - fit.centers[j]) @ fit.blocks[j]
    return out


def fitted_values(fit: FitResult, X):
    return predict(fit, fit.bases, X)


# --------------------------------------------------------------------------
# screening + fit pipeline and leave-one-out prediction error


@dataclass
class PipelineConfig:
    screening: ScreeningConfig = field(default_factory=ScreeningConfig)
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    method: str = "NCRS"


@dataclass
class PipelineFit:
    """A fit on the screened columns; ``fit.columns`` indexes the full ``X``."""

    active: ActiveSet
    fit: FitResult

    def predict(self, X_full):
        X_full = np.asarray(X_full, dtype=float)
        if X_full.ndim == 1:
            X_full = X_full[None, :]
        return predict(self.fit, None, X_full[:, self.active.indices])


def _screen(X, y, cfg: PipelineConfig) -> ActiveSet:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScreeningWarning)
        scores = compute_scores(cfg.method, X, y, cfg.screening)
        return select_active(scores, cfg.screening)


def fit_pipeline(X, y, cfg: PipelineConfig | None = None, variants=("PLAM",)) -> dict:
    """Screen, then fit each requested variant (``"PLAM"`` and/or ``"SAM"``).

    Screening, the lambda0 path and the adaptive weights are shared, so
    the variants differ only in their (lambda1, lambda2) search.
    """
    cfg = cfg or PipelineConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    active = _screen(X, y, cfg)
    sc = cfg.screening
    setup = prepare_path(X[:, active.indices], y, cfg.penalty, sc.K, sc.order)
    out = {}
    for v in variants:
        key = v.upper()
        if key not in ("PLAM", "SAM"):
            raise ValueError(f"unknown variant {v!r}; use PLAM or SAM")
        fit = search_grid(setup, cfg.penalty, sam=key == "SAM", columns=active.indices)
        out[key] = PipelineFit(active, fit)
    return out


@dataclass
class LoocvResult:
    pe: float
    n_folds: int
    failed: tuple = ()

    @property
    def flagged(self) -> bool:
        return bool(self.failed)


_FOLD_ERRORS = (ValueError, NumericalFailure, np.linalg.LinAlgError)


def loocv_compare(X, y, cfg: PipelineConfig | None = None, variants=("PLAM", "SAM")) -> dict:
    """Leave-one-out prediction error of each variant, one shared refit per fold.

    A fold whose pipeline raises is skipped with a warning and listed in
    ``failed``.
    """
    cfg = cfg or PipelineConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if n < 10:
        raise ValueError(f"LOOCV needs n >= 10, got {n}")
    keys = [v.upper() for v in variants]
    sq = {k: [] for k in keys}
    failed = []
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        keep[i] = False
        try:
            fits = fit_pipeline(X[keep], y[keep], cfg, keys)
            preds = {k: float(fits[k].predict(X[i])[0]) for k in keys}
        except _FOLD_ERRORS as exc:
            warnings.warn(f"LOOCV fold {i} failed: {exc}", RuntimeWarning, stacklevel=2)
            failed.append(i)
        else:
            for k in keys:
                sq[k].append((y[i] - preds[k]) ** 2)
        keep[i] = True
    return {
        k: LoocvResult(float(np.mean(v)) if v else math.nan, n, tuple(failed))
        for k, v in sq.items()
    }


def loocv_pe(X, y, cfg: PipelineConfig | None = None, sam=False) -> LoocvResult:
    """Mean squared leave-one-out prediction error of the full pipeline."""
    key = "SAM" if sam else "PLAM"
    return loocv_compare(X, y, cfg, (key,))[key]
