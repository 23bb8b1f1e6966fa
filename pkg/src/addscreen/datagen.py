"""Simulation designs for the four benchmark examples.

Randomness comes from numpy's PCG64 bit generator. Each replication gets
its own stream derived from ``SeedSequence([seed, rep])``, so runs are
reproducible and replications can be generated in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import ndtr

EX1_BETA = (1.0, 0.8, 0.6, 0.4, 0.2)
EX1_SIGMA2 = 6.83
EX2_NOISE_SD = math.sqrt(1.74)
EX3_COEF = (1.0, 1.0, 1.5, 1.5, 2.0, 2.0, 2.5, 2.5)
EX3_FUNCS = ("g1", "g2", "g3", "g4", "g1", "g2", "g3", "g4")
ERROR_LAWS = ("normal", "t5", "t1")


def make_rng(seed: int, rep: Optional[int] = None) -> np.random.Generator:
    """Generator for ``(seed, rep)``; independent streams per replication."""
    entropy = [int(seed)] if rep is None else [int(seed), int(rep)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class Scenario:
    """Generative description of one simulation design.

    ``signal_c`` applies to example 1 only. ``sigma`` is the noise scale:
    ``sqrt(6.83)`` for example 1, ``sqrt(1.74)`` for example 2, 1 for
    example 3; example 4 requires it explicitly (0.2 or 0.5 in the tables).
    """

    example: int
    n: int
    p: int
    signal_c: Optional[float] = None
    sigma: Optional[float] = None
    error_law: str = "normal"
    seed: int = 0

    def __post_init__(self):
        if self.example not in (1, 2, 3, 4):
            raise ValueError(f"example must be 1..4, got {self.example}")
        if self.n < 30:
            raise ValueError("n must be at least 30")
        if self.p < 10:
            raise ValueError("p must be at least 10")
        if self.error_law not in ERROR_LAWS:
            raise ValueError(f"error_law must be one of {ERROR_LAWS}")
        if self.example == 1:
            if self.signal_c is None:
                object.__setattr__(self, "signal_c", 1.0)
        elif self.signal_c is not None:
            raise ValueError("signal_c is only meaningful for example 1")
        if self.sigma is None:
            default = {1: math.sqrt(EX1_SIGMA2), 2: EX2_NOISE_SD, 3: 1.0, 4: 0.2}[self.example]
            object.__setattr__(self, "sigma", default)
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def label(self) -> str:
        parts = [f"ex{self.example}", f"n{self.n}", f"p{self.p}"]
        if self.example == 1:
            parts.append(f"c{self.signal_c:g}")
        if self.example == 4:
            parts.append(f"sigma{self.sigma:g}")
        parts.append(self.error_law)
        return "_".join(parts)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)


@dataclass
class GeneratedData:
    X: np.ndarray
    y: np.ndarray
    true_active: frozenset
    true_linear: frozenset = field(default_factory=frozenset)
    true_nonlinear: frozenset = field(default_factory=frozenset)


def mvn_ar1(n, p, rho, rng):
    """Rows i.i.d. N(0, S) with ``S_ij = rho**|i - j|`` via the AR(1) recursion."""
    if not abs(rho) < 1:
        raise ValueError("need |rho| < 1")
    e = rng.standard_normal((n, p))
    X = np.empty((n, p))
    X[:, 0] = e[:, 0]
    s = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + s * e[:, j]
    return X


def mvn_block(n, p, active, rng, rho_within=0.5, rho_between=0.1):
    """Two-block equicorrelated normals.

    ``X = sqrt(rb) g + sqrt(rw - rb) h_block + sqrt(1 - rw) e`` gives unit
    variances, correlation ``rw`` inside a block and ``rb`` across blocks.
    """
    active = np.asarray(sorted(active), dtype=int)
    if active.size == 0 or active.size >= p:
        raise ValueError("active set must be a nonempty proper subset")
    if not 0 <= rho_between <= rho_within < 1:
        raise ValueError("need 0 <= rho_between <= rho_within < 1")
    in_active = np.zeros(p, dtype=bool)
    in_active[active] = True
    g = rng.standard_normal((n, 1))
    h = rng.standard_normal((n, 2))
    e = rng.standard_normal((n, p))
    block = np.where(in_active, h[:, [0]], h[:, [1]])
    return (
        math.sqrt(rho_between) * g
        + math.sqrt(rho_within - rho_between) * block
        + math.sqrt(1.0 - rho_within) * e
    )


def _s(x):
    return np.sin(2 * np.pi * x)


def _c(x):
    return np.cos(2 * np.pi * x)


TEST_FUNCTIONS = {
    "g1": lambda x: x,
    "g2": lambda x: (2 * x - 1) ** 2,
    "g3": lambda x: _s(x) / (2 - _s(x)),
    "g4": lambda x: 0.1 * _s(x) + 0.2 * _c(x) + 0.3 * _s(x) ** 2 + 0.4 * _c(x) ** 3 + 0.5 * _s(x) ** 3,
    "f1": lambda x: 5 * _s(x),
    "f2": lambda x: 10 * x * (1 - x),
    "f3": lambda x: 3 * x,
    "f4": lambda x: 2 * x,
    "f5": lambda x: -2 * x,
}


def test_functions(tag: str, x):
    try:
        f = TEST_FUNCTIONS[tag]
    except KeyError:
        raise ValueError(f"unknown test function {tag!r}") from None
    return f(np.asarray(x, dtype=float))


# keep pytest from collecting the function above when imported into tests
test_functions.__test__ = False


def draw_errors(law: str, n: int, rng) -> np.ndarray:
    """Standard normal or raw Student-t draws (``t = z / sqrt(chi2_v / v)``)."""
    z = rng.standard_normal(n)
    if law == "normal":
        return z
    df = {"t5": 5, "t1": 1}[law]
    chi2 = np.sum(rng.standard_normal((df, n)) ** 2, axis=0)
    return z / np.sqrt(chi2 / df)


def gen_example(scenario: Scenario, rng=None, noise=None) -> GeneratedData:
    """Draw one dataset. ``noise`` overrides the error draws (e.g. zeros)."""
    sc = scenario
    rng = make_rng(sc.seed) if rng is None else rng
    n, p = sc.n, sc.p
    if sc.example == 3:
        active = range(8)
        X = mvn_block(n, p, active, rng)
    else:
        X = mvn_ar1(n, p, 0.8, rng)
    eps = draw_errors(sc.error_law, n, rng) if noise is None else np.broadcast_to(np.asarray(noise, float), (n,))
    if sc.example == 1:
        if p < 5:
            raise ValueError("example 1 needs p >= 5")
        beta = np.asarray(EX1_BETA)
        y = sc.signal_c * (X[:, :5] @ beta) + sc.sigma * eps
        lin = frozenset(range(5))
        return GeneratedData(X, y, lin, lin, frozenset())
    if sc.example == 2:
        f = TEST_FUNCTIONS
        y = 5 * f["g1"](X[:, 0]) + 3 * f["g2"](X[:, 1]) + 4 * f["g3"](X[:, 2]) + 6 * f["g4"](X[:, 3])
        y = y + sc.sigma * eps
        return GeneratedData(X, y, frozenset(range(4)), frozenset({0}), frozenset({1, 2, 3}))
    if sc.example == 3:
        y = sum(c * TEST_FUNCTIONS[g](X[:, j]) for j, (c, g) in enumerate(zip(EX3_COEF, EX3_FUNCS)))
        y = y + sc.sigma * eps
        lin = frozenset({0, 4})
        return GeneratedData(X, y, frozenset(range(8)), lin, frozenset(range(8)) - lin)
    U = ndtr(X)
    y = sum(TEST_FUNCTIONS[f"f{j + 1}"](U[:, j]) for j in range(5)) + sc.sigma * eps
    return GeneratedData(U, y, frozenset(range(5)), frozenset({2, 3, 4}), frozenset({0, 1}))
