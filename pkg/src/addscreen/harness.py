"""Replicated screening and structure-identification experiments.

A benchmark draws ``reps`` datasets from a :class:`~addscreen.datagen.Scenario`,
scores every requested screening rule, records the minimum model size
and whether the top ``nu`` covariates cover the truth, and for example 4
also fits the PLAM and SAM pipelines. Results aggregate into a
:class:`BenchmarkTable` that renders to CSV and to an aligned text table.
"""

from __future__ import annotations

import csv
import io
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .datagen import GeneratedData, Scenario, gen_example, make_rng
from .screening import METHODS, ScreeningConfig, ScreeningWarning, UtilityScores, compute_scores, default_d
from .solver import LINEAR, NONLINEAR, ZERO, FitResult, NumericalFailure, PenaltyConfig, PipelineConfig, fit_pipeline

LEVELS = (5, 25, 50, 75, 95)
STRUCT_KEYS = ("NV", "NVT", "NN", "NNT", "NL", "NLT")
FIT_METHODS = ("PLAM", "SAM")


# --------------------------------------------------------------------------
# metrics


def _ranks(scores) -> np.ndarray:
    """1-based rank of every covariate (decreasing score, smaller index on ties)."""
    s = scores.scores if isinstance(scores, UtilityScores) else np.asarray(scores, dtype=float)
    order = np.argsort(-s, kind="stable")
    ranks = np.empty(s.size, dtype=int)
    ranks[order] = np.arange(1, s.size + 1)
    return ranks


def min_model_size(scores, true_active) -> int:
    """Smallest prefix of the ranking that contains every index in ``true_active``."""
    truth = np.fromiter(true_active, dtype=int)
    if truth.size == 0:
        raise ValueError("true_active must be nonempty")
    return int(_ranks(scores)[truth].max())


def coverage_at(scores, true_active, nu: int) -> bool:
    return min_model_size(scores, true_active) <= nu


def quantiles(values, levels: Sequence[int] = LEVELS) -> tuple:
    """Nearest-rank quantiles: the ``ceil(q n / 100)``-th order statistic."""
    v = np.sort(np.asarray(values))
    n = v.size
    if n == 0:
        raise ValueError("no values")
    out = []
    for q in levels:
        k = max(1, -(-int(q) * n // 100))
        out.append(v[k - 1].item())
    return tuple(out)


def structure_metrics(fit: FitResult, truth: GeneratedData, columns=None) -> dict:
    """Counts of selected, nonlinear and linear components and their true hits.

    ``columns`` maps fit components to covariate indices; it defaults to
    ``fit.columns`` and then to ``0..d-1``.
    """
    if columns is None:
        columns = fit.columns if fit.columns is not None else range(len(fit.classification))
    cols = [int(c) for c in columns]
    nonzero = {c for c, k in zip(cols, fit.kinds) if k != ZERO}
    nonlin = {c for c, k in zip(cols, fit.kinds) if k == NONLINEAR}
    lin = {c for c, k in zip(cols, fit.kinds) if k == LINEAR}
    return {
        "NV": len(nonzero),
        "NVT": len(nonzero & truth.true_active),
        "NN": len(nonlin),
        "NNT": len(nonlin & truth.true_nonlinear),
        "NL": len(lin),
        "NLT": len(lin & truth.true_linear),
    }


# --------------------------------------------------------------------------
# records and tables


@dataclass(frozen=True)
class ReplicationRecord:
    rep_id: int
    method: str
    min_model_size: Optional[int]
    covered_at_nu: Optional[bool]
    fit_metrics: Optional[dict] = None


@dataclass
class BenchmarkRow:
    scenario: str
    method: str
    quantiles: Optional[tuple] = None
    S: Optional[float] = None
    structure: Optional[dict] = None
    structure_sd: Optional[dict] = None
    reps: int = 0


@dataclass
class BenchmarkTable:
    rows: list
    failures: int = 0
    failed_reps: tuple = ()

    def columns(self) -> list:
        cols = ["scenario", "method"] + [f"q{q:02d}" for q in LEVELS] + ["S"]
        if any(r.structure for r in self.rows):
            for k in STRUCT_KEYS:
                cols += [k, f"{k}_sd"]
        return cols + ["reps", "failures"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        w.writerow(cols)
        for r in self.rows:
            rec = {"scenario": r.scenario, "method": r.method, "reps": r.reps, "failures": self.failures}
            if r.quantiles is not None:
                rec.update({f"q{q:02d}": v for q, v in zip(LEVELS, r.quantiles)})
                rec["S"] = f"{r.S:.4f}"
            if r.structure:
                for k in STRUCT_KEYS:
                    rec[k] = f"{r.structure[k]:.4f}"
                    rec[f"{k}_sd"] = f"{r.structure_sd[k]:.4f}"
            w.writerow([rec.get(c, "") for c in cols])
        return buf.getvalue()

    def to_text(self) -> str:
        has_struct = any(r.structure for r in self.rows)
        head = ["method"] + [f"{q}%" for q in LEVELS] + ["S"]
        if has_struct:
            head += list(STRUCT_KEYS)
        lines_by_scenario: dict = {}
        for r in self.rows:
            cells = [r.method]
            if r.quantiles is not None:
                cells += [str(v) for v in r.quantiles] + [f"{r.S:.2f}"]
            else:
                cells += ["-"] * (len(LEVELS) + 1)
            if has_struct:
                if r.structure:
                    cells += [f"{r.structure[k]:.2f}({r.structure_sd[k]:.2f})" for k in STRUCT_KEYS]
                else:
                    cells += ["-"] * len(STRUCT_KEYS)
            lines_by_scenario.setdefault(r.scenario, []).append(cells)
        widths = [len(h) for h in head]
        for rows in lines_by_scenario.values():
            for cells in rows:
                widths = [max(w, len(c)) for w, c in zip(widths, cells)]

        def fmt(cells):
            return "  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(cells, widths)))

        out = []
        for scen, rows in lines_by_scenario.items():
            out.append(scen)
            out.append(fmt(head))
            out.append("-" * len(fmt(head)))
            out.extend(fmt(c) for c in rows)
            out.append("")
        reps = max((r.reps for r in self.rows), default=0)
        out.append(f"replications: {reps}; failed replications: {self.failures}")
        if has_struct:
            out.append("structure columns: mean(sd) across replications")
        return "\n".join(out) + "\n"

    def row(self, method: str, scenario: Optional[str] = None) -> BenchmarkRow:
        for r in self.rows:
            if r.method == method and (scenario is None or r.scenario == scenario):
                return r
        raise KeyError(method)

    @classmethod
    def from_csv(cls, text: str) -> "BenchmarkTable":
        rows = []
        failures = 0
        for rec in csv.DictReader(io.StringIO(text)):
            qs = None
            S = None
            if rec.get("q05"):
                qs = tuple(int(rec[f"q{q:02d}"]) for q in LEVELS)
                S = float(rec["S"])
            struct = sd = None
            if rec.get("NV"):
                struct = {k: float(rec[k]) for k in STRUCT_KEYS}
                sd = {k: float(rec[f"{k}_sd"]) for k in STRUCT_KEYS}
            failures = int(rec.get("failures") or 0)
            rows.append(BenchmarkRow(rec["scenario"], rec["method"], qs, S, struct, sd, int(rec.get("reps") or 0)))
        return cls(rows, failures)


# --------------------------------------------------------------------------
# running


@dataclass
class BenchConfig:
    """Settings for :func:`run_benchmark`.

    ``nu`` defaults to ``floor(n / log n)``. ``fit_structure`` defaults to
    True for example 4 only. ``workers > 1`` runs replications in worker
    processes; results do not depend on it.
    """

    screening: ScreeningConfig = field(default_factory=ScreeningConfig)
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    nu: Optional[int] = None
    fit_structure: Optional[bool] = None
    fit_methods: tuple = FIT_METHODS
    workers: int = 1


_REP_ERRORS = (ValueError, NumericalFailure, np.linalg.LinAlgError, FloatingPointError)


def run_replication(scenario: Scenario, rep: int, methods, seed: int, cfg: BenchConfig) -> list:
    """All records of one replication (raises on failure)."""
    data = gen_example(scenario, make_rng(seed, rep))
    nu = cfg.nu if cfg.nu is not None else default_d(scenario.n)
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScreeningWarning)
        for m in methods:
            s = compute_scores(m, data.X, data.y, cfg.screening)
            M = min_model_size(s, data.true_active)
            out.append(ReplicationRecord(rep, m, M, M <= nu))
    fit_structure = cfg.fit_structure if cfg.fit_structure is not None else scenario.example == 4
    if fit_structure and cfg.fit_methods:
        pcfg = PipelineConfig(cfg.screening, cfg.penalty, "NCRS")
        fits = fit_pipeline(data.X, data.y, pcfg, cfg.fit_methods)
        for name in cfg.fit_methods:
            metrics = structure_metrics(fits[name.upper()].fit, data)
            out.append(ReplicationRecord(rep, name.upper(), None, None, metrics))
    return out


def _guarded(args):
    scenario, rep, methods, seed, cfg = args
    try:
        return rep, run_replication(scenario, rep, methods, seed, cfg), None
    except _REP_ERRORS as exc:
        return rep, [], f"{type(exc).__name__}: {exc}"


def aggregate(records: Sequence[ReplicationRecord], scenario_label: str, methods, failed=()) -> BenchmarkTable:
    """Reduce replication records to one row per method (order-independent)."""
    rows = []
    names = list(methods) + [m for m in FIT_METHODS if any(r.method == m for r in records)]
    for m in names:
        recs = sorted((r for r in records if r.method == m), key=lambda r: r.rep_id)
        if not recs:
            continue
        row = BenchmarkRow(scenario_label, m, reps=len(recs))
        sizes = [r.min_model_size for r in recs if r.min_model_size is not None]
        if sizes:
            row.quantiles = quantiles(sizes)
            row.S = float(np.mean([bool(r.covered_at_nu) for r in recs if r.covered_at_nu is not None]))
        fits = [r.fit_metrics for r in recs if r.fit_metrics is not None]
        if fits:
            arr = np.array([[f[k] for k in STRUCT_KEYS] for f in fits], dtype=float)
            sd = arr.std(axis=0, ddof=1) if len(fits) > 1 else np.zeros(len(STRUCT_KEYS))
            row.structure = dict(zip(STRUCT_KEYS, arr.mean(axis=0).tolist()))
            row.structure_sd = dict(zip(STRUCT_KEYS, sd.tolist()))
        rows.append(row)
    return BenchmarkTable(rows, len(failed), tuple(sorted(failed)))


def run_benchmark(
    scenario: Scenario,
    methods: Sequence[str] = METHODS,
    reps: int = 100,
    seed: Optional[int] = None,
    cfg: Optional[BenchConfig] = None,
) -> BenchmarkTable:
    """Replicate ``scenario`` and aggregate M quantiles, S and structure metrics.

    Replication ``r`` draws from ``make_rng(seed, r)`` (``seed`` defaults
    to ``scenario.seed``). Replications that raise are excluded and counted.
    """
    if reps < 10:
        raise ValueError("reps must be at least 10")
    cfg = cfg or BenchConfig()
    seed = scenario.seed if seed is None else int(seed)
    methods = [m.upper().replace("-", "") for m in methods]
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown screening method {m!r}; choose from {METHODS}")
    tasks = [(scenario, r, methods, seed, cfg) for r in range(reps)]
    workers = max(1, int(cfg.workers))
    if workers == 1:
        results = [_guarded(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, os.cpu_count() or 1, reps)) as ex:
            results = list(ex.map(_guarded, tasks))
    records, failed = [], []
    for rep, recs, err in sorted(results, key=lambda t: t[0]):
        if err is not None:
            warnings.warn(f"replication {rep} failed: {err}", RuntimeWarning, stacklevel=2)
            failed.append(rep)
        records.extend(recs)
    return aggregate(records, scenario.label, methods, failed)


def merge_tables(tables: Sequence[BenchmarkTable]) -> BenchmarkTable:
    rows = [r for t in tables for r in t.rows]
    return BenchmarkTable(rows, sum(t.failures for t in tables))


def coverage_curve(scores_by_n: dict) -> dict:
    """Map ``n -> S`` and report whether S is nondecreasing in ``n``."""
    ns = sorted(scores_by_n)
    values = [scores_by_n[n] for n in ns]
    return {"n": ns, "S": values, "monotone": all(b >= a for a, b in zip(values, values[1:]))}

