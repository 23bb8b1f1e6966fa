"""Command-line front end: ``addscreen {screen,fit,simulate,bench,report}``.

Exit codes: 0 when the requested output was written, 1 on a runtime
failure, 2 on a usage error (bad flags, missing input file).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .datagen import ERROR_LAWS, Scenario, gen_example, make_rng
from .harness import BenchConfig, BenchmarkTable, merge_tables, run_benchmark
from .screening import METHODS, ScreeningConfig, ScreeningWarning, compute_scores, default_d, select_active
from .solver import LINEAR, ZERO, PenaltyConfig, PipelineConfig, component_values, fit_pipeline, loocv_pe
from .splines import DEFAULT_K, DEFAULT_ORDER

CURVE_POINTS = 100
MIN_ROWS = 10


class UsageError(Exception):
    """Bad invocation; maps to exit code 2."""


class DataError(ValueError):
    """Malformed input data."""


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    names: list
    y_name: str = "y"


@dataclass
class RunConfig:
    subcommand: str
    output_path: str
    input_path: Optional[str] = None
    methods: list = field(default_factory=lambda: ["NCRS"])
    scenario: Optional[Scenario] = None
    seed: int = 0
    screening: ScreeningConfig = field(default_factory=ScreeningConfig)
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    y_col: str = "y"
    top_d_given: bool = False
    sam: bool = False
    loocv: bool = False
    reps: int = 100
    threads: int = 1
    inputs: list = field(default_factory=list)
    figures: bool = True
    nu: Optional[int] = None


# --------------------------------------------------------------------------
# CSV I/O


def read_csv(path: str, y_col: str = "y", min_rows: int = MIN_ROWS) -> Dataset:
    """Load a header-row CSV with a response column and numeric covariates.

    Rows are numbered as in the file, so the header is row 1 and the first
    data row is row 2.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if y_col not in header:
            raise DataError(f"{path}: no response column {y_col!r} in header")
        yi = header.index(y_col)
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(rec)} fields, expected {len(header)}")
            vals = []
            for name, cell in zip(header, rec):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: non-numeric value {cell!r} at row {lineno}, column {name!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: non-finite value {cell!r} at row {lineno}, column {name!r}")
                vals.append(v)
            rows.append(vals)
    if len(rows) < min_rows:
        raise DataError(f"{path}: need at least {min_rows} data rows, found {len(rows)}")
    data = np.array(rows, dtype=float)
    names = [h for i, h in enumerate(header) if i != yi]
    X = np.delete(data, yi, axis=1)
    return Dataset(X, data[:, yi], names, y_col)


def _format_row(values):
    return [repr(float(v)) for v in values]


def write_csv(path: str, ds: Dataset) -> None:
    """Write covariates then the response; floats use ``repr`` so they round-trip."""
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ds.names) + [ds.y_name])
        for xi, yi in zip(ds.X, ds.y):
            w.writerow(_format_row(list(xi) + [yi]))

    atomic_write(path, emit)


def atomic_write(path: str, emit) -> None:
    """Write through a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            emit(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_text(path: str, text: str) -> None:
    atomic_write(path, lambda fh: fh.write(text))


# --------------------------------------------------------------------------
# argument parsing


def _positive_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _float(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {s!r}")
    return v


def _method(s):
    key = s.upper().replace("-", "").replace("_", "")
    if key not in METHODS:
        raise argparse.ArgumentTypeError(f"unknown method {s!r}; choose from {', '.join(METHODS)}")
    return key


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_screen_flags(p):
    p.add_argument("--method", type=_method, default="NCRS", help="screening rule (default NCRS)")
    p.add_argument("--top-d", type=_positive_int, help="keep the d highest scores")
    p.add_argument("--threshold-c", type=_float, help="keep scores >= c * n^-alpha")
    p.add_argument("--threshold-alpha", type=_float, help="alpha in [0, 1/2) for the threshold rule")
    p.add_argument("--k", type=_positive_int, default=DEFAULT_K, help="spline basis size K (default 6)")
    p.add_argument("--order", type=_positive_int, default=DEFAULT_ORDER, help="spline order (default 4, cubic)")


def _add_scenario_flags(p):
    p.add_argument("--example", type=int, choices=(1, 2, 3, 4), required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--p", type=_positive_int, required=True)
    p.add_argument("--signal-c", type=_float, help="signal constant (example 1)")
    p.add_argument("--sigma", type=_float, help="noise scale")
    p.add_argument("--error-law", choices=ERROR_LAWS, default="normal")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="addscreen", description="Nonparametric screening and partially linear additive fits.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--threads", type=_positive_int, help="worker cap (env ADDSCREEN_THREADS)")
    common.add_argument("--output", "-o", required=True, help="output file")

    p = sub.add_parser("screen", parents=[common], help="rank covariates by a screening rule")
    p.add_argument("--input", required=True, help="CSV with a header row")
    p.add_argument("--y-col", default="y")
    _add_screen_flags(p)

    p = sub.add_parser("fit", parents=[common], help="screen, then fit the penalized additive model")
    p.add_argument("--input", required=True)
    p.add_argument("--y-col", default="y")
    _add_screen_flags(p)
    p.add_argument("--sam", action="store_true", help="single-penalty variant (no linear components)")
    p.add_argument("--loocv", action="store_true", help="also report leave-one-out prediction error")
    p.add_argument("--no-figures", action="store_true", help="skip the component figure")

    p = sub.add_parser("simulate", parents=[common], help="write one simulated dataset as CSV")
    _add_scenario_flags(p)

    p = sub.add_parser("bench", parents=[common], help="replicated screening benchmark")
    _add_scenario_flags(p)
    p.add_argument("--reps", type=_positive_int, default=100)
    p.add_argument("--methods", type=_method, nargs="+", default=list(METHODS))
    p.add_argument("--k", type=_positive_int, default=DEFAULT_K)
    p.add_argument("--order", type=_positive_int, default=DEFAULT_ORDER)
    p.add_argument("--top-d", type=_positive_int, help="coverage threshold nu (default floor(n/log n))")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("report", parents=[common], help="re-render saved benchmark CSVs or fit JSON")
    p.add_argument("--input", required=True, nargs="+")
    p.add_argument("--no-figures", action="store_true")
    return parser


def _threads(value) -> int:
    if value is not None:
        return value
    env = os.environ.get("ADDSCREEN_THREADS")
    if env is None:
        return 1
    try:
        v = int(env)
    except ValueError:
        raise UsageError(f"ADDSCREEN_THREADS must be a positive integer, got {env!r}") from None
    if v < 1:
        raise UsageError(f"ADDSCREEN_THREADS must be a positive integer, got {env!r}")
    return v


def _scenario(args) -> Scenario:
    try:
        return Scenario(args.example, args.n, args.p, args.signal_c, args.sigma, args.error_law, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _screening_cfg(args) -> ScreeningConfig:
    if args.threshold_c is not None and args.top_d is not None:
        raise UsageError("--top-d and --threshold-c are mutually exclusive")
    if args.threshold_alpha is not None and args.threshold_c is None:
        raise UsageError("--threshold-alpha requires --threshold-c")
    try:
        return ScreeningConfig(
            d=args.top_d,
            threshold_c=args.threshold_c,
            threshold_alpha=args.threshold_alpha,
            K=args.k,
            order=args.order,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(args.subcommand, args.output, seed=args.seed, threads=_threads(args.threads))
    out_dir = os.path.dirname(os.path.abspath(args.output))
    if not os.path.isdir(out_dir):
        raise UsageError(f"output directory does not exist: {out_dir}")
    if args.subcommand in ("screen", "fit"):
        if not os.path.isfile(args.input):
            raise UsageError(f"input file not found: {args.input}")
        cfg.input_path = args.input
        cfg.y_col = args.y_col
        cfg.methods = [args.method]
        cfg.screening = _screening_cfg(args)
        cfg.top_d_given = args.top_d is not None or args.threshold_c is not None
        if args.subcommand == "fit":
            cfg.sam = args.sam
            cfg.loocv = args.loocv
            cfg.figures = not args.no_figures
    elif args.subcommand in ("simulate", "bench"):
        cfg.scenario = _scenario(args)
        if args.subcommand == "bench":
            if args.reps < 10:
                raise UsageError("--reps must be at least 10")
            cfg.reps = args.reps
            cfg.methods = list(dict.fromkeys(args.methods))
            cfg.screening = ScreeningConfig(K=args.k, order=args.order)
            cfg.top_d_given = args.top_d is not None
            cfg.nu = args.top_d
            cfg.figures = not args.no_figures
    else:
        for path in args.input:
            if not os.path.isfile(path):
                raise UsageError(f"input file not found: {path}")
        cfg.inputs = list(args.input)
        cfg.figures = not args.no_figures
    return cfg


# --------------------------------------------------------------------------
# subcommands


def _sidecar(path: str, suffix: str) -> str:
    root, _ = os.path.splitext(path)
    return root + suffix


def _real_data_screening(cfg: RunConfig, n: int) -> ScreeningConfig:
    """Default screening size: 2 floor(n/log n) below n = 100, else floor(n/log n)."""
    sc = cfg.screening
    if cfg.top_d_given:
        return sc
    d = 2 * default_d(n) if n < 100 else default_d(n)
    return ScreeningConfig(d=d, K=sc.K, order=sc.order, centered=sc.centered)


def _run_screen(cfg: RunConfig, written: list) -> None:
    ds = read_csv(cfg.input_path, cfg.y_col)
    sc = _real_data_screening(cfg, ds.y.size)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScreeningWarning)
        scores = compute_scores(cfg.methods[0], ds.X, ds.y, sc)
        active = select_active(scores, sc)
    keep = set(active.indices.tolist())

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "index", "name", "score", "selected"])
        for rank, j in enumerate(scores.ranking(), start=1):
            w.writerow([rank, int(j), ds.names[j], repr(float(scores.scores[j])), int(j in keep)])

    atomic_write(cfg.output_path, emit)
    written.append(cfg.output_path)


def fit_to_json(fit, names, loocv=None) -> dict:
    comps = []
    for j, comp in enumerate(fit.classification):
        col = int(fit.columns[j]) if fit.columns is not None else j
        entry = {"name": names[col], "class": comp.kind}
        if comp.kind == LINEAR:
            entry["slope"] = comp.slope
        if comp.kind != ZERO and fit.bases[j] is not None:
            a, b = fit.bases[j].boundary
            xs = np.linspace(a, b, CURVE_POINTS)
            entry["curve"] = {"x": xs.tolist(), "y": component_values(fit, j, xs).tolist()}
        comps.append(entry)
    doc = {
        "intercept": float(fit.intercept),
        "lambda1": float(fit.lambda1),
        "lambda2": float(fit.lambda2),
        "ebic": float(fit.ebic),
        "components": comps,
    }
    if loocv is not None:
        doc["loocv_pe"] = loocv
    return doc


def _run_fit(cfg: RunConfig, written: list) -> None:
    ds = read_csv(cfg.input_path, cfg.y_col)
    pcfg = PipelineConfig(_real_data_screening(cfg, ds.y.size), cfg.penalty, cfg.methods[0])
    variant = "SAM" if cfg.sam else "PLAM"
    fit = fit_pipeline(ds.X, ds.y, pcfg, (variant,))[variant].fit
    pe = None
    if cfg.loocv:
        res = loocv_pe(ds.X, ds.y, pcfg, sam=cfg.sam)
        if res.flagged:
            print(f"warning: {len(res.failed)} LOOCV fold(s) failed and were skipped", file=sys.stderr)
        pe = res.pe
    doc = fit_to_json(fit, ds.names, pe)
    _write_text(cfg.output_path, json.dumps(doc, indent=2) + "\n")
    written.append(cfg.output_path)
    if cfg.figures:
        from .plotting import plot_components

        _save_figure(plot_components, doc, _sidecar(cfg.output_path, "_components.png"), written)


def _save_figure(plotter, obj, final: str, written: list) -> None:
    root, ext = os.path.splitext(final)
    tmp = f"{root}.tmp{ext}"
    try:
        plotter(obj, tmp)
        os.replace(tmp, final)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    written.append(final)


def _run_simulate(cfg: RunConfig, written: list) -> None:
    sc = cfg.scenario
    data = gen_example(sc, make_rng(cfg.seed))
    names = [f"x{j + 1}" for j in range(sc.p)]
    write_csv(cfg.output_path, Dataset(data.X, data.y, names))
    written.append(cfg.output_path)


def _render(table: BenchmarkTable, csv_path: str, figures: bool, written: list) -> None:
    text_path = _sidecar(csv_path, ".txt")
    _write_text(text_path, table.to_text())
    written.append(text_path)
    if figures:
        from .plotting import plot_benchmark

        _save_figure(plot_benchmark, table, _sidecar(csv_path, ".png"), written)


def _run_bench(cfg: RunConfig, written: list) -> None:
    bcfg = BenchConfig(screening=cfg.screening, penalty=cfg.penalty, nu=cfg.nu, workers=cfg.threads)
    table = run_benchmark(cfg.scenario, cfg.methods, cfg.reps, cfg.seed, bcfg)
    _write_text(cfg.output_path, table.to_csv())
    written.append(cfg.output_path)
    _render(table, cfg.output_path, cfg.figures, written)


def _run_report(cfg: RunConfig, written: list) -> None:
    tables, fits = [], []
    for path in cfg.inputs:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        if path.lower().endswith(".json"):
            fits.append((path, json.loads(text)))
        else:
            tables.append(BenchmarkTable.from_csv(text))
    if tables:
        table = merge_tables(tables)
        _write_text(cfg.output_path, table.to_csv())
        written.append(cfg.output_path)
        _render(table, cfg.output_path, cfg.figures, written)
    else:
        lines = []
        for path, doc in fits:
            lines.append(f"{path}: intercept {doc['intercept']:.6g}, eBIC {doc['ebic']:.6g}")
            for c in doc["components"]:
                if c["class"] != ZERO:
                    extra = f" slope {c['slope']:.6g}" if "slope" in c else ""
                    lines.append(f"  {c['name']}: {c['class']}{extra}")
        _write_text(cfg.output_path, "\n".join(lines) + "\n")
        written.append(cfg.output_path)
    if cfg.figures and fits:
        from .plotting import plot_components

        for i, (_, doc) in enumerate(fits):
            _save_figure(plot_components, doc, _sidecar(cfg.output_path, f"_fit{i + 1}.png"), written)


_RUNNERS = {
    "screen": _run_screen,
    "fit": _run_fit,
    "simulate": _run_simulate,
    "bench": _run_bench,
    "report": _run_report,
}


def run(cfg: RunConfig) -> int:
    written: list = []
    try:
        _RUNNERS[cfg.subcommand](cfg, written)
    except (ValueError, RuntimeError, OSError, KeyError, np.linalg.LinAlgError) as exc:
        for path in written:
            if os.path.exists(path):
                os.unlink(path)
        print(f"addscreen {cfg.subcommand}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
