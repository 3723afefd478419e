"""Repeated-run experiments, trace files, and summary tables.

One run produces a per-evaluation trace; an experiment repeats a method
``reps`` times with seeds ``base_seed + rep``, writes one trace CSV per
repetition, and aggregates best-valid-objective statistics at chosen
budget checkpoints.  Aggregates are computed from the written trace
files, and every float is serialized with ``repr``, so rerunning an
experiment (serially or with workers) reproduces the aggregate CSV
byte for byte.

Trace schema (one row per counted evaluation):

    rep,n,x1..xd,f,c1..cm,valid,best_valid_f,lambda1..lambdam,rho,k,decision

Repetitions that have not yet seen a strictly valid point contribute a
placeholder value to the aggregate cells (by default twice the worst
observed objective) and are counted in ``n_no_valid``.
"""

import glob
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .comparators import SannConfig, relaxed_best_curve, run_oic_random, \
    run_sann
from .optimizer import ProgressTrace, SearchConfig, TraceRow, optim_auglag
from .problems import external_blackbox, toy_problem

log = logging.getLogger(__name__)

METHODS = ("EY", "EI", "EY-nomax", "EI-nomax", "SANN", "OIC-random")

# experiment-level method ids use hyphens; SearchConfig variants underscores
_METHOD_VARIANT = {"EY": "EY", "EI": "EI", "EY-nomax": "EY_nomax",
                   "EI-nomax": "EI_nomax"}

_TRACE_NAME_RE = re.compile(r"^trace_(?P<method>.+)_rep(?P<rep>\d+)\.csv$")


def _fmt(v) -> str:
    return repr(float(v))


def _trace_header(dim: int, m: int) -> str:
    cols = (["rep", "n"] + [f"x{i + 1}" for i in range(dim)] + ["f"]
            + [f"c{j + 1}" for j in range(m)] + ["valid", "best_valid_f"]
            + [f"lambda{j + 1}" for j in range(m)] + ["rho", "k", "decision"])
    return ",".join(cols)


def write_trace(path, trace: ProgressTrace, rep: int):
    """Write one run's trace; floats round-trip exactly through repr."""
    lines = [_trace_header(trace.dim, trace.m)]
    for row in trace.rows:
        fields = ([str(rep), str(row.n)] + [_fmt(v) for v in row.x]
                  + [_fmt(row.f)] + [_fmt(v) for v in row.c]
                  + [str(int(row.valid)), _fmt(row.best_valid_f)]
                  + [_fmt(v) for v in row.lam]
                  + [_fmt(row.rho), str(row.k), row.decision])
        lines.append(",".join(fields))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace(path):
    """Read a trace CSV; returns (rep, ProgressTrace)."""
    with open(path, newline="") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty trace file")
    cols = lines[0].split(",")
    dim = sum(1 for c in cols if re.fullmatch(r"x\d+", c))
    m = sum(1 for c in cols if re.fullmatch(r"c\d+", c))
    if lines[0] != _trace_header(dim, m):
        raise ValueError(f"{path}: unrecognized trace header {lines[0]!r}")
    rep = None
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(cols):
            raise ValueError(f"{path}: ragged row {ln!r}")
        it = iter(parts)
        rep = int(next(it))
        n = int(next(it))
        x = np.array([float(next(it)) for _ in range(dim)])
        f = float(next(it))
        c = np.array([float(next(it)) for _ in range(m)])
        valid = bool(int(next(it)))
        best = float(next(it))
        lam = np.array([float(next(it)) for _ in range(m)])
        rho = float(next(it))
        k = int(next(it))
        decision = next(it)
        rows.append(TraceRow(n=n, x=x, f=f, c=c, valid=valid,
                             best_valid_f=best, lam=lam, rho=rho, k=k,
                             decision=decision))
    return rep, ProgressTrace(dim=dim, m=m, rows=rows)


@dataclass(frozen=True)
class SummaryTable:
    """Aggregate statistics of one method at budget checkpoints."""

    method: str
    checkpoints: tuple
    reps: int
    mean: np.ndarray
    q05: np.ndarray
    q95: np.ndarray
    mean_relaxed: np.ndarray
    n_no_valid: np.ndarray
    placeholder: float


def _at_checkpoint(values: np.ndarray, n: int) -> float:
    """Carry-forward lookup: value after min(n, len) evaluations."""
    return float(values[min(n, len(values)) - 1])


def summarize(traces, checkpoints, method: str = "",
              placeholder: Optional[float] = None,
              relaxed_tol: float = 1e-3) -> SummaryTable:
    """Aggregate best-valid-f over repetitions at each checkpoint.

    ``placeholder`` substitutes for repetitions with no (strictly or
    relaxed) valid point yet; defaults to twice the worst objective
    observed anywhere in the experiment.
    """
    checkpoints = tuple(int(n) for n in checkpoints)
    if not checkpoints:
        raise ValueError("missing checkpoints")
    if not traces:
        raise ValueError("no traces to summarize")
    if min(checkpoints) < 1:
        raise ValueError("checkpoints must be >= 1")
    strict = np.array([[_at_checkpoint(
        np.array([r.best_valid_f for r in t.rows]), n)
        for n in checkpoints] for t in traces])
    relaxed = np.array([[_at_checkpoint(relaxed_best_curve(t, relaxed_tol), n)
                         for n in checkpoints] for t in traces])
    if placeholder is None:
        worst = max(r.f for t in traces for r in t.rows)
        placeholder = 2.0 * worst if worst > 0.0 else worst + 1.0
    n_no_valid = np.sum(np.isnan(strict), axis=0).astype(int)
    if n_no_valid.any():
        log.warning("%s: %s repetitions without a valid point at "
                    "checkpoints %s; placeholder %r engaged",
                    method or "experiment", n_no_valid.tolist(),
                    list(checkpoints), placeholder)
    strict = np.where(np.isnan(strict), placeholder, strict)
    relaxed = np.where(np.isnan(relaxed), placeholder, relaxed)
    return SummaryTable(
        method=method, checkpoints=checkpoints, reps=len(traces),
        mean=strict.mean(axis=0),
        q05=np.quantile(strict, 0.05, axis=0),
        q95=np.quantile(strict, 0.95, axis=0),
        mean_relaxed=relaxed.mean(axis=0),
        n_no_valid=n_no_valid,
        placeholder=float(placeholder))


AGGREGATE_HEADER = ("method,n,reps,mean,q05,q95,mean_relaxed,"
                    "n_no_valid,placeholder")


def write_aggregate(path, tables):
    """Write aggregate rows for one or more methods, deterministically."""
    lines = [AGGREGATE_HEADER]
    for tbl in sorted(tables, key=lambda t: t.method):
        for i, n in enumerate(tbl.checkpoints):
            lines.append(",".join([
                tbl.method, str(n), str(tbl.reps), _fmt(tbl.mean[i]),
                _fmt(tbl.q05[i]), _fmt(tbl.q95[i]),
                _fmt(tbl.mean_relaxed[i]), str(int(tbl.n_no_valid[i])),
                _fmt(tbl.placeholder)]))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def format_tables(tables) -> str:
    """Human-readable rendering of summary tables."""
    out = []
    for tbl in tables:
        out.append(f"{tbl.method}  ({tbl.reps} repetitions, "
                   f"placeholder {tbl.placeholder:g})")
        out.append(f"  {'n':>6} {'mean':>12} {'q05':>12} {'q95':>12} "
                   f"{'relaxed':>12} {'no-valid':>8}")
        for i, n in enumerate(tbl.checkpoints):
            out.append(f"  {n:>6} {tbl.mean[i]:>12.6f} {tbl.q05[i]:>12.6f} "
                       f"{tbl.q95[i]:>12.6f} {tbl.mean_relaxed[i]:>12.6f} "
                       f"{int(tbl.n_no_valid[i]):>8}")
    return "\n".join(out)


@dataclass
class ExperimentSpec:
    """A repeated-run benchmark of one method on one problem."""

    method: str = "EI"
    reps: int = 100
    budget: int = 100
    base_seed: int = 0
    checkpoints: tuple = (25, 50, 100)
    out_dir: str = "results"
    problem: str = "toy"
    blackbox_cmd: Optional[str] = None
    dim: Optional[int] = None
    m: Optional[int] = None
    placeholder: Optional[float] = None
    workers: Optional[int] = None
    search: Optional[SearchConfig] = None
    sann: Optional[SannConfig] = None

    def validate(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; "
                             f"choose from {METHODS}")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        if self.budget < 1:
            raise ValueError("budget must be positive")
        if not self.checkpoints:
            raise ValueError("need at least one checkpoint")
        if any(n < 1 or n > self.budget for n in self.checkpoints):
            raise ValueError("checkpoints must lie in [1, budget]")
        if self.problem == "external":
            if not self.blackbox_cmd or not self.dim or self.m is None:
                raise ValueError("external problems need blackbox_cmd, "
                                 "dim, and m")
        elif self.problem != "toy":
            raise ValueError(f"unknown problem {self.problem!r}")


def make_problem(spec: ExperimentSpec):
    if spec.problem == "toy":
        return toy_problem()
    return external_blackbox(spec.blackbox_cmd, dim=spec.dim, m=spec.m)


def run_one(spec: ExperimentSpec, rep: int) -> ProgressTrace:
    """Run repetition ``rep`` (seed = base_seed + rep) of the experiment."""
    seed = spec.base_seed + rep
    with make_problem(spec) as problem:
        if spec.method in _METHOD_VARIANT:
            cfg = replace(spec.search or SearchConfig(),
                          variant=_METHOD_VARIANT[spec.method],
                          budget=spec.budget, seed=seed)
            return optim_auglag(problem, cfg)
        if spec.method == "SANN":
            cfg = replace(spec.sann or SannConfig(),
                          budget=spec.budget, seed=seed)
            return run_sann(problem, cfg)
        cfg = replace(spec.search or SearchConfig(),
                      budget=spec.budget, seed=seed)
        return run_oic_random(problem, cfg)


def trace_path(out_dir: str, method: str, rep: int) -> str:
    return os.path.join(out_dir, f"trace_{method}_rep{rep:03d}.csv")


def _write_one(spec: ExperimentSpec, rep: int) -> str:
    trace = run_one(spec, rep)
    path = trace_path(spec.out_dir, spec.method, rep)
    write_trace(path, trace, rep)
    return path


@dataclass
class ExperimentResult:
    table: SummaryTable
    trace_paths: list
    aggregate_path: str
    failures: list = field(default_factory=list)


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run all repetitions, write traces and the aggregate CSV.

    Repetitions are independent (seeded ``base_seed + rep``) and may run
    in worker processes; aggregates are computed from the written trace
    files, so the worker count cannot change any output.  Failed
    repetitions are skipped with a warning and reported in ``failures``.
    """
    spec.validate()
    os.makedirs(spec.out_dir, exist_ok=True)
    paths = []
    failures = []
    if spec.workers and spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futs = {rep: pool.submit(_write_one, spec, rep)
                    for rep in range(spec.reps)}
            for rep, fut in futs.items():
                try:
                    paths.append(fut.result())
                except Exception as exc:
                    failures.append((rep, exc))
    else:
        for rep in range(spec.reps):
            try:
                paths.append(_write_one(spec, rep))
            except Exception as exc:
                failures.append((rep, exc))
    for rep, exc in failures:
        log.warning("repetition %d failed: %r", rep, exc)
    if not paths:
        raise failures[0][1]
    failures = [(rep, repr(exc)) for rep, exc in failures]
    traces = [read_trace(p)[1] for p in paths]
    table = summarize(traces, spec.checkpoints, method=spec.method,
                      placeholder=spec.placeholder)
    agg = os.path.join(spec.out_dir, "aggregate.csv")
    write_aggregate(agg, [table])
    return ExperimentResult(table=table, trace_paths=paths,
                            aggregate_path=agg, failures=failures)


def collect_traces(sources):
    """Find trace files and group them by method name.

    ``sources``: directories, glob patterns, or file paths.  Returns
    {method: [(rep, path), ...]} sorted by repetition.
    """
    files = []
    for src in sources:
        if os.path.isdir(src):
            files.extend(sorted(glob.glob(os.path.join(src, "trace_*.csv"))))
        else:
            hits = sorted(glob.glob(src))
            if not hits:
                raise FileNotFoundError(f"no trace files match {src!r}")
            files.extend(hits)
    groups = {}
    for path in files:
        match = _TRACE_NAME_RE.match(os.path.basename(path))
        if not match:
            raise ValueError(f"{path}: file name does not follow "
                             f"trace_<method>_rep<NNN>.csv")
        groups.setdefault(match.group("method"), []).append(
            (int(match.group("rep")), path))
    if not groups:
        raise FileNotFoundError("no trace files found")
    return {k: sorted(v) for k, v in sorted(groups.items())}
