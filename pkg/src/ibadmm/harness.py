"""Seeded multi-restart sweeps over (method, beta, c), aggregation and output files."""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Iterable, NamedTuple

import numpy as np

from .admm import AdmmConfig, admm_run
from .ba import BaConfig, ba_run
from .bayat import bayat_run
from .errors import ValidationError
from .objective import ObjectiveParams
from .prob_core import JointXY
from .records import RECORD_FIELDS, IterationTrace, RunRecord

log = logging.getLogger(__name__)

METHODS = ("ba", "admm", "bayat")
# fixed codes (not list positions) so adding a method never moves another's seeds
METHOD_CODES = {"ba": 0, "admm": 1, "bayat": 2}
_ADMM_KEYS = {f.name for f in fields(AdmmConfig)} - {"params"}
_BA_KEYS = {f.name for f in fields(BaConfig)} - {"beta"}


def parse_beta_grid(text: str) -> list[float]:
    """``start:stop:step`` (both ends inclusive when step divides the range),
    a comma list, or a single value."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            start, stop, step = parts
            if step <= 0 or stop < start:
                raise ValidationError(f"bad grid {text!r}: need step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9))
            grid = [round(start + k * step, 12) for k in range(n + 1)]
        else:
            grid = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse grid {text!r}") from None
    if not grid or not all(math.isfinite(b) for b in grid):
        raise ValidationError(f"empty or non-finite grid {text!r}")
    return sorted(grid)


def derive_seed(base_seed: int, method: str, beta_index: int, c_index: int, restart: int) -> int:
    """Stable 64-bit per-run seed."""
    ss = np.random.SeedSequence([int(base_seed), METHOD_CODES[method], beta_index, c_index, restart])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SweepSpec:
    methods: tuple = ("ba", "admm")
    beta_grid: tuple = tuple(parse_beta_grid("1:10:0.5"))
    c_values: tuple = (98.0,)
    omega: float = 4.0
    restarts: int = 100
    base_seed: int = 0
    overrides: dict = field(default_factory=dict)
    nz: int | None = None
    trace_stride: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "beta_grid", tuple(float(b) for b in self.beta_grid))
        object.__setattr__(self, "c_values", tuple(float(c) for c in self.c_values))
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods or len(set(self.methods)) != len(self.methods):
            raise ValidationError(f"methods must be distinct members of {METHODS}, got {self.methods}")
        if not self.beta_grid or list(self.beta_grid) != sorted(self.beta_grid):
            raise ValidationError("beta_grid must be non-empty and sorted")
        if any(b < 0 for b in self.beta_grid):
            raise ValidationError("beta values must be >= 0")
        if not self.c_values or any(c <= 0 for c in self.c_values):
            raise ValidationError("c values must be > 0")
        if self.omega < 0:
            raise ValidationError("omega must be >= 0")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if not 0 <= int(self.base_seed) < 2**64:
            raise ValidationError("base_seed must be an unsigned 64-bit integer")
        if self.workers < 1 or self.trace_stride < 0:
            raise ValidationError("workers must be >= 1 and trace_stride >= 0")
        for m, ov in self.overrides.items():
            allowed = _BA_KEYS if m == "ba" else _ADMM_KEYS if m in METHODS else None
            if allowed is None:
                raise ValidationError(f"override for unknown method {m!r}")
            extra = set(ov) - allowed
            if extra:
                raise ValidationError(f"unknown {m} override keys: {sorted(extra)}")

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepSpec":
        doc = dict(doc)
        if "beta_grid" in doc and isinstance(doc["beta_grid"], str):
            doc["beta_grid"] = parse_beta_grid(doc["beta_grid"])
        if "methods" in doc and isinstance(doc["methods"], str):
            doc["methods"] = [m.strip() for m in doc["methods"].split(",")]
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ValidationError(f"unknown sweep spec keys: {sorted(extra)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ValidationError(str(exc)) from None

    def config_for(self, method: str, beta: float, c: float):
        ov = dict(self.overrides.get(method, {}))
        if method == "ba":
            return BaConfig(beta=beta, **ov)
        return AdmmConfig(ObjectiveParams(beta, c, self.omega), **ov)


class _Task(NamedTuple):
    method: str
    beta: float
    c: float
    omega: float
    seed: int
    config: object
    nz: int | None
    trace_stride: int
    keep_state: bool


def _tasks(spec: SweepSpec, keep_state: bool) -> list[_Task]:
    out = []
    for method in spec.methods:
        for bi, beta in enumerate(spec.beta_grid):
            for ci, c in enumerate(spec.c_values):
                cfg = spec.config_for(method, beta, c)
                for r in range(spec.restarts):
                    seed = derive_seed(spec.base_seed, method, bi, ci, r)
                    out.append(_Task(method, beta, c, spec.omega, seed, cfg, spec.nz, spec.trace_stride,
                                     keep_state))
    return out


def _execute(joint: JointXY, task: _Task) -> tuple[RunRecord, IterationTrace | None]:
    try:
        if task.method == "ba":
            rec, trace = ba_run(joint, task.config, task.seed, task.nz), None
            # BA has no penalty; label it with the cell it was run for
            rec.c, rec.omega = task.c, task.omega
        elif task.method == "admm":
            rec, trace = admm_run(joint, task.config, task.seed, task.nz, task.trace_stride)
        else:
            rec, trace = bayat_run(joint, task.config, task.seed, task.nz, task.trace_stride)
    except Exception as exc:  # a single bad run must not abort the sweep
        nan = float("nan")
        rec = RunRecord(task.method, task.beta, task.c, task.omega, task.seed, False, 0,
                        nan, nan, nan, nan, error=f"{type(exc).__name__}: {exc}")
        trace = None
    if not task.keep_state:
        rec.state = {}
    return rec, trace


def _execute_packed(args):
    return _execute(*args)


def _sort_key(rec: RunRecord):
    return (METHODS.index(rec.method), rec.beta, rec.c, rec.seed)


@dataclass
class SweepResult:
    records: list
    traces: dict = field(default_factory=dict)   # (method, beta, c, seed) -> IterationTrace

    def trace_lines(self) -> list[str]:
        lines = []
        for key in sorted(self.traces, key=lambda k: (METHODS.index(k[0]),) + k[1:]):
            m, b, c, s = key
            lines.extend(self.traces[key].jsonl_lines(method=m, beta=b, c=c, seed=s))
        return lines


def run_sweep(joint: JointXY, spec: SweepSpec, timing: bool = True,
              keep_state: bool = False) -> SweepResult:
    """Run every (method, beta, c, restart) cell.

    With ``timing=False`` the ``cpu_ms`` column is blanked to NaN, which makes
    the output a pure function of the inputs.  ``keep_state`` retains each
    run's final iterate on its record.
    """
    tasks = _tasks(spec, keep_state)
    if spec.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_execute_packed, [(joint, t) for t in tasks], chunksize=8))
    else:
        results = [_execute(joint, t) for t in tasks]
    records, traces = [], {}
    for rec, trace in results:
        if rec.failed:
            log.warning("run failed: %s beta=%g c=%g seed=%d: %s",
                        rec.method, rec.beta, rec.c, rec.seed, rec.error)
        if not timing:
            rec.cpu_ms = float("nan")
        records.append(rec)
        if trace is not None:
            traces[(rec.method, rec.beta, rec.c, rec.seed)] = trace
    records.sort(key=_sort_key)
    return SweepResult(records, traces)


class CellSummary(NamedTuple):
    runs: int
    convergence_pct: float
    mean_cpu_ms: float
    best_I_yz: float
    best_I_xz: float
    pareto_points: list


def pareto_points(points: Iterable[tuple[float, float]], bin_width: float = 0.01) -> list:
    """Per ``I_xz`` bin the point with the largest ``I_yz`` (ties: smaller ``I_xz``)."""
    best = {}
    for ixz, iyz in points:
        k = int(math.floor(ixz / bin_width))
        cur = best.get(k)
        if cur is None or (iyz, -ixz) > (cur[1], -cur[0]):
            best[k] = (ixz, iyz)
    return [best[k] for k in sorted(best)]


def aggregate(records) -> dict:
    """Per ``(method, beta, c)``: convergence percentage, mean CPU time over all
    runs, best converged ``I_yz`` (with its ``I_xz``) and Pareto points."""
    records = list(records)
    if not records:
        raise ValidationError("cannot aggregate an empty record list")
    cells = {}
    for r in records:
        cells.setdefault((r.method, r.beta, r.c), []).append(r)
    out = {}
    for key in sorted(cells, key=lambda k: (METHODS.index(k[0]) if k[0] in METHODS else len(METHODS),) + k):
        rs = cells[key]
        conv = [r for r in rs if r.converged]
        cpu = [r.cpu_ms for r in rs if not math.isnan(r.cpu_ms)]
        pts = sorted((r.I_xz, r.I_yz) for r in conv)
        if pts:
            bx, by = max(pts, key=lambda p: (p[1], -p[0]))
        else:
            bx = by = float("nan")
        out[key] = CellSummary(
            runs=len(rs),
            convergence_pct=100.0 * len(conv) / len(rs),
            mean_cpu_ms=float(math.fsum(cpu) / len(cpu)) if cpu else float("nan"),
            best_I_yz=by, best_I_xz=bx,
            pareto_points=pareto_points(pts))
    return out


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        w.writerow(r.to_row())
    return buf.getvalue()


def plot_data_csv(records) -> str:
    """Information-plane points of the converged runs."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("method", "beta", "I_xz", "I_yz"))
    for r in records:
        if r.converged:
            w.writerow((r.method, repr(float(r.beta)), repr(float(r.I_xz)), repr(float(r.I_yz))))
    return buf.getvalue()


def write_text(path, text: str) -> None:
    path = os.fspath(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_records_csv(path) -> list[RunRecord]:
    """Inverse of :func:`records_csv` (arrays and error strings are not stored)."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != RECORD_FIELDS:
        raise ValidationError(f"{path}: header does not match {RECORD_FIELDS}")
    out = []
    for row in rows[1:]:
        d = dict(zip(RECORD_FIELDS, row))
        out.append(RunRecord(
            method=d["method"], beta=float(d["beta"]), c=float(d["c"]), omega=float(d["omega"]),
            seed=int(d["seed"]), converged=d["converged"] == "true", iterations=int(d["iterations"]),
            I_xz=float(d["I_xz"]), I_yz=float(d["I_yz"]), residual=float(d["residual"]),
            cpu_ms=float(d["cpu_ms"])))
    return out


def summary_json(summary: dict) -> list[dict]:
    def num(v):
        return None if isinstance(v, float) and math.isnan(v) else v
    return [{"method": m, "beta": b, "c": c, "runs": s.runs,
             "convergence_pct": s.convergence_pct, "mean_cpu_ms": num(s.mean_cpu_ms),
             "best_I_yz": num(s.best_I_yz), "best_I_xz": num(s.best_I_xz),
             "pareto_points": [list(p) for p in s.pareto_points]}
            for (m, b, c), s in summary.items()]


__all__ = ["METHODS", "SweepSpec", "SweepResult", "CellSummary", "parse_beta_grid", "derive_seed",
           "run_sweep", "aggregate", "pareto_points", "records_csv", "plot_data_csv",
           "read_records_csv", "write_text", "summary_json"]
