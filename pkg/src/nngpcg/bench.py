"""Timing harness for the seven posterior solve strategies.

For every ``(n, delta2)`` setting one dataset and one stacked system are
built; each method is first checked against a reference solution and then
timed over ``replications`` sequential solves of the posterior-mean system.
Relative columns divide each method's total by the fastest ok total.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import os
import platform
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _backend
from .data_io import simulate_dataset
from .kernels import CovarianceKernel
from .nngp import nngp
from .posterior import DEFAULT_TOL, METHODS, assemble_stacked, canonical_method, solve_normal
from .rng import RngState
from .solvers import SolverConfig

GATE_TOL = 1e-6
STATUSES = ("ok", "timeout", "error")
PLOT_HEADER = ["method", "n", "delta2", "elapsed", "relative", "status"]
TABLE_HEADER = ["view", "n", "delta2", "method", "relative", "elapsed", "status", "replications"]
# preferred gate references, most trusted first
_REFERENCES = ("dense", "symbolic-cholesky")


@dataclass
class BenchConfig:
    sizes: list[int]
    delta2_grid: list[float]
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    replications: list[int] | int = 1
    m: int = 10
    phi: float = 7.0
    sigma2: float = 1.0
    timeout: float = 600.0
    seed: int = 0
    p: int = 2
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        self.methods = [canonical_method(x) for x in self.methods]
        if not self.methods:
            raise ValueError("at least one method is required")
        if not self.sizes or not self.delta2_grid:
            raise ValueError("sizes and delta2_grid must be non-empty")
        if any(int(n) < 2 for n in self.sizes):
            raise ValueError("every size must be at least 2")
        if any(not d > 0 for d in self.delta2_grid):
            raise ValueError("delta2 values must be positive")
        reps = self.replications
        reps = [reps] * len(self.sizes) if isinstance(reps, int) else list(reps)
        if len(reps) != len(self.sizes):
            raise ValueError("replications must be one count or one count per size")
        if any(r < 1 for r in reps):
            raise ValueError("replications must be at least 1")
        self.replications = [int(r) for r in reps]
        self.sizes = [int(n) for n in self.sizes]
        self.delta2_grid = [float(d) for d in self.delta2_grid]
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")
        if self.m < 1:
            raise ValueError("m must be at least 1")

    def reps_for(self, n: int) -> int:
        return self.replications[self.sizes.index(n)]


@dataclass
class BenchRow:
    method: str
    n: int
    delta2: float | None
    replications: int
    elapsed_total: float | None
    relative: float | None = None
    status: str = "ok"
    note: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}")


def default_grid() -> BenchConfig:
    return BenchConfig(
        sizes=[1000, 10000, 100000, 1000000],
        delta2_grid=[0.001, 0.01, 0.1, 1.0],
        methods=list(METHODS),
        replications=[10000, 1000, 100, 10],
        m=10,
        phi=7.0,
        timeout=600.0,
    )


def desk_grid() -> BenchConfig:
    """Desk-scale variant; the short timeout keeps the whole sweep within minutes."""
    return replace(default_grid(), sizes=[1000, 10000], replications=[100, 10], timeout=20.0)


def assign_relatives(rows: list[BenchRow]) -> list[BenchRow]:
    """Relative = elapsed / fastest ok elapsed within each (n, delta2) group."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.n, r.delta2), []).append(r)
    for grp in groups.values():
        ok = [r for r in grp if r.status == "ok" and r.elapsed_total is not None]
        best = min((r.elapsed_total for r in ok), default=None)
        ok_ids = {id(r) for r in ok}
        for r in grp:
            if id(r) in ok_ids:
                r.relative = 1.0 if r.elapsed_total == best else (r.elapsed_total / best if best > 0 else float("inf"))
            else:
                r.relative = None
    return rows


def _gate(sys, methods, cfg) -> dict:
    """Solve once per method; returns {method: (solution | None, error note)}."""
    out = {}
    for mth in methods:
        try:
            x, rep = solve_normal(sys, mth, cfg=cfg)
            note = "" if rep.converged else f"not converged after {rep.iterations} iterations"
            out[mth] = (x, note)
        except Exception as exc:  # recorded, never aborts the sweep
            out[mth] = (None, f"{type(exc).__name__}: {exc}")
    return out


def run_benchmark(cfg: BenchConfig, progress=None) -> list[BenchRow]:
    rows: list[BenchRow] = []
    kernel = CovarianceKernel(sigma2=cfg.sigma2, phi=cfg.phi)
    scfg = SolverConfig(tol=cfg.tol)
    beta = np.ones(cfg.p)
    root = RngState(cfg.seed)
    setting = 0
    for n in cfg.sizes:
        reps = cfg.reps_for(n)
        for d2 in cfg.delta2_grid:
            rng = root.spawn(setting)
            setting += 1
            ds, _ = simulate_dataset(n, cfg.p, kernel, beta, d2, cfg.m, rng)
            f = nngp(kernel, ds.locations, cfg.m)
            sys = assemble_stacked(ds.x[f.order], ds.y[f.order], f, d2)
            gate = _gate(sys, cfg.methods, scfg)
            ref_name = next((r for r in _REFERENCES if r in gate and gate[r][0] is not None), None)
            if ref_name is None:
                ref_name = next((mth for mth in cfg.methods if gate[mth][0] is not None), None)
            ref = gate[ref_name][0] if ref_name else None
            group = []
            for mth in cfg.methods:
                sol, note = gate[mth]
                if sol is None:
                    group.append(BenchRow(mth, n, d2, reps, None, status="error", note=note))
                    continue
                diff = float(np.max(np.abs(sol - ref))) if sol.size else 0.0
                if not diff <= GATE_TOL:
                    group.append(BenchRow(mth, n, d2, reps, None, status="error",
                                          note=f"failed correctness gate vs {ref_name}: max diff {diff:.3g}"))
                    continue
                total, status, done = 0.0, "ok", 0
                try:
                    for _ in range(reps):
                        _, rep = solve_normal(sys, mth, cfg=scfg)
                        total += rep.wall_time
                        done += 1
                        if total > cfg.timeout:
                            status = "timeout"
                            break
                except Exception as exc:
                    group.append(BenchRow(mth, n, d2, reps, None, status="error", note=f"{type(exc).__name__}: {exc}"))
                    continue
                if status == "timeout":
                    note = f"stopped after {done}/{reps} replications ({total:.3f} s)"
                group.append(BenchRow(mth, n, d2, reps, total if status == "ok" else None, status=status, note=note))
                if progress:
                    progress(group[-1])
            rows.extend(assign_relatives(group))
    return rows


def timeout_note(timeout: float) -> str:
    """Elapsed-cell text for a timed-out row, e.g. ``more than 10 mins``."""
    if timeout >= 60 and float(timeout) % 60 == 0:
        mins = int(timeout // 60)
        return f"more than {mins} min" + ("s" if mins != 1 else "")
    return f"more than {timeout:g} s"


def summed_rows(rows: list[BenchRow]) -> list[BenchRow]:
    """Per-method totals over the delta2 grid for each n (delta2 = None)."""
    out = []
    sizes = list(dict.fromkeys(r.n for r in rows))
    for n in sizes:
        sub = [r for r in rows if r.n == n]
        for mth in dict.fromkeys(r.method for r in sub):
            mine = [r for r in sub if r.method == mth]
            statuses = {r.status for r in mine}
            status = "error" if "error" in statuses else ("timeout" if "timeout" in statuses else "ok")
            total = sum(r.elapsed_total for r in mine) if status == "ok" else None
            note = "; ".join(r.note for r in mine if r.note)
            out.append(BenchRow(mth, n, None, mine[0].replications, total, status=status, note=note))
    return assign_relatives(out)


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.3f}"


def _cells(r: BenchRow, timeout: float | None) -> tuple[str, str]:
    if r.status == "ok":
        return _fmt(r.relative), _fmt(r.elapsed_total)
    if r.status == "timeout":
        return "", timeout_note(timeout) if timeout is not None else "timeout"
    return "", "error"


def machine_description() -> str:
    cpu = platform.processor() or platform.machine()
    return (f"{platform.platform()}; {cpu}; {os.cpu_count()} CPU(s); Python {platform.python_version()}; "
            f"numpy {np.__version__}; kernels backend {_backend.BACKEND}")


def _views(rows, view):
    if view not in ("per-delta2", "summed", "both"):
        raise ValueError("view must be per-delta2, summed or both")
    out = []
    if view in ("per-delta2", "both"):
        out.append(("per-delta2", rows))
    if view in ("summed", "both"):
        out.append(("delta2-summed", summed_rows(rows)))
    return out


def _groups(rows):
    keys = list(dict.fromkeys((r.n, r.delta2) for r in rows))
    return [(k, [r for r in rows if (r.n, r.delta2) == k]) for k in keys]


def emit_table(rows: list[BenchRow], fmt: str = "markdown", view: str = "both", timeout: float | None = None,
               header: bool = True, timestamp: str | None = None) -> str:
    """Render ``Method | Relative | Elapsed(s)`` tables, one per (n, delta2) or per n (summed over delta2)."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for label, vrows in _views(rows, view):
            for r in vrows:
                rel, el = _cells(r, timeout)
                w.writerow([label, r.n, "" if r.delta2 is None else repr(r.delta2), r.method, rel, el,
                            r.status, r.replications])
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError("fmt must be markdown or csv")
    lines = []
    if header:
        stamp = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        lines += ["# Solver benchmark", "", f"- machine: {machine_description()}", f"- timestamp: {stamp}"]
        if timeout is not None:
            lines.append(f"- timeout per method per setting: {timeout:g} s")
        lines.append("")
    for label, vrows in _views(rows, view):
        for (n, d2), grp in _groups(vrows):
            reps = grp[0].replications
            title = f"n = {n}, " + (f"delta2 = {d2:g}" if d2 is not None else "delta2 summed over grid")
            lines += [f"## {title} ({label}, {reps} replications)", "",
                      "| Method | Relative | Elapsed(s) |", "|---|---|---|"]
            for r in grp:
                rel, el = _cells(r, timeout)
                lines.append(f"| {r.method} | {rel} | {el} |")
            notes = [f"{r.method}: {r.note}" for r in grp if r.note]
            if notes:
                lines.append("")
                lines += [f"- {x}" for x in notes]
            lines.append("")
    return "\n".join(lines)


def parse_table_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def emit_plot_data(rows: list[BenchRow], delta2: float | None = None) -> str:
    """Long-format CSV for plotting; ``delta2`` filters to one noise level."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_HEADER)
    for r in rows:
        if delta2 is not None and r.delta2 != delta2:
            continue
        w.writerow([r.method, r.n, repr(r.delta2), _fmt(r.elapsed_total), _fmt(r.relative), r.status])
    return buf.getvalue()


def plot_files(rows: list[BenchRow]) -> dict[str, str]:
    """``{filename: csv}`` with one ``plot_delta<value>.csv`` per delta2."""
    return {f"plot_delta{d:g}.csv": emit_plot_data(rows, d) for d in dict.fromkeys(r.delta2 for r in rows)}


def write_outputs(rows: list[BenchRow], out_dir, timeout: float | None = None, stamp: str | None = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    now = _dt.datetime.now(_dt.timezone.utc)
    stamp = stamp or now.strftime("%Y%m%dT%H%M%SZ")
    iso = now.isoformat(timespec="seconds")
    written = []
    md = out / f"bench_{stamp}.md"
    md.write_text(emit_table(rows, "markdown", timeout=timeout, timestamp=iso), encoding="utf-8")
    cs = out / f"bench_{stamp}.csv"
    cs.write_text(emit_table(rows, "csv", timeout=timeout), encoding="utf-8")
    written += [md, cs]
    for name, text in plot_files(rows).items():
        p = out / name
        p.write_text(text, encoding="utf-8")
        written.append(p)
    return written

