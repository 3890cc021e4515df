"""Experiment matrix runner, result rows, CSV files and summary tables.

A matrix is the cross product node totals x protocols x seeds applied to a
base scenario.  Cells are independent, so they may run in worker processes
(``WDTN_WORKERS``); results are always returned in cell order, never in
completion order.
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import ConfigError, Protocol, ScenarioConfig
from .detector import DetectionReport
from .engine import run_simulation

WORKERS_ENV = "WDTN_WORKERS"
DEFAULT_NODE_TOTALS = (58, 64, 70, 76)
DEFAULT_PROTOCOLS = (Protocol.FIRST_CONTACT, Protocol.EPIDEMIC, Protocol.PROPHET, Protocol.SPRAY_AND_WAIT)
DEFAULT_SEEDS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class ExperimentMatrix:
    node_totals: Sequence[int] = DEFAULT_NODE_TOTALS
    protocols: Sequence[Protocol] = DEFAULT_PROTOCOLS
    seeds: Sequence[int] = DEFAULT_SEEDS
    base_config: ScenarioConfig = field(default_factory=ScenarioConfig)

    def __post_init__(self):
        object.__setattr__(self, "node_totals", tuple(int(n) for n in self.node_totals))
        object.__setattr__(self, "protocols", tuple(Protocol.parse(p) for p in self.protocols))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def cells(self) -> list[ScenarioConfig]:
        """One validated config per cell, ordered total -> protocol -> seed.

        Raises :class:`ConfigError` if the matrix is empty or any cell is invalid.
        """
        for name in ("node_totals", "protocols", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"matrix.{name}", "must not be empty")
        out = []
        for total in self.node_totals:
            for proto in self.protocols:
                for seed in self.seeds:
                    cfg = replace(self.base_config, routing_protocol=proto, rng_seed=seed)
                    out.append(cfg.with_total_nodes(total).validate())
        return out


@dataclass
class ResultRow:
    node_total: int
    protocol: Protocol
    seed: int
    preset_pairs: int
    true_detections: int
    false_detections: int
    success_rate: float
    false_alarm_rate: float
    mean_detection_time: float | None
    wall_time: float
    timeline: list[tuple[float, int, int]] = field(default_factory=list)

    @classmethod
    def from_report(cls, cfg: ScenarioConfig, report: DetectionReport, wall_time: float) -> ResultRow:
        return cls(
            cfg.num_nodes, cfg.routing_protocol, cfg.rng_seed, report.preset_pairs,
            report.true_detections, report.false_detections,
            report.detection_success_rate, report.false_alarm_rate,
            report.mean_detection_time, wall_time, list(report.timeline),
        )

    def outcome(self) -> tuple:
        """Everything except wall time; equal for reruns of the same cell."""
        return tuple(getattr(self, f.name) for f in fields(self) if f.name != "wall_time")

    def success_series(self) -> list[tuple[float, float]]:
        if not self.preset_pairs:
            return [(t, 0.0) for t, _, _ in self.timeline]
        return [(t, 100.0 * n / self.preset_pairs) for t, n, _ in self.timeline]


def run_cell(cfg: ScenarioConfig, inspect: Callable | None = None, trace_dir: str | None = None):
    """Run one cell; returns ``(row, inspect(trace, report) or None)``."""
    t0 = time.perf_counter()
    trace, report = run_simulation(cfg)
    row = ResultRow.from_report(cfg, report, time.perf_counter() - t0)
    if trace_dir is not None:
        trace.save(Path(trace_dir) / cell_filename(cfg))
    return row, (inspect(trace, report) if inspect else None)


def cell_filename(cfg: ScenarioConfig) -> str:
    return f"trace_{cfg.routing_protocol.value}_{cfg.num_nodes}_{cfg.rng_seed}.txt"


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, workers)


def sweep(matrix: ExperimentMatrix, inspect: Callable | None = None, workers: int | None = None,
          trace_dir: str | None = None, progress: Callable | None = None) -> list[tuple[ResultRow, object]]:
    """Run every cell and return ``(row, inspected)`` in cell order.

    ``inspect`` must be picklable (a module-level function) when running with
    more than one worker.
    """
    cells = matrix.cells()
    n = worker_count(workers)
    if trace_dir is not None:
        Path(trace_dir).mkdir(parents=True, exist_ok=True)
    results: list = [None] * len(cells)
    if n == 1:
        for i, cfg in enumerate(cells):
            results[i] = run_cell(cfg, inspect, trace_dir)
            if progress:
                progress(results[i][0])
        return results
    with ProcessPoolExecutor(max_workers=n) as pool:
        futures = {pool.submit(run_cell, cfg, inspect, trace_dir): i for i, cfg in enumerate(cells)}
        for fut, i in futures.items():
            results[i] = fut.result()
            if progress:
                progress(results[i][0])
    return results


def run_matrix(matrix: ExperimentMatrix, workers: int | None = None, trace_dir: str | None = None,
               progress: Callable | None = None) -> list[ResultRow]:
    return [row for row, _ in sweep(matrix, None, workers, trace_dir, progress)]


# --- CSV ----------------------------------------------------------------------

CSV_COLUMNS = (
    "node_total", "protocol", "seed", "preset_pairs", "true_detections", "false_detections",
    "success_rate", "false_alarm_rate", "mean_detection_time", "wall_time", "timeline",
)


def _fmt_timeline(tl) -> str:
    return ";".join(f"{t!r}:{nt}:{nf}" for t, nt, nf in tl)


def _parse_timeline(text: str) -> list[tuple[float, int, int]]:
    out = []
    for item in filter(None, text.split(";")):
        t, nt, nf = item.split(":")
        out.append((float(t), int(nt), int(nf)))
    return out


def write_csv(rows: Sequence[ResultRow], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([
            r.node_total, r.protocol.value, r.seed, r.preset_pairs, r.true_detections, r.false_detections,
            repr(r.success_rate), repr(r.false_alarm_rate),
            "" if r.mean_detection_time is None else repr(r.mean_detection_time),
            repr(r.wall_time), _fmt_timeline(r.timeline),
        ])


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


def read_csv(text: str) -> list[ResultRow]:
    """Inverse of :func:`rows_to_csv`; raises ValueError on a malformed file."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header: {reader.fieldnames}")
    rows = []
    for rec in reader:
        mdt = rec["mean_detection_time"]
        rows.append(ResultRow(
            int(rec["node_total"]), Protocol.parse(rec["protocol"]), int(rec["seed"]),
            int(rec["preset_pairs"]), int(rec["true_detections"]), int(rec["false_detections"]),
            float(rec["success_rate"]), float(rec["false_alarm_rate"]),
            float(mdt) if mdt else None, float(rec["wall_time"]), _parse_timeline(rec["timeline"]),
        ))
    return rows


# --- summaries ----------------------------------------------------------------

METRICS = ("true_detections", "false_detections", "success_rate", "false_alarm_rate",
           "mean_detection_time", "wall_time")


@dataclass
class CellSummary:
    protocol: Protocol
    node_total: int
    runs: int
    mean: dict[str, float | None]
    std: dict[str, float | None]


@dataclass
class SummaryTables:
    cells: dict[tuple[Protocol, int], CellSummary]
    series: dict[tuple[Protocol, int, int], list[tuple[float, float]]]

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["protocol", "node_total", "runs"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "std")])
        for (proto, total), c in sorted(self.cells.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
            vals = []
            for m in METRICS:
                for v in (c.mean[m], c.std[m]):
                    vals.append("" if v is None else f"{v:.6g}")
            w.writerow([proto.value, total, c.runs] + vals)
        return buf.getvalue()

    def series_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["protocol", "node_total", "seed", "time", "success_rate"])
        for (proto, total, seed), pts in sorted(self.series.items(), key=lambda kv: (kv[0][0].value, kv[0][1:])):
            for t, rate in pts:
                w.writerow([proto.value, total, seed, f"{t:g}", f"{rate:.6g}"])
        return buf.getvalue()


def summarize(rows: Sequence[ResultRow]) -> SummaryTables:
    if not rows:
        raise ValueError("no rows to summarize")
    groups: dict[tuple[Protocol, int], list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.protocol, r.node_total), []).append(r)
    cells = {}
    for key, rs in groups.items():
        mean, std = {}, {}
        for m in METRICS:
            vals = np.array([getattr(r, m) for r in rs if getattr(r, m) is not None], dtype=float)
            mean[m] = float(vals.mean()) if vals.size else None
            std[m] = float(vals.std()) if vals.size else None
        cells[key] = CellSummary(key[0], key[1], len(rs), mean, std)
    # duplicate seeds give identical series, so the last one simply wins
    series = {(r.protocol, r.node_total, r.seed): r.success_series() for r in rows}
    return SummaryTables(cells, series)


def write_report(rows: Sequence[ResultRow], out_dir: str | Path) -> SummaryTables:
    """Write ``summary.csv`` and ``series.csv`` (plot data) into ``out_dir``."""
    tables = summarize(rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(tables.summary_csv())
    (out / "series.csv").write_text(tables.series_csv())
    return tables
