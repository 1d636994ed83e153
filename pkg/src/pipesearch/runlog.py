"""Append-only JSON-Lines evaluation log, parser, and analysis.

One canonical-JSON line per evaluation (sorted keys, no extra whitespace),
flushed and fsynced per record so a killed run leaves at most one truncated
trailing line, which the parser skips with a warning. The log file is the
single source of truth for the dashboard, the report command, and the
long-poll event stream.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, asdict
from pathlib import Path

from .util import parse_utc_iso

__all__ = [
    "LOG_FORMAT_VERSION",
    "RunLogRecord",
    "RunLogWriter",
    "LogParseError",
    "record_to_line",
    "parse_log",
    "best_so_far",
    "lineage",
    "LineageNode",
    "compare_runs",
    "compare_csv_lines",
]

LOG_FORMAT_VERSION = 1

_FIELDS = ("eval_id", "parent_ids", "origin", "pipeline", "fidelity", "objectives",
           "status", "error_msg", "start_time", "duration_s", "cached")


class LogParseError(ValueError):
    def __init__(self, message: str, path=None, line_no: int | None = None):
        loc = f"{path}:{line_no}: " if line_no is not None else ""
        super().__init__(f"{loc}{message}")
        self.line_no = line_no


@dataclass(frozen=True)
class RunLogRecord:
    eval_id: str
    parent_ids: list
    origin: str
    pipeline: str
    fidelity: float
    objectives: list | None
    status: str  # ok | timeout | error
    error_msg: str | None
    start_time: str  # UTC ISO-8601 with milliseconds
    duration_s: float
    cached: bool

    def validate(self) -> None:
        if self.status not in ("ok", "timeout", "error"):
            raise ValueError(f"invalid status {self.status!r}")
        if (self.status == "ok") != (self.objectives is not None):
            raise ValueError("status=ok iff objectives present")
        if self.duration_s < 0:
            raise ValueError("duration_s must be >= 0")

    @property
    def completion_time(self) -> float:
        return parse_utc_iso(self.start_time) + self.duration_s


def record_to_line(r: RunLogRecord) -> str:
    r.validate()
    payload = asdict(r)
    payload["fidelity"] = float(payload["fidelity"])
    payload["duration_s"] = float(payload["duration_s"])
    if payload["objectives"] is not None:
        payload["objectives"] = [float(v) for v in payload["objectives"]]
    return json.dumps(payload, sort_keys=True, separators=(",", ":"),
                      allow_nan=False) + "\n"


class RunLogWriter:
    """Single-writer append sink. Each append is flushed and fsynced before
    returning; I/O failures propagate (logging is not best-effort)."""

    def __init__(self, path):
        self.path = Path(path)
        is_new = not self.path.exists() or self.path.stat().st_size == 0
        self._fh = open(self.path, "a", encoding="utf-8", newline="")
        if is_new:
            header = json.dumps({"format_version": LOG_FORMAT_VERSION},
                                sort_keys=True, separators=(",", ":"))
            self._fh.write(header + "\n")
            self._sync()

    def append(self, r: RunLogRecord) -> None:
        self._fh.write(record_to_line(r))
        self._sync()

    def _sync(self) -> None:
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _record_from_payload(payload: dict, path, line_no: int) -> RunLogRecord:
    missing = [f for f in _FIELDS if f not in payload]
    if missing:
        raise LogParseError(f"record missing fields {missing}", path, line_no)
    r = RunLogRecord(**{f: payload[f] for f in _FIELDS})
    try:
        r.validate()
    except ValueError as exc:
        raise LogParseError(str(exc), path, line_no) from None
    return r


def parse_log(path) -> list[RunLogRecord]:
    """All records in order. A truncated final line is skipped with a warning
    (crash artifact); any other malformed line raises with its line number.
    Validates eval_id uniqueness and that parents precede children."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        raw = fh.read()
    records: list[RunLogRecord] = []
    seen: set[str] = set()
    lines = raw.split("\n")
    trailing_open = not raw.endswith("\n") and raw != ""
    for i, line in enumerate(lines):
        if line == "":
            continue
        last = i == len(lines) - 1
        line_no = i + 1
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            if last and trailing_open:
                warnings.warn(f"{path}:{line_no}: skipping truncated final line")
                break
            raise LogParseError(f"malformed JSON: {exc.msg}", path, line_no) from None
        if not isinstance(payload, dict):
            raise LogParseError("line is not a JSON object", path, line_no)
        if "format_version" in payload and "eval_id" not in payload:
            if payload["format_version"] != LOG_FORMAT_VERSION:
                raise LogParseError(
                    f"unsupported format_version {payload['format_version']!r}",
                    path, line_no)
            continue
        r = _record_from_payload(payload, path, line_no)
        if r.eval_id in seen:
            raise LogParseError(f"duplicate eval_id {r.eval_id}", path, line_no)
        for parent in r.parent_ids:
            if parent not in seen:
                raise LogParseError(
                    f"parent {parent} does not precede child {r.eval_id}",
                    path, line_no)
        seen.add(r.eval_id)
        records.append(r)
    return records


def best_so_far(records, objective_index: int = 0) -> list[tuple]:
    """Convergence series: one (elapsed_s, running best) point per ok record,
    ordered by completion time, elapsed from the first record's start."""
    if not records:
        return []
    t0 = parse_utc_iso(records[0].start_time)
    ok = [r for r in records if r.status == "ok"]
    ok.sort(key=lambda r: r.completion_time)
    series = []
    best = float("-inf")
    for r in ok:
        best = max(best, r.objectives[objective_index])
        series.append((r.completion_time - t0, best))
    return series


@dataclass
class LineageNode:
    record: RunLogRecord
    parents: list  # of LineageNode


def lineage(records, eval_id: str) -> LineageNode:
    """Ancestor tree up to seed/random roots. Parents always precede children
    in a well-formed log, so the recursion cannot cycle."""
    by_id = {r.eval_id: r for r in records}
    if eval_id not in by_id:
        raise KeyError(f"unknown eval_id {eval_id!r}")

    def build(node_id):
        r = by_id[node_id]
        return LineageNode(r, [build(p) for p in r.parent_ids])

    return build(eval_id)


def _run_id_from_path(path) -> str:
    stem = Path(path).stem
    return stem[4:] if stem.startswith("run-") else stem


def compare_runs(paths) -> dict:
    """Multi-run report: per-run convergence series, final objectives, counts,
    and error rates. Raises naming the file on any unparseable log."""
    if not paths:
        raise ValueError("compare_runs requires at least one log path")
    runs = []
    for path in paths:
        try:
            records = parse_log(path)
        except (OSError, LogParseError) as exc:
            raise ValueError(f"cannot parse log {path}: {exc}") from exc
        serie = best_so_far(records)
        ok = [r for r in records if r.status == "ok"]
        statuses = {"ok": len(ok),
                    "error": sum(r.status == "error" for r in records),
                    "timeout": sum(r.status == "timeout" for r in records)}
        best = max(ok, key=lambda r: r.objectives[0], default=None)
        runs.append({
            "run_id": _run_id_from_path(path),
            "path": str(path),
            "series": [{"elapsed_s": e, "best_value": v} for e, v in serie],
            "final_objectives": list(best.objectives) if best else None,
            "evaluations": len(records),
            "status_counts": statuses,
            "error_rate": (statuses["error"] + statuses["timeout"]) / len(records)
            if records else 0.0,
        })
    return {"runs": runs}


def compare_csv_lines(report: dict) -> list[str]:
    """Plot-data CSV for the report: one row per convergence point. Fixed
    decimal formatting (3 for elapsed, 6 for value) keeps exports diffable
    across tools."""
    lines = ["elapsed_s,run_id,best_value"]
    for run in report["runs"]:
        for point in run["series"]:
            lines.append(f"{point['elapsed_s']:.3f},{run['run_id']},"
                         f"{point['best_value']:.6f}")
    return lines


def write_compare_outputs(report: dict, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    csv_path = out_dir / "convergence.csv"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(compare_csv_lines(report)) + "\n")
    return report_path, csv_path
