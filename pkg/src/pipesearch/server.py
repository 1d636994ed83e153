"""HTTP control API for starting, watching, and stopping runs.

JSON over ``/api/v1/...``; evaluation records stream through a long-poll
endpoint with a monotone ``since`` cursor backed by the run's log file (the
single source of truth). Error bodies are structured: {code, message, field?}.
"""

from __future__ import annotations

import os
import threading
import time
import warnings
from dataclasses import asdict
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import ConfigError, config_from_dict, config_schema, validate_config
from .orchestrator import AutomlRun
from .runlog import parse_log

__all__ = ["create_app", "default_port", "PORT_ENV"]

PORT_ENV = "PIPESEARCH_PORT"
ACTIVE_PHASES = ("loading", "searching", "post_processing")


def default_port() -> int:
    try:
        return int(os.environ.get(PORT_ENV, ""))
    except ValueError:
        return 8700


def _error(status: int, code: str, message: str, field: str | None = None):
    body = {"code": code, "message": message}
    if field is not None:
        body["field"] = field
    return JSONResponse(status_code=status, content=body)


class _Handle:
    def __init__(self, run: AutomlRun, thread: threading.Thread, config_doc: dict):
        self.run = run
        self.thread = thread
        self.config_doc = config_doc
        self.created_at = time.time()

    @property
    def log_path(self) -> Path:
        return Path(self.run.cfg.output_dir) / f"run-{self.run.run_id}.jsonl"

    def status_dict(self) -> dict:
        st = self.run.status()
        return {
            "run_id": self.run.run_id,
            "phase": st.phase,
            "evaluations_completed": st.evaluations_completed,
            "best_objectives": st.best_objectives,
            "elapsed_s": st.elapsed_s,
            "remaining_s": st.remaining_s,
            "error": st.error,
        }

    def records(self) -> list:
        if not self.log_path.exists():
            return []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # mid-append truncation is expected
            return parse_log(self.log_path)


def create_app(max_concurrent_runs: int = 2, runs_dir=None,
               frontend_dir=None) -> FastAPI:
    app = FastAPI(title="pipesearch control API")
    handles: dict[str, _Handle] = {}
    lock = threading.Lock()
    counter = {"n": 0}
    base_dir = Path(runs_dir) if runs_dir else Path.cwd() / "pipesearch-runs"

    def active_count() -> int:
        return sum(1 for h in handles.values()
                   if h.run.status().phase in ACTIVE_PHASES)

    @app.get("/api/v1/config-schema")
    def get_schema():
        return config_schema()

    @app.post("/api/v1/runs", status_code=201)
    async def start_run(request: Request):
        try:
            doc = await request.json()
        except Exception:
            return _error(400, "invalid_config", "request body is not valid JSON")
        if not isinstance(doc, dict):
            return _error(400, "invalid_config", "config must be a JSON object")
        problems = validate_config(doc)
        if problems:
            field, message = problems[0]
            return _error(400, "invalid_config", message, field)
        with lock:
            if active_count() >= max_concurrent_runs:
                return _error(429, "too_many_runs",
                              f"concurrent run limit {max_concurrent_runs} reached")
            counter["n"] += 1
            run_id = f"r{counter['n']:04d}-{os.urandom(3).hex()}"
            doc = dict(doc)
            doc.setdefault("output_dir", str(base_dir / run_id))
            doc["run_id"] = run_id
            try:
                cfg = config_from_dict(doc)
            except ConfigError as exc:
                return _error(400, "invalid_config", str(exc), exc.field)
            run = AutomlRun(cfg)
            thread = threading.Thread(target=run.execute,
                                      name=f"run-{run_id}", daemon=True)
            handles[run_id] = _Handle(run, thread, doc)
            thread.start()
        return {"run_id": run_id, "phase": run.status().phase}

    @app.get("/api/v1/runs")
    def list_runs():
        with lock:
            items = sorted(handles.values(), key=lambda h: h.created_at)
            return {"runs": [h.status_dict() for h in items]}

    @app.get("/api/v1/runs/{run_id}")
    def get_status(run_id: str):
        handle = handles.get(run_id)
        if handle is None:
            return _error(404, "not_found", f"no run {run_id}")
        return handle.status_dict()

    @app.get("/api/v1/runs/{run_id}/events")
    def stream_evaluations(run_id: str, since: int = 0, wait: float = 0.0):
        """Records with sequence > since (1-based). Blocks up to ``wait``
        seconds for new records unless the run is already terminal."""
        handle = handles.get(run_id)
        if handle is None:
            return _error(404, "not_found", f"no run {run_id}")
        since = max(0, since)
        deadline = time.monotonic() + max(0.0, min(wait, 60.0))
        while True:
            records = handle.records()
            fresh = records[since:] if since < len(records) else []
            phase = handle.run.status().phase
            if fresh or phase not in ACTIVE_PHASES or time.monotonic() >= deadline:
                return {
                    "run_id": run_id,
                    "phase": phase,
                    "records": [asdict(r) for r in fresh],
                    "next_since": since + len(fresh),
                }
            time.sleep(0.1)

    @app.post("/api/v1/runs/{run_id}/stop", status_code=202)
    def stop_run(run_id: str):
        handle = handles.get(run_id)
        if handle is None:
            return _error(404, "not_found", f"no run {run_id}")
        handle.run.stop()  # idempotent; no-op on terminal phases
        return {"run_id": run_id, "phase": handle.run.status().phase}

    if frontend_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=frontend_dir, html=True),
                  name="dashboard")
    return app
