"""Run lifecycle: the event loop that keeps n workers busy under a wall-clock
budget, duplicate-evaluation caching, stop handling, and the split between
search time and post-processing time.

One coordinator thread owns the strategy state and the log writer; workers
only run evaluations and hand back immutable results.
"""

from __future__ import annotations

import concurrent.futures as cf
import json
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .components import EvalAborted, default_space
from .datasets import DatasetError, load_dataset
from .evaluation import EvalConfig, EvaluationResult, evaluate
from .postprocess import (PostProcessError, build_best_model, build_ensemble_model,
                          save_model)
from .runlog import RunLogRecord, RunLogWriter
from .search import create_strategy
from .space import SearchSpace, canonical_encode, validate_space
from .util import utc_now_iso

__all__ = ["Budget", "RunConfig", "RunStatus", "RunResult", "AutomlRun",
           "run_automl", "event_loop", "remaining", "WORKERS_ENV"]

WORKERS_ENV = "PIPESEARCH_WORKERS"
PHASES = ("loading", "searching", "post_processing", "done", "failed", "stopped")
BUDGET_GRACE_FRACTION = 0.10
STOP_POST_FRACTION = 0.10


@dataclass(frozen=True)
class Budget:
    total_seconds: float
    per_eval_timeout_s: float | None = None  # default derived from the search share
    post_processing_fraction: float | None = None  # default 0.1 best / 0.3 ensemble

    def resolved(self, post_name: str) -> "Budget":
        frac = self.post_processing_fraction
        if frac is None:
            frac = 0.3 if post_name == "ensemble" else 0.1
        search_share = self.total_seconds * (1.0 - frac)
        timeout = self.per_eval_timeout_s
        if timeout is None:
            timeout = min(max(self.total_seconds * 0.1, 1.0), search_share)
        return Budget(self.total_seconds, timeout, frac)

    def validate(self) -> list[str]:
        problems = []
        if self.total_seconds <= 0:
            problems.append("budget.total_seconds must be positive")
        if self.per_eval_timeout_s is not None and self.per_eval_timeout_s <= 0:
            problems.append("budget.per_eval_timeout_s must be positive")
        frac = self.post_processing_fraction
        if frac is not None and not 0.0 < frac < 1.0:
            problems.append("budget.post_processing_fraction must be in (0, 1)")
        if (self.per_eval_timeout_s is not None and frac is not None
                and self.per_eval_timeout_s > self.total_seconds * (1.0 - frac)):
            problems.append("budget.per_eval_timeout_s exceeds the search share")
        return problems


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class RunConfig:
    data_path: str
    target: str
    budget: Budget
    seed: int
    search: str = "random"
    search_params: dict = field(default_factory=dict)
    post: str = "best"
    post_params: dict = field(default_factory=dict)
    metric: str = "accuracy"
    folds: int = 5
    n_workers: int | None = None  # None: WORKERS_ENV or 1; config always wins
    space: SearchSpace | None = None  # None: built-in default space
    output_dir: str = "."
    max_evaluations: int | None = None  # optional deterministic stop
    run_id: str | None = None

    def workers(self) -> int:
        return self.n_workers if self.n_workers is not None else default_workers()


@dataclass(frozen=True)
class RunStatus:
    phase: str
    evaluations_completed: int = 0
    dispatched: int = 0
    best_objectives: list | None = None
    elapsed_s: float = 0.0
    remaining_s: float = 0.0
    error: str | None = None


@dataclass(frozen=True)
class RunResult:
    run_id: str
    phase: str  # done | failed | stopped
    log_path: str | None
    model_path: str | None
    summary: dict
    error: str | None = None


def remaining(deadline: float, now: float | None = None) -> float:
    """Seconds left before the deadline; 0 means stop dispatching."""
    now = time.monotonic() if now is None else now
    return max(0.0, deadline - now)


def event_loop(strategy, evaluate_fn, deadline: float, n_workers: int, rng,
               on_result=None, stop_event: threading.Event | None = None,
               max_evaluations: int | None = None, cancel_grace_s: float = 2.0):
    """Pump dispatch/receive against a worker pool until the deadline, a stop
    signal, or the optional dispatch cap.

    Keeps n_workers evaluations in flight whenever dispatching is allowed.
    Duplicate candidates (same canonical string and fidelity) are answered
    from a cache without touching a worker, logged with the cache marker. At
    deadline, in-flight evaluations are cancelled cooperatively and logged as
    timeouts, so every dispatched candidate yields exactly one result.

    ``evaluate_fn(request, eval_id, external_abort)`` must return an
    EvaluationResult and never raise.
    """
    stop_event = stop_event or threading.Event()
    cancel = threading.Event()
    cache: dict[tuple, EvaluationResult] = {}
    results: list[EvaluationResult] = []
    inflight: dict = {}  # future -> (eval_id, request, start_iso, start_monotonic)
    dispatched = 0

    def can_dispatch() -> bool:
        if stop_event.is_set() or remaining(deadline) <= 0:
            return False
        return max_evaluations is None or dispatched < max_evaluations

    def finish(result: EvaluationResult) -> None:
        results.append(result)
        if on_result is not None:
            on_result(result)
        strategy.receive(result)

    pool = cf.ThreadPoolExecutor(max_workers=n_workers)
    try:
        while True:
            while len(inflight) < n_workers and can_dispatch():
                request = strategy.dispatch(rng)
                dispatched += 1
                eval_id = f"e{dispatched:06d}"
                key = (canonical_encode(request.pipeline), request.fidelity)
                hit = cache.get(key)
                if hit is not None:
                    finish(hit.with_identity(eval_id, request.origin,
                                             utc_now_iso(), cached=True))
                    continue
                future = pool.submit(evaluate_fn, request, eval_id, cancel.is_set)
                inflight[future] = (eval_id, request, utc_now_iso(), time.monotonic())
            if not inflight:
                if not can_dispatch():
                    break
                continue
            # Short wait slices keep the loop responsive to stop() and expiry.
            wait_s = min(0.25, remaining(deadline)) if remaining(deadline) > 0 else 0.05
            done, _ = cf.wait(set(inflight), timeout=wait_s,
                              return_when=cf.FIRST_COMPLETED)
            for future in done:
                eval_id, request, _, _ = inflight.pop(future)
                try:
                    result = future.result()
                except Exception as exc:  # worker crash becomes an error result
                    result = EvaluationResult(
                        eval_id, canonical_encode(request.pipeline), request.origin,
                        request.fidelity, None, "error",
                        f"worker crashed: {exc}", utc_now_iso(), 0.0)
                cache[(result.pipeline, result.fidelity)] = result
                finish(result)
            if not done and remaining(deadline) <= 0 and inflight:
                # Budget expiry: cancel in-flight work and log it as timed out.
                cancel.set()
                cf.wait(set(inflight), timeout=cancel_grace_s)
                now = time.monotonic()
                for future, (eval_id, request, start_iso, started) in inflight.items():
                    record = EvaluationResult(
                        eval_id, canonical_encode(request.pipeline), request.origin,
                        request.fidelity, None, "timeout",
                        "cancelled at budget expiry", start_iso, now - started)
                    results.append(record)
                    if on_result is not None:
                        on_result(record)
                inflight.clear()
                break
    finally:
        cancel.set()
        pool.shutdown(wait=True)
    return results, dispatched


class AutomlRun:
    """One AutoML run: owns the phase machine, the log writer, and the stop
    flag. ``execute`` runs synchronously; servers call it from a thread and
    read ``status()`` snapshots."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.run_id = cfg.run_id or f"{int(time.time() * 1000):x}{cfg.seed & 0xffff:04x}"
        self._stop = threading.Event()
        self._status = RunStatus(phase="loading")
        self._best: list | None = None
        self._completed = 0
        self._dispatched = 0
        self._started = time.monotonic()
        self.result: RunResult | None = None

    def status(self) -> RunStatus:
        return self._status

    def stop(self) -> None:
        """Idempotent; no-op once the run is in a terminal phase."""
        self._stop.set()

    def _set_phase(self, phase: str, error: str | None = None) -> None:
        total = self.cfg.budget.total_seconds
        elapsed = time.monotonic() - self._started
        self._status = RunStatus(phase, self._completed, self._dispatched,
                                 self._best, elapsed, max(0.0, total - elapsed),
                                 error)

    def execute(self) -> RunResult:
        try:
            return self._execute()
        except Exception as exc:
            # Log-writer I/O failures and other unexpected errors abort the
            # run, but the phase must still reach a terminal state so status
            # consumers are never left polling forever.
            return self._fail(None, f"{type(exc).__name__}: {exc}")

    def _execute(self) -> RunResult:
        cfg = self.cfg
        out_dir = Path(cfg.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / f"run-{self.run_id}.jsonl"
        self._started = time.monotonic()
        budget = cfg.budget.resolved(cfg.post)
        problems = budget.validate()
        if problems:
            return self._fail(None, "; ".join(problems))

        self._set_phase("loading")
        try:
            ds = load_dataset(cfg.data_path, cfg.target)
        except (DatasetError, OSError) as exc:
            return self._fail(None, f"dataset load failed: {exc}")

        space = cfg.space or default_space()
        space_problems = validate_space(space)
        if space_problems:
            return self._fail(None, "invalid search space: " + "; ".join(space_problems))
        try:
            strategy = create_strategy(cfg.search, space, cfg.search_params)
        except (ValueError, TypeError) as exc:
            return self._fail(None, str(exc))
        if cfg.post not in ("best", "ensemble"):
            return self._fail(None, f"unknown post-processor {cfg.post!r}")

        eval_cfg = EvalConfig(folds=cfg.folds, metric=cfg.metric,
                              timeout_s=budget.per_eval_timeout_s, seed=cfg.seed)
        rng = random.Random(cfg.seed)
        search_deadline = self._started + budget.total_seconds * \
            (1.0 - budget.post_processing_fraction)

        writer = RunLogWriter(log_path)
        search_started = time.monotonic()

        def evaluate_fn(request, eval_id, external_abort):
            return evaluate(request.pipeline, ds, request.fidelity, eval_cfg,
                            eval_id=eval_id, origin=request.origin,
                            external_abort=external_abort)

        def on_result(result: EvaluationResult) -> None:
            writer.append(_to_record(result))
            self._completed += 1
            self._dispatched += 1
            if result.status == "ok" and not result.cached:
                if self._best is None or result.objectives[0] > self._best[0]:
                    self._best = list(result.objectives)
            self._set_phase("searching")

        self._set_phase("searching")
        try:
            library, dispatched = event_loop(
                strategy, evaluate_fn, search_deadline, cfg.workers(), rng,
                on_result=on_result, stop_event=self._stop,
                max_evaluations=cfg.max_evaluations)
        finally:
            search_elapsed = time.monotonic() - search_started
            writer.close()
        self._dispatched = dispatched

        stopped = self._stop.is_set()
        ok_count = sum(1 for r in library if r.status == "ok")
        if ok_count == 0:
            return self._fail(str(log_path), "no usable pipeline: search produced "
                                             "zero ok evaluations")

        self._set_phase("post_processing")
        post_started = time.monotonic()
        if stopped:
            post_allowance = min(remaining(self._started + budget.total_seconds),
                                 budget.total_seconds * STOP_POST_FRACTION)
            post_deadline = post_started + post_allowance
        else:
            post_deadline = self._started + budget.total_seconds
        hard_deadline = self._started + budget.total_seconds * (1 + BUDGET_GRACE_FRACTION)

        def post_abort():
            if time.monotonic() > min(post_deadline + 1.0, hard_deadline):
                raise EvalAborted("post-processing deadline")

        try:
            if cfg.post == "ensemble":
                model = build_ensemble_model(
                    library, space, ds, cfg.seed, cfg.metric,
                    target_size=int(cfg.post_params.get("target_size", 25)),
                    abort_check=post_abort,
                    should_stop=lambda: time.monotonic() > post_deadline)
            else:
                model = build_best_model(library, space, ds, cfg.seed, cfg.metric,
                                         abort_check=post_abort)
        except (PostProcessError, EvalAborted) as exc:
            return self._fail(str(log_path), f"post-processing failed: {exc}")
        post_elapsed = time.monotonic() - post_started

        model_path = out_dir / "model.json"
        save_model(model, model_path)

        phase = "stopped" if stopped else "done"
        best = select_summary(library)
        summary = {
            "run_id": self.run_id,
            "phase": phase,
            "seed": cfg.seed,
            "search": cfg.search,
            "post": cfg.post,
            "metric": cfg.metric,
            "best": best,
            "n_evaluations": len(library),
            "n_dispatched": dispatched,
            "status_counts": {
                s: sum(1 for r in library if r.status == s)
                for s in ("ok", "timeout", "error")},
            "phase_timings": {"search_s": search_elapsed,
                              "post_processing_s": post_elapsed},
            "post_processing": model.summary,
            "log_path": str(log_path),
            "model_path": str(model_path),
        }
        with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
        self._set_phase(phase)
        self.result = RunResult(self.run_id, phase, str(log_path), str(model_path),
                                summary)
        return self.result

    def _fail(self, log_path: str | None, reason: str) -> RunResult:
        self._set_phase("failed", reason)
        self.result = RunResult(self.run_id, "failed", log_path, None, {}, reason)
        return self.result


def select_summary(library) -> dict | None:
    ok = [r for r in library if r.status == "ok" and not r.cached]
    if not ok:
        return None
    best = max(ok, key=lambda r: r.objectives[0])
    return {"pipeline": best.pipeline, "objectives": list(best.objectives),
            "eval_id": best.eval_id}


def _to_record(result: EvaluationResult) -> RunLogRecord:
    return RunLogRecord(
        eval_id=result.eval_id,
        parent_ids=list(result.origin.parent_ids),
        origin=result.origin.label,
        pipeline=result.pipeline,
        fidelity=result.fidelity,
        objectives=list(result.objectives) if result.objectives is not None else None,
        status=result.status,
        error_msg=result.error_msg,
        start_time=result.start_time,
        duration_s=result.duration_s,
        cached=result.cached,
    )


def run_automl(cfg: RunConfig) -> RunResult:
    """Load, search, post-process, and write artifacts for one run."""
    return AutomlRun(cfg).execute()
