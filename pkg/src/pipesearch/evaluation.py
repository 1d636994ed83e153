"""Pipeline evaluation: stratified CV at a fidelity fraction under a timeout.

Failures never escape: every outcome (ok, timeout, error) is encoded in the
returned EvaluationResult so search strategies stay failure-oblivious.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, replace

import numpy as np

from .components import EvalAborted, build_component
from .datasets import Dataset, DatasetError, make_splits, stratified_prefix
from .space import OriginTag, Pipeline, canonical_encode
from .util import utc_now_iso

__all__ = ["EvalConfig", "EvaluationResult", "evaluate", "score", "METRICS",
           "PROB_CLIP"]

PROB_CLIP = 1e-15
METRICS = ("accuracy", "neg_log_loss", "macro_f1")


@dataclass(frozen=True)
class EvalConfig:
    folds: int = 5
    metric: str = "accuracy"
    timeout_s: float = 30.0
    seed: int = 0


@dataclass(frozen=True)
class EvaluationResult:
    eval_id: str
    pipeline: str  # canonical string
    origin: OriginTag
    fidelity: float
    objectives: tuple | None  # (metric score, -pipeline length), both maximized
    status: str  # ok | timeout | error
    error_msg: str | None
    start_time: str  # UTC ISO-8601 with milliseconds
    duration_s: float
    predictions: np.ndarray | None = None  # out-of-fold (n, c) probabilities
    cached: bool = False

    def with_identity(self, eval_id, origin, start_time, cached=False) -> "EvaluationResult":
        """Re-key a result for cache replay: fresh id/origin/time, same payload."""
        return replace(self, eval_id=eval_id, origin=origin, start_time=start_time,
                       duration_s=0.0, cached=cached)


def score(pred: np.ndarray, truth: np.ndarray, metric: str) -> float:
    """Higher is better for every metric. neg_log_loss is the mean log
    probability of the true class (clipped), i.e. the negated log loss."""
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: {len(pred)} predictions, {len(truth)} labels")
    if metric == "accuracy":
        return float(np.mean(pred.argmax(axis=1) == truth))
    if metric == "neg_log_loss":
        p = np.clip(pred[np.arange(len(truth)), truth], PROB_CLIP, 1.0 - PROB_CLIP)
        return float(np.mean(np.log(p)))
    if metric == "macro_f1":
        n_classes = pred.shape[1]
        hard = pred.argmax(axis=1)
        f1s = []
        for c in range(n_classes):
            tp = float(np.sum((hard == c) & (truth == c)))
            fp = float(np.sum((hard == c) & (truth != c)))
            fn = float(np.sum((hard != c) & (truth == c)))
            denom = 2 * tp + fp + fn
            f1s.append(0.0 if denom == 0 else 2 * tp / denom)
        return float(np.mean(f1s))
    raise ValueError(f"unknown metric {metric!r}")


def _component_seed(run_seed: int, canonical: str, fidelity: float) -> int:
    """Stable per-pipeline seed so evaluate is a pure function of its inputs."""
    digest = hashlib.sha256(f"{run_seed}|{canonical}|{fidelity}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


class _Deadline:
    def __init__(self, timeout_s, external_abort=None):
        self.expires = time.monotonic() + timeout_s
        self.external_abort = external_abort

    def check(self):
        if time.monotonic() > self.expires:
            raise EvalAborted("per-evaluation timeout")
        if self.external_abort is not None and self.external_abort():
            raise EvalAborted("cancelled")


def evaluate(p: Pipeline, ds: Dataset, fidelity: float, cfg: EvalConfig,
             eval_id: str = "", origin: OriginTag | None = None,
             external_abort=None) -> EvaluationResult:
    """Stratified k-fold evaluation of one pipeline.

    Folds depend only on cfg.seed, so every evaluation in a run yields
    row-aligned out-of-fold predictions (a requirement of ensemble selection).
    The training side of each fold is subsampled to the fidelity fraction with
    a per-fold seed; smaller fractions select nested subsets, so an ASHA
    promotion re-uses the data its lower rung saw.
    """
    origin = origin or OriginTag("seed")
    canonical = canonical_encode(p)
    start_iso = utc_now_iso()
    started = time.monotonic()
    deadline = _Deadline(cfg.timeout_s, external_abort)

    def fail(status, msg):
        return EvaluationResult(eval_id, canonical, origin, fidelity, None, status,
                                msg, start_iso, time.monotonic() - started)

    try:
        folds = make_splits(ds, cfg.folds, cfg.seed)
        oof = np.zeros((ds.n_rows, ds.n_classes))
        fold_scores = []
        all_rows = np.arange(ds.n_rows)
        for fold_i, val_idx in enumerate(folds):
            deadline.check()
            train_idx = np.setdiff1d(all_rows, val_idx, assume_unique=True)
            y_train = ds.y[train_idx]
            if fidelity < 1.0:
                keep = stratified_prefix(y_train, ds.n_classes, fidelity,
                                         cfg.seed * 1000 + fold_i)
                sub_counts = np.bincount(y_train[keep], minlength=ds.n_classes)
                if np.any(sub_counts < 2):
                    return fail("error", "fidelity too low: a class fell below 2 "
                                         "training instances")
                train_idx = train_idx[keep]
            X_train, y_tr = ds.X[train_idx], ds.y[train_idx]
            X_val = ds.X[val_idx]
            comp_seed = _component_seed(cfg.seed, canonical, fidelity)
            for step_i, step in enumerate(p.steps):
                deadline.check()
                comp = build_component(step.component, step.param_dict(),
                                       ds.n_classes, comp_seed + step_i)
                comp.abort_check = deadline.check
                if step_i < len(p.steps) - 1:
                    comp.fit(X_train, y_tr)
                    X_train = comp.transform(X_train)
                    X_val = comp.transform(X_val)
                else:
                    comp.fit(X_train, y_tr)
                    deadline.check()
                    proba = comp.predict_proba(X_val)
            if not np.all(np.isfinite(proba)):
                return fail("error", "estimator produced non-finite probabilities")
            oof[val_idx] = proba
            fold_scores.append(score(proba, ds.y[val_idx], cfg.metric))
        objectives = (float(np.mean(fold_scores)), float(-len(p.steps)))
        if not all(np.isfinite(objectives)):
            return fail("error", "non-finite objective value")
        return EvaluationResult(eval_id, canonical, origin, fidelity, objectives,
                                "ok", None, start_iso, time.monotonic() - started,
                                predictions=oof)
    except EvalAborted:
        return fail("timeout", "evaluation exceeded its time budget")
    except DatasetError as exc:
        return fail("error", str(exc))
    except Exception as exc:  # any learner failure becomes a result, not a crash
        return fail("error", f"{type(exc).__name__}: {exc}")
