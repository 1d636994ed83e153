"""Post-processing: turn the search's evaluation library into a deployable
model, either by refitting the single best pipeline or by greedy ensemble
selection over out-of-fold predictions (selection with replacement, weights =
selection counts / total).

Model artifacts are versioned JSON documents that round-trip the fitted
component states plus the feature codec, so `predict` works on raw CSV rows.
"""

from __future__ import annotations

import json
import warnings

import numpy as np

from .components import build_component, component_from_state
from .datasets import Dataset, FeatureCodec
from .evaluation import EvaluationResult, _component_seed, score
from .space import Pipeline, SearchSpace, canonical_decode, canonical_encode

__all__ = [
    "PostProcessError",
    "Ensemble",
    "FittedPipeline",
    "Model",
    "select_best",
    "fit_final",
    "ensemble_select",
    "build_best_model",
    "build_ensemble_model",
    "save_model",
    "load_model",
    "POST_PROCESSORS",
]

MODEL_FORMAT_VERSION = 1
POST_PROCESSORS = ("best", "ensemble")


class PostProcessError(ValueError):
    """Post-processing could not produce a model."""


def _usable(library) -> list:
    return [r for r in library
            if r.status == "ok" and r.objectives is not None and not r.cached]


def select_best(library) -> EvaluationResult:
    """The ok result with the highest metric score among those at the highest
    fidelity present; ties go to the shorter pipeline, then the earlier start."""
    usable = _usable(library)
    if not usable:
        raise PostProcessError("search produced no usable pipeline")
    top_fidelity = max(r.fidelity for r in usable)
    pool = [r for r in usable if r.fidelity == top_fidelity]
    return max(pool, key=lambda r: (r.objectives[0], r.objectives[1],
                                    _earlier(r), _ReverseStr(r.eval_id)))


def _earlier(r):
    """Sort helper: later start_time must lose, so negate lexicographically via
    a reversed-comparison wrapper."""
    return _ReverseStr(r.start_time)


class _ReverseStr(str):
    def __lt__(self, other):
        return str.__gt__(self, other)

    def __gt__(self, other):
        return str.__lt__(self, other)


class FittedPipeline:
    """All steps of one pipeline fit on a full dataset."""

    def __init__(self, canonical: str, steps: list, classes: list):
        self.canonical = canonical
        self.steps = steps  # list of (component_id, fitted component)
        self.classes = classes

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        for i, (_, comp) in enumerate(self.steps):
            if i < len(self.steps) - 1:
                X = comp.transform(X)
            else:
                return comp.predict_proba(X)
        raise PostProcessError("pipeline has no estimator step")

    def to_dict(self) -> dict:
        return {"pipeline": self.canonical,
                "steps": [{"component": cid, "state": comp.to_state()}
                          for cid, comp in self.steps]}

    @staticmethod
    def from_dict(d: dict, classes: list) -> "FittedPipeline":
        steps = [(s["component"], component_from_state(s["state"])) for s in d["steps"]]
        return FittedPipeline(d["pipeline"], steps, classes)


def fit_final(p: Pipeline, ds: Dataset, seed: int, abort_check=None) -> FittedPipeline:
    """Fit every step on the full dataset. Fit failures name the step."""
    canonical = canonical_encode(p)
    X, y = ds.X, ds.y
    comp_seed = _component_seed(seed, canonical, 1.0)
    fitted = []
    for i, step in enumerate(p.steps):
        comp = build_component(step.component, step.param_dict(), ds.n_classes,
                               comp_seed + i)
        comp.abort_check = abort_check
        try:
            comp.fit(X, y)
            if i < len(p.steps) - 1:
                X = comp.transform(X)
        except Exception as exc:
            raise PostProcessError(
                f"fit failed at step {step.component}: {exc}") from exc
        fitted.append((step.component, comp))
    return FittedPipeline(canonical, fitted, list(ds.classes))


class Ensemble:
    """Outcome of greedy selection: pipelines with count-derived weights plus
    the per-step validation metric trace."""

    def __init__(self, members, metric, step_metrics, selections):
        self.members = members  # list of (pipeline canonical, weight), weight > 0
        self.metric = metric
        self.step_metrics = step_metrics  # validation metric after each selection
        self.selections = selections  # eval_ids in selection order

    def to_dict(self) -> dict:
        return {"members": [{"pipeline": p, "weight": w} for p, w in self.members],
                "metric": self.metric, "step_metrics": self.step_metrics}


def ensemble_select(library, target_size: int, metric: str,
                    truth: np.ndarray, should_stop=None) -> Ensemble:
    """Greedy forward selection with replacement over out-of-fold predictions.

    Starts from the single best model (the first greedy step over an empty
    ensemble) and repeats until target_size selections. Ties prefer the model
    selected fewer times so far, then the earlier start_time.
    """
    if target_size < 1:
        raise PostProcessError("target size must be >= 1")
    usable = [r for r in _usable(library) if r.predictions is not None]
    if not usable:
        raise PostProcessError("no usable evaluations with stored predictions")
    shapes = {r.predictions.shape for r in usable}
    if len(shapes) != 1:
        raise PostProcessError(f"prediction rows are not aligned: shapes {shapes}")

    counts: dict[str, int] = {}
    by_id = {r.eval_id: r for r in usable}
    running = np.zeros_like(usable[0].predictions)
    selections: list[str] = []
    step_metrics: list[float] = []
    for step in range(target_size):
        if should_stop is not None and step > 0 and should_stop():
            break
        best_id, best_val = None, None
        for r in usable:
            val = score((running + r.predictions) / (len(selections) + 1), truth, metric)
            key = (val, -counts.get(r.eval_id, 0), _earlier(r), _ReverseStr(r.eval_id))
            if best_id is None or key > best_key:
                best_id, best_val, best_key = r.eval_id, val, key
        selections.append(best_id)
        counts[best_id] = counts.get(best_id, 0) + 1
        running += by_id[best_id].predictions
        step_metrics.append(best_val)

    total = len(selections)
    weights: dict[str, float] = {}
    for eval_id, cnt in counts.items():
        pipeline = by_id[eval_id].pipeline
        weights[pipeline] = weights.get(pipeline, 0.0) + cnt / total
    members = sorted(weights.items(), key=lambda kv: (-kv[1], kv[0]))
    return Ensemble(members, metric, step_metrics, selections)


class Model:
    """Final deployable artifact: one or more fitted pipelines with weights,
    plus the feature codec for raw-row prediction."""

    def __init__(self, kind: str, members, codec: FeatureCodec, metric: str,
                 summary: dict | None = None):
        self.kind = kind  # single | ensemble
        self.members = members  # list of (weight, FittedPipeline)
        self.codec = codec
        self.metric = metric
        self.summary = summary or {}

    @property
    def classes(self) -> list:
        return list(self.codec.classes)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        out = None
        for weight, fitted in self.members:
            p = fitted.predict_proba(X)
            out = weight * p if out is None else out + weight * p
        return out

    def predict_raw(self, header, rows):
        """(labels, probabilities) for raw CSV rows; tolerates and drops the
        target column if the input still carries it."""
        if self.codec.target in header:
            drop = header.index(self.codec.target)
            header = [h for i, h in enumerate(header) if i != drop]
            rows = [[v for i, v in enumerate(row) if i != drop] for row in rows]
        X = self.codec.encode_rows(header, rows)
        if X.shape[0] == 0:
            return [], np.zeros((0, len(self.classes)))
        proba = self.predict_proba(X)
        labels = [self.classes[i] for i in proba.argmax(axis=1)]
        return labels, proba

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "metric": self.metric,
            "codec": self.codec.to_dict(),
            "members": [dict(weight=w, **f.to_dict()) for w, f in self.members],
            "summary": self.summary,
        }

    @staticmethod
    def from_dict(d: dict) -> "Model":
        version = d.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise PostProcessError(f"unsupported model format_version {version!r}")
        codec = FeatureCodec.from_dict(d["codec"])
        members = [(m["weight"], FittedPipeline.from_dict(m, codec.classes))
                   for m in d["members"]]
        return Model(d["kind"], members, codec, d.get("metric", "accuracy"),
                     d.get("summary", {}))


def save_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return Model.from_dict(json.load(fh))


def build_best_model(library, space: SearchSpace, ds: Dataset, seed: int,
                     metric: str, abort_check=None) -> Model:
    best = select_best(library)
    pipeline = canonical_decode(best.pipeline, space)
    fitted = fit_final(pipeline, ds, seed, abort_check)
    summary = {"pipeline": best.pipeline, "validation_objectives": list(best.objectives),
               "source_eval_id": best.eval_id}
    return Model("single", [(1.0, fitted)], ds.codec, metric, summary)


def build_ensemble_model(library, space: SearchSpace, ds: Dataset, seed: int,
                         metric: str, target_size: int = 25, abort_check=None,
                         should_stop=None) -> Model:
    """Select, then refit every distinct member on the full dataset. Member
    refit failures drop the member and renormalize the remaining weights."""
    ensemble = ensemble_select(library, target_size, metric, ds.y, should_stop)
    members = []
    for pipeline_str, weight in ensemble.members:
        try:
            fitted = fit_final(canonical_decode(pipeline_str, space), ds, seed,
                               abort_check)
        except PostProcessError as exc:
            warnings.warn(f"dropping ensemble member {pipeline_str}: {exc}")
            continue
        members.append((weight, fitted))
    if not members:
        raise PostProcessError("every ensemble member failed to refit")
    total = sum(w for w, _ in members)
    members = [(w / total, f) for w, f in members]
    summary = {"members": [{"pipeline": f.canonical, "weight": w} for w, f in members],
               "step_metrics": ensemble.step_metrics, "metric": metric}
    return Model("ensemble", members, ds.codec, metric, summary)
