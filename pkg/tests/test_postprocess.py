import math
import random

import numpy as np
import pytest

from pipesearch.evaluation import EvaluationResult, EvalConfig, evaluate
from pipesearch.datasets import load_dataset
from pipesearch.postprocess import (Model, PostProcessError,
                                    build_best_model, build_ensemble_model,
                                    ensemble_select, fit_final, load_model,
                                    save_model, select_best)
from pipesearch.space import (ComponentSpec, OriginTag, Pipeline, SearchSpace,
                              Step, canonical_encode)

from conftest import balanced_dataset, write_csv


def ok_result(eval_id, objectives, predictions=None, fidelity=1.0,
              start="2024-01-01T00:00:00.000Z", pipeline="knn(k=1)", status="ok"):
    return EvaluationResult(
        eval_id=eval_id, pipeline=pipeline, origin=OriginTag("random"),
        fidelity=fidelity, objectives=objectives if status == "ok" else None,
        status=status, error_msg=None, start_time=start, duration_s=0.1,
        predictions=predictions)


# ---------------------------------------------------------------------------
# select_best

def test_select_best_single_result():
    r = ok_result("e1", (0.5, -1.0))
    assert select_best([r]) is r


def test_select_best_tie_breaks_on_length_then_time():
    rs = [
        ok_result("e1", (0.7, -1.0), start="2024-01-01T00:00:00.000Z"),
        ok_result("e2", (0.9, -3.0), start="2024-01-01T00:00:01.000Z"),
        ok_result("e3", (0.9, -2.0), start="2024-01-01T00:00:02.000Z"),
    ]
    assert select_best(rs).eval_id == "e3"  # 0.9 with the shorter pipeline
    tied = [
        ok_result("e1", (0.9, -2.0), start="2024-01-01T00:00:05.000Z"),
        ok_result("e2", (0.9, -2.0), start="2024-01-01T00:00:01.000Z"),
    ]
    assert select_best(tied).eval_id == "e2"  # earlier start wins


def test_select_best_prefers_highest_fidelity():
    rs = [
        ok_result("low", (0.99, -1.0), fidelity=1 / 3),
        ok_result("full", (0.60, -1.0), fidelity=1.0),
    ]
    assert select_best(rs).eval_id == "full"
    # Fallback: no full-fidelity results -> highest fidelity present.
    rs = [
        ok_result("lowest", (0.99, -1.0), fidelity=1 / 9),
        ok_result("mid", (0.60, -1.0), fidelity=1 / 3),
    ]
    assert select_best(rs).eval_id == "mid"


def test_select_best_no_usable_results():
    bad = ok_result("e1", None, status="error")
    with pytest.raises(PostProcessError, match="no usable pipeline"):
        select_best([bad])
    with pytest.raises(PostProcessError, match="no usable pipeline"):
        select_best([])


# ---------------------------------------------------------------------------
# ensemble_select

def two_class_preds(p_class1):
    p1 = np.asarray(p_class1, dtype=float)
    return np.column_stack([1.0 - p1, p1])


def m123_library():
    truth = np.array([1, 1, 0])
    lib = [
        ok_result("m1", (0.9, -1.0), two_class_preds([0.9, 0.6, 0.4]),
                  start="2024-01-01T00:00:00.000Z"),
        ok_result("m2", (0.8, -1.0), two_class_preds([0.6, 0.9, 0.6]),
                  start="2024-01-01T00:00:01.000Z", pipeline="knn(k=2)"),
        ok_result("m3", (0.1, -1.0), two_class_preds([0.1, 0.2, 0.1]),
                  start="2024-01-01T00:00:02.000Z", pipeline="knn(k=3)"),
    ]
    return lib, truth


def test_ensemble_derived_hand_example():
    # Hand arithmetic: M1 alone scores (ln.9+ln.6+ln.6)/3 = -0.3757; adding M2
    # gives mean probs [.75,.75,.5] scoring -0.4228; M3 is worse still. So the
    # second pick duplicates M1 and the ensemble is pure M1.
    lib, truth = m123_library()
    ens = ensemble_select(lib, 2, "neg_log_loss", truth)
    assert ens.selections == ["m1", "m1"]
    assert ens.members == [("knn(k=1)", 1.0)]
    assert ens.step_metrics[0] == pytest.approx(-0.375676, abs=1e-5)
    assert ens.step_metrics[1] == pytest.approx(-0.375676, abs=1e-5)


def test_ensemble_single_model_library():
    lib, truth = m123_library()
    ens = ensemble_select(lib[:1], 5, "neg_log_loss", truth)
    assert ens.members == [("knn(k=1)", 1.0)]
    assert len(ens.selections) == 5


def test_ensemble_target_size_zero_rejected():
    lib, truth = m123_library()
    with pytest.raises(PostProcessError, match="target size must be >= 1"):
        ensemble_select(lib, 0, "neg_log_loss", truth)


def test_ensemble_requires_predictions():
    bare = ok_result("e1", (0.5, -1.0), predictions=None)
    with pytest.raises(PostProcessError, match="no usable evaluations"):
        ensemble_select([bare], 2, "accuracy", np.array([0, 1]))


def test_ensemble_weights_sum_to_one():
    rng = np.random.RandomState(0)
    truth = rng.randint(0, 2, 12)
    lib = [ok_result(f"m{i}", (0.5, -1.0),
                     two_class_preds(rng.uniform(0, 1, 12)),
                     start=f"2024-01-01T00:00:{i:02d}.000Z",
                     pipeline=f"knn(k={i + 1})")
           for i in range(6)]
    ens = ensemble_select(lib, 7, "neg_log_loss", truth)
    assert sum(w for _, w in ens.members) == pytest.approx(1.0, abs=1e-12)
    assert all(w > 0 for _, w in ens.members)


# Independent oracle: exhaustive candidate scan per step with its own metric
# arithmetic (plain Python, no numpy reductions shared with the implementation).

def oracle_metric(rows, truth, metric):
    if metric == "accuracy":
        hits = 0
        for probs, t in zip(rows, truth):
            arg = max(range(len(probs)), key=lambda j: (probs[j], -j))
            hits += int(arg == t)
        return hits / len(rows)
    total = 0.0
    for probs, t in zip(rows, truth):
        p = min(max(probs[t], 1e-15), 1 - 1e-15)
        total += math.log(p)
    return total / len(rows)


def oracle_greedy(lib, n, metric, truth):
    chosen = []
    n_classes = lib[0].predictions.shape[1]
    for _ in range(n):
        best_key, best_model = None, None
        for r in lib:
            mixture = chosen + [r]
            rows = []
            for i in range(len(truth)):
                rows.append([sum(m.predictions[i][j] for m in mixture)
                             / len(mixture) for j in range(n_classes)])
            val = oracle_metric(rows, truth, metric)
            prior = sum(1 for c in chosen if c.eval_id == r.eval_id)
            # maximize val, then fewest prior picks, then earliest start/id
            key = (-val, prior, r.start_time, r.eval_id)
            if best_key is None or key < best_key:
                best_key, best_model = key, r
        chosen.append(best_model)
    return [r.eval_id for r in chosen]


@pytest.mark.parametrize("metric", ["neg_log_loss", "accuracy"])
def test_ensemble_matches_brute_force_oracle(metric):
    rng = np.random.RandomState(42)
    for trial in range(20):
        n_models = rng.randint(1, 8)
        n_rows = rng.randint(4, 10)
        truth = rng.randint(0, 2, n_rows)
        lib = [ok_result(f"m{i}", (0.5, -1.0),
                         two_class_preds(rng.uniform(0.01, 0.99, n_rows)),
                         start=f"2024-01-01T00:00:{i:02d}.000Z",
                         pipeline=f"knn(k={i + 1})")
               for i in range(n_models)]
        n = int(rng.randint(1, 5))
        ens = ensemble_select(lib, n, metric, truth)
        assert ens.selections == oracle_greedy(lib, n, metric, truth), \
            f"trial {trial}"


def test_ensemble_final_at_least_best_single():
    rng = np.random.RandomState(7)
    for _ in range(30):
        n_rows = rng.randint(5, 12)
        truth = rng.randint(0, 2, n_rows)
        lib = [ok_result(f"m{i}", (0.5, -1.0),
                         two_class_preds(rng.uniform(0.01, 0.99, n_rows)),
                         start=f"2024-01-01T00:00:{i:02d}.000Z",
                         pipeline=f"knn(k={i + 1})")
               for i in range(rng.randint(1, 9))]
        ens = ensemble_select(lib, 5, "neg_log_loss", truth)
        best_single = max(oracle_metric(r.predictions.tolist(), truth,
                                        "neg_log_loss") for r in lib)
        assert ens.step_metrics[-1] >= best_single - 1e-12


# ---------------------------------------------------------------------------
# fit_final and model artifacts

def knn_space():
    from pipesearch.space import Domain
    return SearchSpace(
        [ComponentSpec("standard_scaler", "transformer", {}),
         ComponentSpec("knn", "estimator",
                       {"k": Domain.integer(1, 15),
                        "weights": Domain.categorical(["uniform", "distance"])}),
         ComponentSpec("majority_stub", "estimator", {}),
         ComponentSpec("always_fails", "estimator", {})],
        max_pipeline_length=2)


def test_fit_final_probability_rows_sum_to_one():
    ds = balanced_dataset(15, 2)
    p = Pipeline((Step.make("standard_scaler", {}),
                  Step.make("knn", {"k": 3, "weights": "uniform"})))
    fitted = fit_final(p, ds, seed=1)
    proba = fitted.predict_proba(ds.X)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)


def test_fit_final_failure_names_step():
    ds = balanced_dataset(15, 2)
    p = Pipeline((Step.make("always_fails", {}),))
    with pytest.raises(PostProcessError, match="fit failed at step always_fails"):
        fit_final(p, ds, seed=1)


def test_majority_stub_final_model_is_class_frequencies(tmp_path):
    rows = [[str(i % 7), ("yes" if i < 9 else "no")] for i in range(15)]
    path = write_csv(tmp_path / "d.csv", ["f", "y"], rows)
    ds = load_dataset(path, "y")
    p = Pipeline((Step.make("majority_stub", {}),))
    fitted = fit_final(p, ds, seed=0)
    proba = fitted.predict_proba(ds.X)
    # 9 "yes" / 6 "no" -> sorted classes [no, yes] -> frequencies [0.4, 0.6]
    assert np.allclose(proba, np.tile([0.4, 0.6], (15, 1)))


def test_model_roundtrip_identical_predictions(tmp_path):
    rows = [[f"{i % 10}", f"{(i * 3) % 7}", ("a" if i % 2 else "b")]
            for i in range(40)]
    path = write_csv(tmp_path / "d.csv", ["f1", "f2", "y"], rows)
    ds = load_dataset(path, "y")
    lib = [evaluate(Pipeline((Step.make("knn", {"k": 3, "weights": "uniform"}),)),
                    ds, 1.0, EvalConfig(folds=3, timeout_s=30, seed=4),
                    eval_id="e1", origin=OriginTag("random"))]
    model = build_best_model(lib, knn_space(), ds, seed=4, metric="accuracy")
    model_path = tmp_path / "model.json"
    save_model(model, model_path)
    clone = load_model(model_path)
    header = ["f1", "f2"]
    raw_rows = [[r[0], r[1]] for r in rows]
    labels_a, proba_a = model.predict_raw(header, raw_rows)
    labels_b, proba_b = clone.predict_raw(header, raw_rows)
    assert labels_a == labels_b
    assert np.array_equal(proba_a, proba_b)


def test_model_rejects_unknown_format_version():
    with pytest.raises(PostProcessError, match="format_version"):
        Model.from_dict({"format_version": 99})


def test_refit_best_matches_manual_refit(tmp_path):
    ds = balanced_dataset(20, 2, seed=3)
    pipeline = Pipeline((Step.make("knn", {"k": 5, "weights": "distance"}),))
    result = evaluate(pipeline, ds, 1.0, EvalConfig(folds=4, timeout_s=30, seed=8),
                      eval_id="e1", origin=OriginTag("random"))
    ds.codec = None
    model = build_best_model([result], knn_space(), ds, seed=8, metric="accuracy")
    manual = fit_final(pipeline, ds, seed=8)
    assert np.array_equal(model.predict_proba(ds.X), manual.predict_proba(ds.X))


def test_ensemble_predict_weighted_mean():
    one_hot_a = np.array([[1.0, 0.0]])
    one_hot_b = np.array([[0.0, 1.0]])

    class Fixed:
        def __init__(self, out):
            self.out = out

        def predict_proba(self, X):
            return np.tile(self.out, (X.shape[0], 1))

    from pipesearch.datasets import FeatureCodec, ColumnCodec
    codec = FeatureCodec("y", [ColumnCodec("f", "numeric")], ["a", "b"])
    from pipesearch.postprocess import FittedPipeline
    fa = FittedPipeline("p1", [("stub", Fixed(one_hot_a))], ["a", "b"])
    fb = FittedPipeline("p2", [("stub", Fixed(one_hot_b))], ["a", "b"])
    # Patch predict_proba path: FittedPipeline calls the last step's
    # predict_proba directly.
    model = Model("ensemble", [(0.5, fa), (0.5, fb)], codec, "accuracy")
    proba = model.predict_proba(np.zeros((3, 1)))
    assert np.allclose(proba, 0.5)


def test_build_ensemble_model_drops_failing_member(tmp_path):
    ds = balanced_dataset(15, 2)
    good = evaluate(Pipeline((Step.make("knn", {"k": 3, "weights": "uniform"}),)),
                    ds, 1.0, EvalConfig(folds=3, timeout_s=30, seed=1),
                    eval_id="e1", origin=OriginTag("random"))
    # A result whose pipeline refits unsuccessfully but carries predictions.
    bad = ok_result("e2", (0.99, -1.0), good.predictions.copy(),
                    pipeline="always_fails()")
    with pytest.warns(UserWarning, match="dropping ensemble member"):
        model = build_ensemble_model([good, bad], knn_space(), ds, seed=1,
                                     metric="accuracy", target_size=4)
    assert model.kind == "ensemble"
    assert sum(w for w, _ in model.members) == pytest.approx(1.0)
    assert all(f.canonical != "always_fails()" for _, f in model.members)
