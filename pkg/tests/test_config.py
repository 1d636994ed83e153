import json

import pytest

from pipesearch.config import (ConfigError, config_from_dict, config_schema,
                               load_space_file, space_from_dict, validate_config)


def valid_doc(**overrides):
    doc = {
        "version": 1,
        "data": {"path": "data.csv", "target": "y"},
        "search": {"name": "random", "params": {}},
        "post": {"name": "best", "params": {}},
        "metric": "accuracy",
        "budget": {"total_seconds": 30},
        "seed": 1,
    }
    doc.update(overrides)
    return doc


def fields(errors):
    return [f for f, _ in errors]


def test_valid_config_has_no_errors():
    assert validate_config(valid_doc()) == []


def test_missing_data_and_seed():
    doc = valid_doc()
    del doc["data"], doc["seed"]
    errs = fields(validate_config(doc))
    assert "data" in errs and "seed" in errs


def test_unknown_strategy_field_path():
    errs = validate_config(valid_doc(search={"name": "bayes"}))
    assert errs and errs[0][0] == "search.name"
    assert "bayes" in errs[0][1]


def test_unknown_post_and_metric():
    errs = fields(validate_config(valid_doc(post={"name": "stack"},
                                            metric="auc")))
    assert "post.name" in errs and "metric" in errs


def test_budget_validation():
    errs = fields(validate_config(valid_doc(budget={"total_seconds": 0})))
    assert "budget.total_seconds" in errs
    errs = fields(validate_config(valid_doc(
        budget={"total_seconds": 10, "post_processing_fraction": 1.5})))
    assert "budget.post_processing_fraction" in errs


def test_bad_folds_and_workers():
    errs = fields(validate_config(valid_doc(folds=1, n_workers=0)))
    assert "folds" in errs and "n_workers" in errs


def test_config_from_dict_resolves_relative_paths(tmp_path):
    cfg = config_from_dict(valid_doc(output_dir="out"), base_dir=tmp_path)
    assert cfg.data_path == str(tmp_path / "data.csv")
    assert cfg.output_dir == str(tmp_path / "out")
    assert cfg.budget.total_seconds == 30.0


def test_config_from_dict_raises_with_field():
    with pytest.raises(ConfigError) as exc:
        config_from_dict(valid_doc(seed="one"))
    assert exc.value.field == "seed"


def space_doc():
    return {
        "version": 1,
        "max_pipeline_length": 2,
        "components": [
            {"id": "standard_scaler", "role": "transformer", "hyperparams": {}},
            {"id": "knn", "role": "estimator", "hyperparams": {
                "k": {"kind": "integer", "lo": 1, "hi": 5},
                "weights": {"kind": "categorical",
                            "choices": ["uniform", "distance"]}}},
        ],
    }


def test_space_from_dict_roundtrip():
    space = space_from_dict(space_doc())
    assert space.max_pipeline_length == 2
    assert [c.id for c in space.components] == ["standard_scaler", "knn"]
    assert space.component("knn").hyperparams["k"].hi == 5


def test_space_bad_domain_kind_names_field():
    doc = space_doc()
    doc["components"][1]["hyperparams"]["k"] = {"kind": "gaussian"}
    with pytest.raises(ConfigError) as exc:
        space_from_dict(doc)
    assert "components[1].hyperparams.k.kind" in exc.value.field


def test_space_invariant_violations_reported():
    doc = space_doc()
    doc["components"] = [doc["components"][0]]  # no estimator left
    with pytest.raises(ConfigError, match="no estimator"):
        space_from_dict(doc)


def test_inline_space_validated_in_config():
    doc = valid_doc(space={"version": 1, "max_pipeline_length": 0,
                           "components": []})
    errs = validate_config(doc)
    assert errs


def test_load_space_file(tmp_path):
    path = tmp_path / "space.json"
    path.write_text(json.dumps(space_doc()))
    space = load_space_file(path)
    assert space.component("knn").role == "estimator"


def test_config_schema_lists_strategies():
    schema = config_schema()
    assert "asha" in schema["strategies"]
    assert "ensemble" in schema["post_processors"]
    paths = [f["path"] for f in schema["fields"]]
    assert "budget.total_seconds" in paths and "seed" in paths
