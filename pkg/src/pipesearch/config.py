"""Declarative run configuration: one JSON document covering dataset, search
strategy, post-processing, budget, and (optionally) a custom search space.

The same validator backs the config file, the CLI, and the HTTP API, so error
messages always carry a field path like ``budget.total_seconds``.
"""

from __future__ import annotations

import json
from pathlib import Path

from .evaluation import METRICS
from .orchestrator import Budget, RunConfig
from .postprocess import POST_PROCESSORS
from .search import STRATEGIES
from .space import ComponentSpec, Domain, SearchSpace, validate_space

__all__ = ["CONFIG_VERSION", "ConfigError", "validate_config", "config_from_dict",
           "load_config_file", "space_from_dict", "load_space_file", "config_schema"]

CONFIG_VERSION = 1
SPACE_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = errors  # list of (field, message)
        super().__init__("; ".join(f"{f}: {m}" for f, m in errors))

    @property
    def field(self) -> str:
        return self.errors[0][0]


def _expect(value, types, field, errors, required=True, default=None):
    if value is None:
        if required:
            errors.append((field, "is required"))
        return default
    if not isinstance(value, types) or isinstance(value, bool) and bool not in (
            types if isinstance(types, tuple) else (types,)):
        names = "/".join(t.__name__ for t in
                         (types if isinstance(types, tuple) else (types,)))
        errors.append((field, f"must be {names}"))
        return default
    return value


def validate_config(doc: dict) -> list[tuple]:
    """Every problem as (field path, message); empty list means valid."""
    errors: list[tuple] = []
    if not isinstance(doc, dict):
        return [("", "config must be a JSON object")]
    version = doc.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        errors.append(("version", f"unsupported version {version!r}"))

    data = doc.get("data")
    if not isinstance(data, dict):
        errors.append(("data", "is required (object with path and target)"))
    else:
        _expect(data.get("path"), str, "data.path", errors)
        _expect(data.get("target"), str, "data.target", errors)

    search = doc.get("search", {})
    if not isinstance(search, dict):
        errors.append(("search", "must be an object"))
    else:
        name = search.get("name", "random")
        if name not in STRATEGIES:
            errors.append(("search.name",
                           f"unknown strategy {name!r}; one of "
                           f"{', '.join(sorted(STRATEGIES))}"))
        if not isinstance(search.get("params", {}), dict):
            errors.append(("search.params", "must be an object"))

    post = doc.get("post", {})
    if not isinstance(post, dict):
        errors.append(("post", "must be an object"))
    else:
        name = post.get("name", "best")
        if name not in POST_PROCESSORS:
            errors.append(("post.name",
                           f"unknown post-processor {name!r}; one of "
                           f"{', '.join(POST_PROCESSORS)}"))
        if not isinstance(post.get("params", {}), dict):
            errors.append(("post.params", "must be an object"))

    metric = doc.get("metric", "accuracy")
    if metric not in METRICS:
        errors.append(("metric", f"unknown metric {metric!r}; one of "
                                 f"{', '.join(METRICS)}"))

    folds = doc.get("folds", 5)
    if not isinstance(folds, int) or isinstance(folds, bool) or folds < 2:
        errors.append(("folds", "must be an integer >= 2"))

    budget = doc.get("budget")
    if not isinstance(budget, dict):
        errors.append(("budget", "is required (object with total_seconds)"))
    else:
        total = budget.get("total_seconds")
        if not isinstance(total, (int, float)) or isinstance(total, bool) or total <= 0:
            errors.append(("budget.total_seconds", "must be a positive number"))
        timeout = budget.get("per_eval_timeout_s")
        if timeout is not None and (not isinstance(timeout, (int, float))
                                    or isinstance(timeout, bool) or timeout <= 0):
            errors.append(("budget.per_eval_timeout_s", "must be a positive number"))
        frac = budget.get("post_processing_fraction")
        if frac is not None and (not isinstance(frac, (int, float))
                                 or isinstance(frac, bool) or not 0 < frac < 1):
            errors.append(("budget.post_processing_fraction", "must be in (0, 1)"))

    if "seed" not in doc:
        errors.append(("seed", "is required (runs take no implicit entropy)"))
    elif not isinstance(doc["seed"], int) or isinstance(doc["seed"], bool):
        errors.append(("seed", "must be an integer"))

    workers = doc.get("n_workers")
    if workers is not None and (not isinstance(workers, int)
                                or isinstance(workers, bool) or workers < 1):
        errors.append(("n_workers", "must be an integer >= 1"))

    cap = doc.get("max_evaluations")
    if cap is not None and (not isinstance(cap, int) or isinstance(cap, bool)
                            or cap < 1):
        errors.append(("max_evaluations", "must be an integer >= 1"))

    if "space" in doc and doc["space"] is not None:
        space_errors: list[tuple] = []
        space = _space_from_dict_checked(doc["space"], "space", space_errors)
        errors.extend(space_errors)
        if space is not None and not space_errors:
            for problem in validate_space(space):
                errors.append(("space", problem))
    if doc.get("space_file") is not None:
        _expect(doc.get("space_file"), str, "space_file", errors)
    if doc.get("output_dir") is not None:
        _expect(doc.get("output_dir"), str, "output_dir", errors)
    return errors


def config_from_dict(doc: dict, base_dir=None) -> RunConfig:
    """Build a RunConfig after validation; raises ConfigError on problems."""
    errors = validate_config(doc)
    if errors:
        raise ConfigError(errors)
    base = Path(base_dir) if base_dir else None

    def resolve(p):
        path = Path(p)
        return str(base / path) if base and not path.is_absolute() else str(path)

    space = None
    if doc.get("space") is not None:
        space = space_from_dict(doc["space"])
    elif doc.get("space_file"):
        space = load_space_file(resolve(doc["space_file"]))

    budget = doc["budget"]
    return RunConfig(
        data_path=resolve(doc["data"]["path"]),
        target=doc["data"]["target"],
        budget=Budget(float(budget["total_seconds"]),
                      budget.get("per_eval_timeout_s"),
                      budget.get("post_processing_fraction")),
        seed=doc["seed"],
        search=doc.get("search", {}).get("name", "random"),
        search_params=doc.get("search", {}).get("params", {}),
        post=doc.get("post", {}).get("name", "best"),
        post_params=doc.get("post", {}).get("params", {}),
        metric=doc.get("metric", "accuracy"),
        folds=doc.get("folds", 5),
        n_workers=doc.get("n_workers"),
        space=space,
        output_dir=resolve(doc["output_dir"]) if doc.get("output_dir") else ".",
        max_evaluations=doc.get("max_evaluations"),
        run_id=doc.get("run_id"),
    )


def load_config_file(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return config_from_dict(doc, base_dir=Path(path).parent)


# ---------------------------------------------------------------------------
# Search-space documents

_DOMAIN_KINDS = ("categorical", "integer", "real", "boolean")


def _domain_from_dict(d: dict, field: str, errors: list) -> Domain | None:
    if not isinstance(d, dict):
        errors.append((field, "must be an object"))
        return None
    kind = d.get("kind")
    if kind not in _DOMAIN_KINDS:
        errors.append((f"{field}.kind", f"must be one of {', '.join(_DOMAIN_KINDS)}"))
        return None
    if kind == "categorical":
        choices = d.get("choices")
        if not isinstance(choices, list) or not choices:
            errors.append((f"{field}.choices", "must be a non-empty list"))
            return None
        return Domain.categorical(choices)
    if kind == "boolean":
        return Domain.boolean()
    lo, hi = d.get("lo"), d.get("hi")
    scale = d.get("scale", "linear")
    for name, v in (("lo", lo), ("hi", hi)):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            errors.append((f"{field}.{name}", "must be a number"))
            return None
    if scale not in ("linear", "log"):
        errors.append((f"{field}.scale", "must be linear or log"))
        return None
    if kind == "integer":
        return Domain.integer(int(lo), int(hi), scale)
    return Domain.real(float(lo), float(hi), scale)


def _space_from_dict_checked(doc, field: str, errors: list) -> SearchSpace | None:
    if not isinstance(doc, dict):
        errors.append((field, "must be an object"))
        return None
    if doc.get("version", SPACE_VERSION) != SPACE_VERSION:
        errors.append((f"{field}.version", "unsupported space version"))
        return None
    max_len = doc.get("max_pipeline_length", 3)
    if not isinstance(max_len, int) or isinstance(max_len, bool) or max_len < 1:
        errors.append((f"{field}.max_pipeline_length", "must be an integer >= 1"))
        return None
    comps_doc = doc.get("components")
    if not isinstance(comps_doc, list) or not comps_doc:
        errors.append((f"{field}.components", "must be a non-empty list"))
        return None
    comps = []
    for i, cd in enumerate(comps_doc):
        cfield = f"{field}.components[{i}]"
        if not isinstance(cd, dict) or not isinstance(cd.get("id"), str) \
                or not isinstance(cd.get("role"), str):
            errors.append((cfield, "must be an object with id and role"))
            continue
        hps = {}
        for name, dd in (cd.get("hyperparams") or {}).items():
            dom = _domain_from_dict(dd, f"{cfield}.hyperparams.{name}", errors)
            if dom is not None:
                hps[name] = dom
        comps.append(ComponentSpec(cd["id"], cd["role"], hps))
    if errors:
        return None
    return SearchSpace(comps, max_len)


def space_from_dict(doc: dict) -> SearchSpace:
    errors: list[tuple] = []
    space = _space_from_dict_checked(doc, "space", errors)
    if errors or space is None:
        raise ConfigError(errors or [("space", "invalid space document")])
    problems = validate_space(space)
    if problems:
        raise ConfigError([("space", p) for p in problems])
    return space


def load_space_file(path) -> SearchSpace:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return space_from_dict(doc)


def config_schema() -> dict:
    """Machine-readable field catalog for client-side form validation."""
    return {
        "version": CONFIG_VERSION,
        "strategies": sorted(STRATEGIES),
        "post_processors": list(POST_PROCESSORS),
        "metrics": list(METRICS),
        "fields": [
            {"path": "data.path", "type": "string", "required": True},
            {"path": "data.target", "type": "string", "required": True},
            {"path": "search.name", "type": "string", "required": False,
             "enum": sorted(STRATEGIES), "default": "random"},
            {"path": "post.name", "type": "string", "required": False,
             "enum": list(POST_PROCESSORS), "default": "best"},
            {"path": "metric", "type": "string", "required": False,
             "enum": list(METRICS), "default": "accuracy"},
            {"path": "folds", "type": "integer", "required": False, "default": 5},
            {"path": "budget.total_seconds", "type": "number", "required": True,
             "min": 1},
            {"path": "seed", "type": "integer", "required": True},
            {"path": "n_workers", "type": "integer", "required": False, "min": 1},
            {"path": "max_evaluations", "type": "integer", "required": False,
             "min": 1},
            {"path": "output_dir", "type": "string", "required": False},
        ],
    }
