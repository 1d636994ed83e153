import csv
from pathlib import Path

import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: release-criterion checks (some run real "
                   "budgeted searches and take minutes)")


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::", 1)[1]
    verdict = "PASS" if report.passed else "FAIL"
    print(f"\n[ACCEPTANCE] {name}: {verdict}", flush=True)

from pipesearch.components import register_builder
from pipesearch.datasets import Dataset
from pipesearch.space import ComponentSpec, Domain, SearchSpace

DATASETS_DIR = Path(__file__).resolve().parent.parent / "datasets"


class MajorityStub:
    """Constant estimator: every row gets the training class frequencies."""

    abort_check = None

    def fit(self, X, y):
        counts = np.bincount(y, minlength=self.n_classes).astype(float)
        self.proba_ = counts / counts.sum()
        return self

    def __init__(self, n_classes):
        self.n_classes = int(n_classes)

    def predict_proba(self, X):
        return np.tile(self.proba_, (X.shape[0], 1))

    def to_state(self):
        return {"type": "majority_stub", "n_classes": self.n_classes,
                "proba": self.proba_.tolist()}

    @classmethod
    def from_state(cls, state):
        obj = cls(state["n_classes"])
        obj.proba_ = np.array(state["proba"])
        return obj


class AlwaysFails:
    abort_check = None

    def __init__(self, n_classes):
        self.n_classes = n_classes

    def fit(self, X, y):
        raise RuntimeError("this estimator always fails")


register_builder("majority_stub", lambda p, nc, s: MajorityStub(nc), MajorityStub)
register_builder("always_fails", lambda p, nc, s: AlwaysFails(nc))


@pytest.fixture
def tiny_space():
    """Two transformers, two estimators, assorted domain kinds."""
    return SearchSpace(
        components=[
            ComponentSpec("scale", "transformer", {}),
            ComponentSpec("pick", "transformer", {"k": Domain.integer(1, 8)}),
            ComponentSpec("knn", "estimator",
                          {"k": Domain.integer(1, 15),
                           "weights": Domain.categorical(["uniform", "distance"])}),
            ComponentSpec("linear", "estimator",
                          {"l2": Domain.real(1e-4, 10.0, "log"),
                           "dual": Domain.boolean()}),
        ],
        max_pipeline_length=3,
    )


def make_dataset(X, y, classes=None):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    classes = classes or [str(c) for c in range(int(y.max()) + 1)]
    names = [f"c{i}" for i in range(X.shape[1])]
    return Dataset(X, y, list(classes), names, codec=None)


def balanced_dataset(n_per_class=20, n_classes=2, d=3, seed=0):
    rng = np.random.RandomState(seed)
    X, y = [], []
    for c in range(n_classes):
        X.append(rng.normal(3.0 * c, 1.0, size=(n_per_class, d)))
        y.extend([c] * n_per_class)
    return make_dataset(np.vstack(X), np.array(y))


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path
