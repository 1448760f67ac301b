import numpy as np
import pytest

from cfcase import datasets
from cfcase.data import CATEGORICAL, NUMERIC, FeatureSchema, FeatureSpec, build_case_base


def make_cb(rows, labels, kinds=None, names=None, tolerance=0.0, mode="value", name="toy"):
    d = len(rows[0])
    kinds = kinds or [NUMERIC] * d
    names = names or [f"f{j}" for j in range(d)]
    feats = tuple(FeatureSpec(n, k, tolerance if k == NUMERIC else 0.0) for n, k in zip(names, kinds))
    return build_case_base(FeatureSchema(feats, "class", mode), rows, labels, name)


BAC_NAMES = ["Weight", "Duration", "Gender", "Meal", "Units"]
BAC_KINDS = [NUMERIC, NUMERIC, CATEGORICAL, CATEGORICAL, NUMERIC]
# the drinker, a good counterfactual (one change) and a bad one (four changes)
BAC_TEST = (80.0, 1.0, "Male", "Empty", 6.0)
BAC_GOOD = (80.0, 1.5, "Male", "Empty", 6.0)
BAC_BAD = (80.0, 3.0, "Female", "Full", 6.5)
BAC_ROWS = [
    (BAC_TEST, "Over"),
    (BAC_GOOD, "Under"),
    (BAC_BAD, "Under"),
    ((60.0, 1.0, "Female", "Empty", 8.0), "Over"),
    ((95.0, 4.0, "Male", "Full", 3.0), "Under"),
    ((70.0, 2.0, "Female", "Full", 7.0), "Over"),
]


def bac_cb(rows=BAC_ROWS):
    return make_cb([r for r, _ in rows], [l for _, l in rows], BAC_KINDS, BAC_NAMES, name="bac")


def synthetic8(n=200, seed=0):
    """Eight 0.1-discretised features; cases are noisy copies of 20 prototypes,
    labelled by a weighted-sum threshold."""
    rng = np.random.default_rng(seed)
    protos = np.round(rng.uniform(0, 1, (20, 8)) * 10) / 10
    X = protos[rng.integers(0, 20, n)].copy()
    for i in range(n):
        j = rng.choice(8, rng.integers(1, 4), replace=False)
        X[i, j] = np.round(rng.uniform(0, 1, len(j)) * 10) / 10
    w = np.array([3, 2, 2, 1, 1, 1, 0.5, 0.5])
    s = X @ w
    y = np.where(s > np.median(s), "pos", "neg")
    return make_cb(X.tolist(), y.tolist(), name="synthetic8")


@pytest.fixture(scope="session")
def iris():
    return datasets.load("iris")


@pytest.fixture
def bac():
    return bac_cb()
