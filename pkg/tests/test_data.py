import json

import numpy as np
import pytest

from cfcase import datasets
from cfcase.data import (CATEGORICAL, NUMERIC, Case, DataError, FeatureSchema, FeatureSpec,
                         load_case_base, load_schema, make_folds, write_case_base)
from cfcase.metrics import count_diffs

from conftest import make_cb


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_iris_shape(iris):
    assert len(iris) == 150
    assert iris.n_features == 4
    assert len(iris.classes) == 3
    assert all(f.kind == NUMERIC for f in iris.schema.features)


def test_bundled_datasets_load():
    for name in datasets.NAMES:
        cb = datasets.load(name)
        assert len(cb) > 100 and len(cb.classes) >= 2


def test_single_class_is_legal(tmp_path):
    cb = load_case_base(write(tmp_path, "a,b,y\n1,2,x\n3,4,x\n"))
    assert cb.classes == ("x",)


def test_missing_rows_dropped(tmp_path):
    text = "a,b,y\n1,2,p\n?,3,q\n4,5,q\n6,,p\n7,8,p\n"
    cb = load_case_base(write(tmp_path, text))
    assert len(cb) == 3
    assert cb.dropped_rows == 2
    # ids are source row positions, so survivors keep theirs
    assert [c.id for c in cb.cases] == [0, 2, 4]


def test_schema_inference_marks_categoricals(tmp_path):
    cb = load_case_base(write(tmp_path, "a,b,y\n1,red,p\n2,blue,q\n3.5,red,p\n"))
    assert [f.kind for f in cb.schema.features] == [NUMERIC, CATEGORICAL]
    assert cb.vocab[1] == {"blue": 0, "red": 1}
    assert list(cb.X[:, 1]) == [1.0, 0.0, 1.0]


def test_label_defaults_and_override(tmp_path):
    p = write(tmp_path, "y,a,b\np,1,2\nq,3,4\n")
    assert load_case_base(p).schema.names == ["y", "a"]
    assert load_case_base(p, label="y").schema.names == ["a", "b"]
    with pytest.raises(DataError):
        load_case_base(p, label="nope")


def test_schema_file_roundtrip(tmp_path):
    schema = FeatureSchema((FeatureSpec("a", NUMERIC, 0.02), FeatureSpec("b", CATEGORICAL)), "y", "range")
    sp = tmp_path / "s.json"
    sp.write_text(json.dumps(schema.to_dict()))
    assert load_schema(sp) == schema
    cb = load_case_base(write(tmp_path, "b,a,y\nz,1,p\nw,2,q\n"), schema=load_schema(sp))
    assert cb.schema.names == ["a", "b"]
    assert cb.cases[0].values == (1.0, "z")


def test_schema_mismatch_and_bad_rows(tmp_path):
    schema = FeatureSchema((FeatureSpec("a"),), "y")
    with pytest.raises(DataError):
        load_case_base(write(tmp_path, "a,b,y\n1,2,p\n"), schema=schema)
    with pytest.raises(DataError):
        load_case_base(write(tmp_path, "a,y\n1,p\n2\n"))
    with pytest.raises(DataError):
        load_case_base(write(tmp_path, "a,y\nx,p\n"), schema=schema)
    with pytest.raises(DataError):
        load_case_base(tmp_path / "missing.csv")
    with pytest.raises(DataError):
        load_case_base(write(tmp_path, "a,y\n?,p\n"))


def test_feature_spec_validation():
    with pytest.raises(DataError):
        FeatureSpec("a", NUMERIC, 1.0)
    with pytest.raises(DataError):
        FeatureSpec("a", CATEGORICAL, 0.1)
    with pytest.raises(DataError):
        FeatureSchema((FeatureSpec("a"), FeatureSpec("a")))
    with pytest.raises(DataError):
        FeatureSchema((FeatureSpec("a"),), tolerance_mode="percent")


def test_write_roundtrip(tmp_path, bac):
    p = tmp_path / "bac.csv"
    write_case_base(bac, p)
    back = load_case_base(p, schema=bac.schema)
    assert [c.values for c in back.cases] == [c.values for c in bac.cases]
    assert list(back.labels) == list(bac.labels)


def test_derived_statistics(bac):
    assert bac.ranges[0] == (60.0, 95.0)
    assert bac.by_class["Over"] == (0, 3, 5)
    assert not bac.X.flags.writeable
    enc = bac.encode(Case(None, (80.0, 1.0, "Other", "Full", 6.0)))
    assert enc[2] == -1


def test_subset_recomputes(iris):
    sub = iris.subset(range(10))
    assert len(sub) == 10
    assert sub.ranges[0] == (float(sub.X[:, 0].min()), float(sub.X[:, 0].max()))


def test_range_tolerance_example():
    # range [0, 100], tolerance 1% of range = 1.0
    cb = make_cb([[0.0], [100.0]], ["a", "b"], tolerance=0.01, mode="range")
    a = Case(None, (50.0,))
    assert count_diffs(a, Case(None, (50.9,)), cb).count == 0
    assert count_diffs(a, Case(None, (51.1,)), cb).count == 1


def test_value_tolerance():
    cb = make_cb([[0.0], [100.0]], ["a", "b"], tolerance=0.01)
    # 1% of max(|a|, |b|): 0.51 for 50 vs 51
    assert count_diffs(Case(None, (50.0,)), Case(None, (50.5,)), cb).count == 0
    assert count_diffs(Case(None, (50.0,)), Case(None, (51.0,)), cb).count == 1
    # vectorised check agrees with the scalar one
    assert not cb.differs(np.array([50.0]), np.array([50.5]))[0]


def test_folds():
    cb = make_cb([[float(i)] for i in range(100)], ["a", "b"] * 50)
    plan = make_folds(cb, 42)
    assert [len(f) for f in plan.folds] == [10] * 10
    assert plan == make_folds(cb, 42)
    assert plan != make_folds(cb, 43)

    cb = make_cb([[float(i)] for i in range(103)], ["a"] * 103)
    plan = make_folds(cb, 1)
    assert {len(f) for f in plan.folds} == {10, 11}
    assert sorted(i for f in plan.folds for i in f) == list(range(103))
    train, test = plan.split(3)
    assert not set(train) & set(test) and len(train) + len(test) == 103


def test_folds_need_enough_cases():
    with pytest.raises(DataError):
        make_folds(make_cb([[1.0]] * 5, ["a"] * 5), 0)
