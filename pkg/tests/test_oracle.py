import sys

import pytest

from cfcase.data import Case, DataError
from cfcase.oracle import FunctionOracle, KNNOracle, SubprocessOracle, train_knn

from conftest import make_cb


def q(*v):
    return Case(None, tuple(float(x) for x in v))


def test_identical_query_k1(iris):
    o = train_knn(iris, 1)
    for c in iris.cases[::7]:
        assert o.classify(Case(None, c.values)) in iris.classes
    # first iris row is unique, so it must come back as its own label
    assert o.classify(Case(None, iris.cases[0].values)) == iris.cases[0].label


def test_majority_vote():
    cb = make_cb([[0.0], [1.0], [10.0]], ["A", "A", "B"])
    o = KNNOracle(cb, 3)
    for x in (0.0, 5.0, 10.0, 9.9):
        assert o.classify(q(x)) == "A"


def test_nearest_neighbour():
    cb = make_cb([[0.0], [1.0], [2.0]], ["A", "B", "B"])
    o = KNNOracle(cb, 1)
    assert o.classify(q(0.4)) == "A"
    assert o.classify(q(0.6)) == "B"


def test_tie_rules():
    # equidistant neighbours: smaller id wins
    cb = make_cb([[0.0], [2.0], [4.0]], ["A", "B", "A"])
    assert KNNOracle(cb, 1).classify(q(1.0)) == "A"
    # 2 neighbours with one vote each: the nearer label wins
    cb = make_cb([[0.0], [3.0], [10.0]], ["A", "B", "B"])
    assert KNNOracle(cb, 2).classify(q(1.0)) == "A"
    assert KNNOracle(cb, 2).classify(q(2.0)) == "B"


def test_batch_matches_single(iris):
    o = train_knn(iris)
    cases = [Case(None, c.values) for c in iris.cases[::5]]
    assert o.classify_batch(cases) == [o.classify(c) for c in cases]


def test_scores_are_distributions(iris):
    o = train_knn(iris)
    s = o.scores(Case(None, iris.cases[0].values))
    assert set(s) == set(iris.classes)
    assert sum(s.values()) == pytest.approx(1.0)
    assert max(s, key=s.get) == "Iris-setosa"


def test_bad_k():
    cb = make_cb([[0.0], [1.0]], ["A", "B"])
    with pytest.raises(ValueError):
        KNNOracle(cb, 3)
    with pytest.raises(ValueError):
        KNNOracle(cb, 0)


def test_function_oracle():
    o = FunctionOracle(lambda v: "hi" if v[0] > 5 else "lo", ["hi", "lo"])
    assert o.classify_batch([q(1), q(9)]) == ["lo", "hi"]
    with pytest.raises(NotImplementedError):
        o.scores(q(1))


def test_subprocess_oracle(tmp_path):
    script = tmp_path / "model.py"
    script.write_text(
        "import sys\n"
        "for line in sys.stdin:\n"
        "    print('hi' if float(line.split(',')[0]) > 5 else 'lo')\n"
    )
    o = SubprocessOracle([sys.executable, str(script)], ["hi", "lo"])
    assert o.classify_batch([q(1, 0), q(9, 0), q(5, 0)]) == ["lo", "hi", "lo"]
    assert o.classify(q(7, 1)) == "hi"

    broken = SubprocessOracle([sys.executable, "-c", "print('x')"], ["x"])
    with pytest.raises(DataError):
        broken.classify_batch([q(1), q(2)])
    failing = SubprocessOracle([sys.executable, "-c", "raise SystemExit(4)"], ["x"])
    with pytest.raises(DataError):
        failing.classify(q(1))
