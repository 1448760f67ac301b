import itertools

import numpy as np
import pytest

from cfcase.metrics import count_diffs
from cfcase.potential import (CSV_COLUMNS, analyze_potential, good_cf_availability,
                              reports_to_csv)

from conftest import make_cb


def brute_histogram(cb):
    hist = {}
    for a, b in itertools.combinations(cb.cases, 2):
        if a.label != b.label:
            n = count_diffs(a, b, cb).count
            hist[n] = hist.get(n, 0) + 1
    return hist


def brute_availability(cb):
    ok = [any(c.label != o.label and 1 <= count_diffs(c, o, cb).count <= 2
              for o in cb.cases if o.id != c.id) for c in cb.cases]
    return sum(ok) / len(ok)


def test_iris_row(iris):
    r = analyze_potential(iris, tolerance=0.0)
    assert r.n_pairs == 7500
    p = r.binned()
    assert abs(p["1-diff"] - 0.0) <= 0.5
    assert abs(p["2-diff"] - 0.3) <= 0.5
    assert abs(p["3-diff"] - 8.8) <= 0.5
    assert abs(p["4-diff"] - 91.0) <= 0.5


def test_single_class():
    cb = make_cb([[1.0], [2.0]], ["a", "a"])
    r = analyze_potential(cb)
    assert r.n_pairs == 0 and r.histogram == {} and r.good_fraction == 0


def test_four_case_toy():
    cb = make_cb([[0.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]],
                 ["a", "a", "b", "b"])
    # by hand: (0,2) 1 diff, (0,3) 3, (1,2) 1, (1,3) 1
    assert analyze_potential(cb).histogram == {1: 3, 3: 1}


def test_matches_brute_force_random():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n, d = rng.integers(5, 40), rng.integers(1, 6)
        X = rng.integers(0, 3, (n, d)).astype(float)
        y = rng.choice(["a", "b", "c"], n)
        cb = make_cb(X.tolist(), y.tolist(), tolerance=float(rng.choice([0.0, 0.3])))
        r = analyze_potential(cb, threads=2)
        assert r.histogram == brute_histogram(cb)
        assert r.n_pairs == sum(brute_histogram(cb).values())
        assert good_cf_availability(cb) == pytest.approx(brute_availability(cb))


def test_block_boundaries(iris):
    # more rows than one block, with a thread pool
    big = make_cb(np.tile(iris.X, (2, 1)).tolist(), list(iris.labels) * 2)
    r = analyze_potential(big, threads=4)
    assert r.n_pairs == 4 * 7500


def test_tolerance_raises_good_fraction(iris):
    a = analyze_potential(iris, 0.0).good_fraction
    b = analyze_potential(iris, 0.05).good_fraction
    assert b >= a


def test_availability_examples():
    cb = make_cb([[0.0, 0.0], [0.0, 1.0], [5.0, 5.0], [5.0, 6.0]], ["a", "b", "a", "b"])
    assert good_cf_availability(cb) == 1.0
    cb = make_cb([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]], ["a", "b"])
    assert good_cf_availability(cb) == 0.0
    six = make_cb([[0, 0, 0], [0, 0, 1], [1, 1, 1], [2, 2, 2], [2, 2, 0], [1, 0, 2]],
                  ["a", "b", "a", "b", "a", "b"])
    assert good_cf_availability(six) == pytest.approx(brute_availability(six))


def test_zero_diff_pairs_are_not_good():
    cb = make_cb([[0.0], [0.0]], ["a", "b"])
    assert good_cf_availability(cb) == 0.0
    assert analyze_potential(cb).histogram == {0: 1}


def test_csv(iris):
    text = reports_to_csv([analyze_potential(iris, 0.0)])
    head, row = text.strip().split("\n")
    assert head.split(",") == CSV_COLUMNS
    assert row.startswith("iris,150,4,3,7500,0.0,0.4,8.8,90.8")


def test_good_fraction_monotone_in_tolerance(iris):
    fr = [analyze_potential(iris, t).good_fraction for t in (0.0, 0.01, 0.02, 0.05, 0.1)]
    assert fr == sorted(fr)


def test_availability_can_drop_when_pairs_collapse():
    # a 1-diff pair becomes a 0-diff pair under a loose tolerance and stops counting
    cb = make_cb([[10.0], [10.5]], ["a", "b"])
    assert good_cf_availability(cb) == 1.0
    assert good_cf_availability(cb.with_tolerance(0.1)) == 0.0


def test_order_independent(iris):
    rng = np.random.default_rng(4)
    perm = rng.permutation(len(iris))
    shuffled = make_cb([list(iris.cases[i].values) for i in perm], [iris.cases[i].label for i in perm],
                       names=iris.schema.names, name="iris")
    a, b = analyze_potential(iris, 0.01), analyze_potential(shuffled, 0.01)
    assert a.histogram == b.histogram and a.n_pairs == b.n_pairs
