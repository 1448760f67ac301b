"""Feature-difference counting and case distances.

Scalar functions take two cases; the ``*_to_all`` kernels compare one encoded
vector against every row of a case-base and back the scans elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RANGE, Case, CaseBase, DataError, mad

__all__ = [
    "DiffResult", "count_diffs", "normalized_distance", "mad", "mad_distance",
    "mad_weights", "diff_counts_to_all", "distances_to_all",
]


@dataclass(frozen=True)
class DiffResult:
    count: int
    diff_features: frozenset
    match_features: frozenset


def _check(a: Case, b: Case, cb: CaseBase):
    d = cb.n_features
    if len(a.values) != d or len(b.values) != d:
        raise DataError(f"case does not conform to a {d}-feature schema")


def count_diffs(a: Case, b: Case, cb: CaseBase) -> DiffResult:
    """Features where ``a`` and ``b`` differ beyond each feature's tolerance.

    Numeric tolerance is a fraction of the larger magnitude of the two values,
    or of the feature's observed range when the schema says so.
    """
    _check(a, b, cb)
    spans = cb.spans
    by_range = cb.schema.tolerance_mode == RANGE
    diff, match = set(), set()
    for j, f in enumerate(cb.schema.features):
        if f.is_numeric:
            x, y = float(a.values[j]), float(b.values[j])
            scale = spans[j] if by_range else max(abs(x), abs(y))
            same = abs(x - y) <= f.tolerance * scale
        else:
            same = str(a.values[j]) == str(b.values[j])
        (match if same else diff).add(j)
    return DiffResult(len(diff), frozenset(diff), frozenset(match))


def normalized_distance(a: Case, b: Case, cb: CaseBase) -> float:
    """Mean per-feature distance in [0, 1].

    Numeric terms are range-normalised and clamped; categoricals are 0/1.
    """
    _check(a, b, cb)
    spans = cb.spans
    total = 0.0
    for j, f in enumerate(cb.schema.features):
        if f.is_numeric:
            if spans[j] > 0:
                total += min(1.0, abs(float(a.values[j]) - float(b.values[j])) / spans[j])
        elif str(a.values[j]) != str(b.values[j]):
            total += 1.0
    return total / cb.n_features


def mad_weights(cb: CaseBase) -> np.ndarray:
    """Per-feature weights of the MAD-scaled L1 distance.

    1/MAD for numerics, falling back to 1/range when the MAD is zero and to 0
    when the range is zero too; categoricals weigh 1 on mismatch.
    """
    w = np.ones(cb.n_features)
    spans = cb.spans
    for j, m in cb.mads.items():
        if m > 0:
            w[j] = 1.0 / m
        elif spans[j] > 0:
            w[j] = 1.0 / spans[j]
        else:
            w[j] = 0.0
    return w


def mad_distance(x: Case, x2: Case, cb: CaseBase) -> float:
    _check(x, x2, cb)
    w = mad_weights(cb)
    total = 0.0
    for j, f in enumerate(cb.schema.features):
        if f.is_numeric:
            total += w[j] * abs(float(x.values[j]) - float(x2.values[j]))
        elif str(x.values[j]) != str(x2.values[j]):
            total += 1.0
    return total


# vectorised kernels over encoded rows

def diff_counts_to_all(q: np.ndarray, cb: CaseBase) -> np.ndarray:
    return cb.differs(cb.X, q).sum(axis=1)


def distances_to_all(q: np.ndarray, cb: CaseBase, X: np.ndarray | None = None) -> np.ndarray:
    """normalized_distance from encoded ``q`` to every row of ``X`` (default cb.X).

    Terms are accumulated feature by feature, in the same order and with the
    same operations as the scalar version, so ties compare exactly equal.
    """
    X = cb.X if X is None else X
    return pairwise_distances(q[None, :], X, cb)[0]


def pairwise_distances(A: np.ndarray, B: np.ndarray, cb: CaseBase) -> np.ndarray:
    """normalized_distance between every row of ``A`` and every row of ``B``."""
    num = cb.numeric_mask
    spans = cb.spans
    out = np.zeros((A.shape[0], B.shape[0]))
    for j in range(cb.n_features):
        if num[j]:
            if spans[j] > 0:
                out += np.minimum(1.0, np.abs(A[:, j, None] - B[None, :, j]) / spans[j])
        else:
            out += A[:, j, None] != B[None, :, j]
    return out / cb.n_features
