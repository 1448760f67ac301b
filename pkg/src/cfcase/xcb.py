"""Explanation cases (XCs): cross-class pairs differing in one or two features.

An XC keeps ids and feature-index sets only; values are read back from the
live case-base when the pattern is reused.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Case, CaseBase, DataError
from .metrics import count_diffs
from .potential import BLOCK, GOOD_MAX_DIFFS, _label_codes, _run


class NoExplanationCases(Exception):
    """Raised when generation is asked to retrieve from an empty XC base."""


@dataclass(frozen=True)
class ExplanationCase:
    query_id: int
    cf_id: int
    match_features: frozenset
    diff_features: frozenset

    def swapped(self) -> "ExplanationCase":
        return ExplanationCase(self.cf_id, self.query_id, self.match_features, self.diff_features)


def is_xc(a: Case, b: Case, cb: CaseBase) -> bool:
    """Different classes and 1 or 2 feature differences.

    Zero-difference pairs are excluded: they carry no change to explain.
    """
    return a.label != b.label and 1 <= count_diffs(a, b, cb).count <= GOOD_MAX_DIFFS


@dataclass(frozen=True, eq=False)
class XCBase:
    xcs: tuple[ExplanationCase, ...]
    case_base: CaseBase
    tolerance: float | None = None

    def __len__(self):
        return len(self.xcs)

    def __iter__(self):
        return iter(self.xcs)

    @property
    def n_ordered(self) -> int:
        return len(self.xcs)

    @property
    def n_unordered(self) -> int:
        return len(self.xcs) // 2

    def query_ids(self) -> np.ndarray:
        return np.array([x.query_id for x in self.xcs], dtype=np.int64)

    def cf_ids(self) -> np.ndarray:
        return np.array([x.cf_id for x in self.xcs], dtype=np.int64)

    def revalidate(self) -> list[ExplanationCase]:
        """XCs whose stored feature sets no longer agree with count_diffs."""
        cb = self.case_base
        bad = []
        for x in self.xcs:
            a, b = cb.case(x.query_id), cb.case(x.cf_id)
            r = count_diffs(a, b, cb)
            if (not is_xc(a, b, cb) or r.diff_features != x.diff_features
                    or r.match_features != x.match_features):
                bad.append(x)
        return bad

    def to_dict(self) -> dict:
        return {
            "dataset": self.case_base.name,
            "tolerance": self.tolerance,
            "n_cases": len(self.case_base),
            "n_ordered": self.n_ordered,
            "n_unordered": self.n_unordered,
            "xcs": [{"query": x.query_id, "cf": x.cf_id, "diff": sorted(x.diff_features)}
                    for x in self.xcs],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, d: dict, cb: CaseBase) -> "XCBase":
        every = frozenset(range(cb.n_features))
        try:
            xcs = tuple(
                ExplanationCase(int(e["query"]), int(e["cf"]),
                                every - frozenset(e["diff"]), frozenset(e["diff"]))
                for e in d["xcs"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed XC file: {exc}") from None
        known = set(int(i) for i in cb.ids)
        for x in xcs:
            if x.query_id not in known or x.cf_id not in known:
                raise DataError(f"XC ({x.query_id}, {x.cf_id}) refers to unknown cases")
        return cls(xcs, cb, d.get("tolerance"))

    @classmethod
    def load(cls, path, cb: CaseBase) -> "XCBase":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh), cb)
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from None


def build_xc_base(cb: CaseBase, tolerance: float | None = None,
                  threads: int | None = None) -> XCBase:
    """All ordered pairs (c, c') satisfying the XC predicate.

    ``tolerance`` overrides every numeric feature's tolerance; ``None`` keeps
    the schema's. XCs are ordered by (query id, cf id).
    """
    if tolerance is not None:
        cb = cb.with_tolerance(tolerance)
    y = _label_codes(cb)
    n, X = len(cb), cb.X

    def work(block):
        s, e = block
        masks = cb.differs(X[s:e, None, :], X[None, :, :])
        counts = masks.sum(axis=2)
        ok = (counts >= 1) & (counts <= GOOD_MAX_DIFFS) & (y[s:e, None] != y[None, :])
        ii, jj = np.nonzero(ok)
        return [(s + i, j, masks[i, j]) for i, j in zip(ii.tolist(), jj.tolist())]

    # masks are (block, n, d) here, so keep blocks small
    blocks = [(s, min(n, s + max(1, BLOCK // 8))) for s in range(0, n, max(1, BLOCK // 8))]
    every = frozenset(range(cb.n_features))
    found = []
    for part in _run(work, blocks, threads):
        for i, j, m in part:
            diff = frozenset(np.flatnonzero(m).tolist())
            found.append(ExplanationCase(int(cb.ids[i]), int(cb.ids[j]), every - diff, diff))
    found.sort(key=lambda x: (x.query_id, x.cf_id))
    return XCBase(tuple(found), cb, tolerance)


def xp_coverage(cb: CaseBase, explains: Callable[[Case, Case], bool]) -> float:
    """Fraction of cases c' for which some other case c satisfies explains(c, c')."""
    covered = 0
    for target in cb.cases:
        if any(explains(c, target) for c in cb.cases if c.id != target.id):
            covered += 1
    return covered / len(cb)


def xc_coverage(xcb: XCBase) -> float:
    """XP coverage under the XC relation, read off a built XC base."""
    return len({x.cf_id for x in xcb.xcs}) / len(xcb.case_base)
