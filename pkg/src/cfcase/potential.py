"""Counterfactual potential: how many features separate cross-class case pairs."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import CaseBase

GOOD_MAX_DIFFS = 2
BLOCK = 256


@dataclass(frozen=True)
class PotentialReport:
    dataset: str
    n_cases: int
    n_features: int
    n_classes: int
    tolerance: float | None
    n_pairs: int
    histogram: dict  # diff count -> number of unordered cross-class pairs

    @property
    def percentages(self) -> dict:
        if not self.n_pairs:
            return {}
        return {k: 100.0 * v / self.n_pairs for k, v in self.histogram.items()}

    @property
    def good_fraction(self) -> float:
        """Percent of cross-class pairs with at most two differences."""
        pct = self.percentages
        return sum(v for k, v in pct.items() if k <= GOOD_MAX_DIFFS)

    def binned(self) -> dict:
        """Percentages in the table layout: 0..4 individually, then >=5."""
        pct = self.percentages
        out = {f"{k}-diff": pct.get(k, 0.0) for k in range(5)}
        out[">=5-diff"] = sum(v for k, v in pct.items() if k >= 5)
        return out

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "n_cases": self.n_cases,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "tolerance": self.tolerance,
            "n_pairs": self.n_pairs,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "percentages": {str(k): round(v, 1) for k, v in sorted(self.percentages.items())},
            "good_fraction": round(self.good_fraction, 1),
        }


CSV_COLUMNS = ["dataset", "N", "features", "classes", "pairs",
               "1-diff", "2-diff", "3-diff", "4-diff", ">=5-diff", "0-diff"]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        b = r.binned()
        w.writerow([r.dataset, r.n_cases, r.n_features, r.n_classes, r.n_pairs]
                   + [f"{b[c]:.1f}" for c in CSV_COLUMNS[5:]])
    return buf.getvalue()


def _label_codes(cb: CaseBase) -> np.ndarray:
    lookup = {c: k for k, c in enumerate(cb.classes)}
    return np.array([lookup[l] for l in cb.labels])


def _block_counts(cb: CaseBase, y: np.ndarray, start: int, stop: int) -> np.ndarray:
    """Diff counts for pairs (i, j), start <= i < stop, j > i; -1 marks same-class pairs."""
    X = cb.X
    rows = X[start:stop]
    counts = np.zeros((stop - start, len(cb)), dtype=np.int16)
    for j in range(cb.n_features):
        counts += cb.differs(rows[:, j, None], X[None, :, j], j)
    i = np.arange(start, stop)[:, None]
    keep = (np.arange(len(cb))[None, :] > i) & (y[start:stop, None] != y[None, :])
    return np.where(keep, counts, -1)


def _blocks(n: int):
    return [(s, min(n, s + BLOCK)) for s in range(0, n, BLOCK)]


def _run(fn, blocks, threads):
    threads = threads or os.cpu_count() or 1
    if threads == 1 or len(blocks) == 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, blocks))


def analyze_potential(cb: CaseBase, tolerance: float | None = None,
                      threads: int | None = None) -> PotentialReport:
    """Histogram of feature-difference counts over unordered cross-class pairs."""
    if tolerance is not None:
        cb = cb.with_tolerance(tolerance)
    y = _label_codes(cb)
    d = cb.n_features

    def work(block):
        c = _block_counts(cb, y, *block)
        return np.bincount(c[c >= 0].ravel(), minlength=d + 1)

    hist = np.zeros(d + 1, dtype=np.int64)
    for part in _run(work, _blocks(len(cb)), threads):
        hist += part
    histogram = {k: int(v) for k, v in enumerate(hist) if v}
    return PotentialReport(cb.name, len(cb), d, len(cb.classes), tolerance,
                           int(hist.sum()), histogram)


def good_cf_mask(cb: CaseBase, threads: int | None = None) -> np.ndarray:
    """Per case: does some case of another class differ in 1 or 2 features?"""
    y = _label_codes(cb)
    n = len(cb)
    X = cb.X

    def work(block):
        s, e = block
        counts = np.zeros((e - s, n), dtype=np.int16)
        for j in range(cb.n_features):
            counts += cb.differs(X[s:e, j, None], X[None, :, j], j)
        ok = (counts >= 1) & (counts <= GOOD_MAX_DIFFS) & (y[s:e, None] != y[None, :])
        return ok.any(axis=1)

    return np.concatenate(_run(work, _blocks(n), threads))


def good_cf_availability(cb: CaseBase, threads: int | None = None) -> float:
    """Fraction of cases that have a good counterfactual among the other cases."""
    return float(good_cf_mask(cb, threads).mean())
