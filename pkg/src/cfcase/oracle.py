"""Labelling models ("twins") that classify arbitrary, possibly synthetic, cases.

Anything with ``classes``, ``classify`` and ``classify_batch`` works as an
oracle. ``scores`` is optional and only needed by the perturbation baseline.
"""

from __future__ import annotations

import csv
import io
import subprocess
from collections import Counter
from typing import Callable, Sequence

import numpy as np

from .data import Case, CaseBase, DataError
from .metrics import pairwise_distances


class Oracle:
    classes: tuple = ()

    def classify(self, case: Case) -> str:
        return self.classify_batch([case])[0]

    def classify_batch(self, cases: Sequence[Case]) -> list[str]:
        return [self.classify(c) for c in cases]

    def scores(self, case: Case) -> dict[str, float]:
        raise NotImplementedError(f"{type(self).__name__} exposes no class scores")


class KNNOracle(Oracle):
    """k-NN over normalized distance.

    Distance ties go to the smaller case id; vote ties go to the label of the
    nearest neighbour carrying one of the tied labels.
    """

    def __init__(self, cb: CaseBase, k: int = 3, temperature: float = 0.05):
        if k < 1:
            raise ValueError("k must be positive")
        if k > len(cb):
            raise ValueError(f"k={k} exceeds the {len(cb)} training cases")
        self.cb = cb
        self.k = k
        self.temperature = temperature
        order = np.argsort(cb.ids, kind="stable")
        self._X = cb.X[order]
        self._labels = cb.labels[order]
        self.classes = cb.classes
        self._class_rows = {c: np.flatnonzero(self._labels == c) for c in self.classes}

    def _encode(self, cases: Sequence[Case]) -> np.ndarray:
        return np.array([self.cb.encode(c) for c in cases]).reshape(len(cases), self.cb.n_features)

    def _nearest(self, dist: np.ndarray, k: int) -> np.ndarray:
        kth = np.partition(dist, k - 1)[k - 1]
        idx = np.flatnonzero(dist <= kth)
        idx = idx[np.argsort(dist[idx], kind="stable")]
        return idx[:k]

    def _vote(self, nbrs: np.ndarray) -> str:
        labs = self._labels[nbrs]
        tally = Counter(labs.tolist())
        top = max(tally.values())
        tied = {lab for lab, n in tally.items() if n == top}
        for lab in labs:
            if lab in tied:
                return lab
        raise AssertionError("unreachable")

    def classify_batch(self, cases: Sequence[Case]) -> list[str]:
        if not cases:
            return []
        D = pairwise_distances(self._encode(cases), self._X, self.cb)
        return [self._vote(self._nearest(row, self.k)) for row in D]

    def classify_encoded(self, Q: np.ndarray) -> list[str]:
        D = pairwise_distances(Q, self._X, self.cb)
        return [self._vote(self._nearest(row, self.k)) for row in D]

    def scores_encoded(self, Q: np.ndarray) -> np.ndarray:
        """(n, n_classes) softmax of negative mean k-nearest distance per class."""
        D = pairwise_distances(Q, self._X, self.cb)
        near = np.empty((Q.shape[0], len(self.classes)))
        for c, cls in enumerate(self.classes):
            sub = D[:, self._class_rows[cls]]
            kk = min(self.k, sub.shape[1])
            near[:, c] = np.sort(sub, axis=1)[:, :kk].mean(axis=1)
        z = -near / self.temperature
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def scores(self, case: Case) -> dict[str, float]:
        row = self.scores_encoded(self._encode([case]))[0]
        return {cls: float(s) for cls, s in zip(self.classes, row)}


def train_knn(cb: CaseBase, k: int = 3) -> KNNOracle:
    return KNNOracle(cb, k)


class FunctionOracle(Oracle):
    """Wrap a plain function of the value tuple, e.g. a fitted sklearn model."""

    def __init__(self, fn: Callable[[tuple], str], classes: Sequence[str],
                 score_fn: Callable[[tuple], dict] | None = None):
        self.fn = fn
        self.classes = tuple(classes)
        self.score_fn = score_fn

    def classify(self, case: Case) -> str:
        return self.fn(case.values)

    def scores(self, case: Case) -> dict[str, float]:
        if self.score_fn is None:
            return super().scores(case)
        return self.score_fn(case.values)


class SubprocessOracle(Oracle):
    """External model spoken to over stdin/stdout.

    Each batch starts ``command`` once, writes one case per line as a CSV row
    of feature values and expects exactly one predicted label per line back.
    """

    def __init__(self, command: Sequence[str], classes: Sequence[str], timeout: float = 60.0):
        self.command = list(command)
        self.classes = tuple(classes)
        self.timeout = timeout

    def classify_batch(self, cases: Sequence[Case]) -> list[str]:
        if not cases:
            return []
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for c in cases:
            w.writerow([repr(v) if isinstance(v, float) else v for v in c.values])
        proc = subprocess.run(self.command, input=buf.getvalue(), capture_output=True,
                              text=True, timeout=self.timeout)
        if proc.returncode != 0:
            raise DataError(f"oracle command failed ({proc.returncode}): {proc.stderr.strip()}")
        labels = [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]
        if len(labels) != len(cases):
            raise DataError(f"oracle returned {len(labels)} labels for {len(cases)} cases")
        return labels

    def classify(self, case: Case) -> str:
        return self.classify_batch([case])[0]
