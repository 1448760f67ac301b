"""Perturbation baseline: minimise lam * (score - 1)^2 + MAD-L1 distance.

The default oracle is not differentiable, so the loss is minimised by greedy
coordinate descent on a lattice: each step takes the single-feature move (one
percent of the feature's range for numerics, any observed symbol for
categoricals) that lowers the loss most, lowest feature index first on ties.
Descent runs until no move helps; if the oracle then assigns the point to the
target class it is returned, otherwise lambda grows through the schedule and
descent resumes from the current point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Case, CaseBase
from .metrics import mad_distance, mad_weights
from .oracle import KNNOracle, Oracle

STEP_FRACTION = 0.01


@dataclass(frozen=True)
class WachterConfig:
    target_class: str
    lambdas: tuple = (0.1, 1.0, 10.0, 100.0)
    max_iterations: int = 200
    # no stochastic component yet; carried so runs record their seed
    seed: int = 0

    def __post_init__(self):
        lams = tuple(self.lambdas)
        if not lams or any(l <= 0 for l in lams) or any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("lambda schedule must be non-empty, positive and strictly ascending")


@dataclass(frozen=True)
class WachterResult:
    counterfactual: Case | None
    lam: float | None
    loss: float | None
    iterations: int


def wachter_loss(x: Case, x2: Case, target_score: float, score: float, lam: float,
                 cb: CaseBase) -> float:
    return lam * (score - target_score) ** 2 + mad_distance(x, x2, cb)


class _Space:
    """Encoded search space around one query."""

    def __init__(self, q: Case, cb: CaseBase, oracle: Oracle, target: str):
        self.q, self.cb, self.oracle, self.target = q, cb, oracle, target
        self.x0 = cb.encode(q)
        self.num = cb.numeric_mask
        self.step = STEP_FRACTION * cb.spans
        self.w = mad_weights(cb)
        self.inverse = [None if v is None else {code: s for s, code in v.items()} for v in cb.vocab]
        moves = []
        for j in range(cb.n_features):
            if self.num[j]:
                if self.step[j] > 0:
                    moves += [(j, -1), (j, +1)]
            else:
                moves += [(j, code) for code in sorted(self.inverse[j])]
        self.moves = moves
        self._fast = isinstance(oracle, KNNOracle) and oracle.cb is cb
        if self._fast:
            self._t = oracle.classes.index(target)

    def point(self, steps: np.ndarray, cats: np.ndarray) -> np.ndarray:
        x = np.where(self.num, self.x0 + steps * self.step, cats)
        return x

    def decode(self, x: np.ndarray) -> Case:
        vals = []
        for j in range(self.cb.n_features):
            if self.num[j]:
                vals.append(float(x[j]))
            else:
                code = int(x[j])
                vals.append(self.inverse[j].get(code, self.q.values[j]) if code >= 0 else self.q.values[j])
        return Case(None, tuple(vals))

    def distance(self, X: np.ndarray) -> np.ndarray:
        d = np.abs(X - self.x0)
        return np.where(self.num, self.w * d, d != 0).sum(axis=1)

    def scores(self, X: np.ndarray) -> np.ndarray:
        if self._fast:
            return self.oracle.scores_encoded(X)[:, self._t]
        return np.array([self.oracle.scores(self.decode(x)).get(self.target, 0.0) for x in X])

    def label(self, x: np.ndarray) -> str:
        if self._fast:
            return self.oracle.classify_encoded(x[None, :])[0]
        return self.oracle.classify(self.decode(x))


def wachter_search(q: Case, cb: CaseBase, oracle: Oracle, config: WachterConfig) -> WachterResult:
    if oracle.classify(q) == config.target_class:
        raise ValueError("query is already assigned to the target class")
    sp = _Space(q, cb, oracle, config.target_class)
    steps = np.zeros(cb.n_features)
    cats = sp.x0.copy()
    iterations = 0
    for lam in config.lambdas:
        x = sp.point(steps, cats)
        cur = lam * (sp.scores(x[None, :])[0] - 1.0) ** 2 + sp.distance(x[None, :])[0]
        for _ in range(config.max_iterations):
            trial_steps = np.repeat(steps[None, :], len(sp.moves), axis=0)
            trial_cats = np.repeat(cats[None, :], len(sp.moves), axis=0)
            for m, (j, v) in enumerate(sp.moves):
                if sp.num[j]:
                    trial_steps[m, j] += v
                else:
                    trial_cats[m, j] = v
            X = np.where(sp.num, sp.x0 + trial_steps * sp.step, trial_cats)
            loss = lam * (sp.scores(X) - 1.0) ** 2 + sp.distance(X)
            best = int(np.argmin(loss))  # first minimum = lowest feature index
            if not loss[best] < cur:
                break
            iterations += 1
            steps, cats, cur = trial_steps[best], trial_cats[best], float(loss[best])
            x = X[best]
        if sp.label(x) == config.target_class:
            return WachterResult(sp.decode(x), lam, cur, iterations)
    return WachterResult(None, None, None, iterations)


def generate_wachter(q: Case, cb: CaseBase, oracle: Oracle, config: WachterConfig) -> Case | None:
    return wachter_search(q, cb, oracle, config).counterfactual


def nearest_other_class(q: Case, oracle: Oracle) -> str:
    """Target for an undirected search: the highest-scoring class other than q's."""
    own = oracle.classify(q)
    sc = oracle.scores(q)
    others = [c for c in oracle.classes if c != own]
    return max(others, key=lambda c: (sc.get(c, 0.0), -others.index(c)))
