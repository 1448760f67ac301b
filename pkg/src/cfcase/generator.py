"""Case-based counterfactual generation: retrieve an XC, reuse its difference
pattern on the query, validate with the oracle, and if that fails revise the
difference values from nearest neighbours of the counterfactual class.

All orderings break distance ties on the smaller case id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Case, CaseBase
from .metrics import diff_counts_to_all, distances_to_all, normalized_distance
from .oracle import Oracle
from .potential import GOOD_MAX_DIFFS
from .xcb import ExplanationCase, NoExplanationCases, XCBase

EXISTING = "existing"
RETRIEVAL = "retrieval"
ADAPTATION = "adaptation"
FAILED = "failed"


@dataclass(frozen=True)
class ExplainConfig:
    use_existing: bool = True
    adapt: bool = True
    prefer_closest: bool = False
    max_neighbors: int | None = None
    batch_size: int = 32


@dataclass(frozen=True)
class GenerationOutcome:
    query: Case
    query_class: str
    stage: str
    counterfactual: Case | None = None
    counterfactual_class: str | None = None
    used_xc: ExplanationCase | None = None
    donor_id: int | None = None
    distance: float | None = None
    candidates_tried: int = 0

    @property
    def ok(self) -> bool:
        return self.stage != FAILED


@dataclass(frozen=True)
class Candidates:
    """Both generation routes for one query, before any choice is made."""

    query_class: str
    xc: ExplanationCase
    retrieval: Case | None
    retrieval_class: str | None
    adaptation: Case | None
    adaptation_class: str | None
    donor_id: int | None
    tried: int


def _sorted_by_distance(q: Case, cb: CaseBase, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``positions`` reordered by (distance to q, case id), plus their distances."""
    dist = distances_to_all(cb.encode(q), cb, cb.X[positions])
    order = np.lexsort((cb.ids[positions], dist))
    return positions[order], dist[order]


def retrieve_xc(p: Case, xcb: XCBase, cb: CaseBase | None = None) -> ExplanationCase:
    """The XC whose query side is nearest to ``p``."""
    if not len(xcb):
        raise NoExplanationCases("the explanation case-base is empty")
    cb = xcb.case_base if cb is None else cb
    qids = xcb.query_ids()
    pos = np.array([cb.position(int(i)) for i in qids])
    dist = distances_to_all(cb.encode(p), cb, cb.X[pos])
    best = np.lexsort((xcb.cf_ids(), qids, dist))[0]
    return xcb.xcs[best]


def reuse(p: Case, xc: ExplanationCase, cb: CaseBase) -> Case:
    """Query values on the match features, counterfactual values on the diff features."""
    return p.replace(xc.diff_features, cb.case(xc.cf_id))


def _changed(q: Case, cand: Case, cb: CaseBase) -> bool:
    """Whether ``cand`` differs from ``q`` in at least one feature beyond tolerance.

    Substituted values can land within tolerance of the query's own; such a
    candidate is not a change at all, whatever the oracle says about it.
    """
    return bool(cb.differs(cb.encode(cand), cb.encode(q)).any())


def validate(candidate: Case, p: Case, oracle: Oracle, p_class: str | None = None) -> bool:
    if p_class is None:
        p_class = oracle.classify(p)
    return oracle.classify(candidate) != p_class


def _first_flip(candidates, oracle, q_class, batch_size):
    """Scan candidates in order; return (index, label) of the first class change."""
    for s in range(0, len(candidates), batch_size):
        labels = oracle.classify_batch(candidates[s:s + batch_size])
        for k, lab in enumerate(labels):
            if lab != q_class:
                return s + k, lab
    return None, None


def adapt(q: Case, xc: ExplanationCase, cb: CaseBase, oracle: Oracle,
          max_neighbors: int | None = None, q_class: str | None = None,
          batch_size: int = 32):
    """Revise the diff-feature values from ordered nearest neighbours of q.

    Donors are cases labelled like the XC's counterfactual side; a donor whose
    values leave q unchanged within tolerance is skipped. Returns
    ``(candidate, donor_id, label, tried)``; candidate is None when no donor
    within ``max_neighbors`` flips the class.
    """
    if q_class is None:
        q_class = oracle.classify(q)
    target = cb.case(xc.cf_id).label
    donors = np.flatnonzero(cb.labels == target)
    donors, _ = _sorted_by_distance(q, cb, donors)
    if max_neighbors is not None:
        donors = donors[:max_neighbors]
    cands, kept = [], []
    for k in donors:
        c = q.replace(xc.diff_features, cb.cases[k])
        if _changed(q, c, cb):
            cands.append(c)
            kept.append(k)
    donors = np.array(kept, dtype=np.int64)
    hit, lab = _first_flip(cands, oracle, q_class, batch_size)
    if hit is None:
        return None, None, None, len(cands)
    return cands[hit], int(cb.ids[donors[hit]]), lab, hit + 1


def find_existing(q: Case, cb: CaseBase, oracle: Oracle, q_class: str, batch_size: int = 32):
    """Nearest stored case within 1-2 differences that the oracle labels differently."""
    enc = cb.encode(q)
    counts = diff_counts_to_all(enc, cb)
    pos = np.flatnonzero((counts >= 1) & (counts <= GOOD_MAX_DIFFS))
    if not pos.size:
        return None, None, 0
    pos, _ = _sorted_by_distance(q, cb, pos)
    cases = [cb.cases[k] for k in pos]
    hit, lab = _first_flip(cases, oracle, q_class, batch_size)
    if hit is None:
        return None, None, len(cases)
    return cases[hit], lab, hit + 1


def generate(q: Case, xcb: XCBase, oracle: Oracle, q_class: str | None = None,
             adapt_always: bool = False, max_neighbors: int | None = None,
             batch_size: int = 32, cb: CaseBase | None = None) -> Candidates:
    """Run retrieval/reuse and (if needed, or always) adaptation for one query."""
    cb = xcb.case_base if cb is None else cb
    if q_class is None:
        q_class = oracle.classify(q)
    xc = retrieve_xc(q, xcb, cb)
    cand = reuse(q, xc, cb)
    cand_class = oracle.classify(cand)
    tried = 1
    retrieval = cand if cand_class != q_class and _changed(q, cand, cb) else None
    adapted = adapted_class = donor = None
    if retrieval is None or adapt_always:
        adapted, donor, adapted_class, n = adapt(q, xc, cb, oracle, max_neighbors, q_class, batch_size)
        tried += n
    return Candidates(q_class, xc, retrieval, cand_class if retrieval is not None else None,
                      adapted, adapted_class, donor, tried)


def explain(q: Case, cb: CaseBase, xcb: XCBase, oracle: Oracle,
            config: ExplainConfig = ExplainConfig()) -> GenerationOutcome:
    """Find or generate a good counterfactual for ``q``.

    The query's class is whatever the oracle says, not any stored label.
    """
    q_class = oracle.classify(q)
    tried = 0
    if config.use_existing:
        found, lab, tried = find_existing(q, cb, oracle, q_class, config.batch_size)
        if found is not None:
            return GenerationOutcome(q, q_class, EXISTING, found, lab,
                                     distance=normalized_distance(q, found, cb),
                                     candidates_tried=tried)

    if not len(xcb):
        return GenerationOutcome(q, q_class, FAILED, candidates_tried=tried)

    if not config.adapt:
        xc = retrieve_xc(q, xcb, cb)
        cand = reuse(q, xc, cb)
        lab = oracle.classify(cand)
        tried += 1
        if lab != q_class and _changed(q, cand, cb):
            return GenerationOutcome(q, q_class, RETRIEVAL, cand, lab, xc,
                                     distance=normalized_distance(q, cand, cb),
                                     candidates_tried=tried)
        return GenerationOutcome(q, q_class, FAILED, used_xc=xc, candidates_tried=tried)

    c = generate(q, xcb, oracle, q_class, adapt_always=config.prefer_closest,
                 max_neighbors=config.max_neighbors, batch_size=config.batch_size, cb=cb)
    tried += c.tried
    options = []
    if c.retrieval is not None:
        options.append((normalized_distance(q, c.retrieval, cb), 0, RETRIEVAL,
                        c.retrieval, c.retrieval_class, None))
    if c.adaptation is not None:
        options.append((normalized_distance(q, c.adaptation, cb), 1, ADAPTATION,
                        c.adaptation, c.adaptation_class, c.donor_id))
    if not options:
        return GenerationOutcome(q, q_class, FAILED, used_xc=c.xc, candidates_tried=tried)
    dist, _, stage, cf, lab, donor = min(options, key=lambda o: (o[0], o[1]))
    return GenerationOutcome(q, q_class, stage, cf, lab, c.xc, donor, dist, tried)
