"""Cross-validated explanatory competence and counterfactual distance.

Each fold holds out its queries, builds the XC base and trains the oracle on
the remaining cases, then generates counterfactuals for every query with
adaptation always run, so that the retrieval, adaptation and closest choices
are all read off one pass.

Coverage is cumulative: a query counts for a stage if it already had a good
counterfactual in the training portion or the generator explained it by then.
Relative counterfactual distance (RCF) divides a stage's mean distance by the
training portion's mean distance between cases and their nearest good
counterfactual. ``rcf`` averages each stage over its own successes (the
closest stage over their union); ``rcf_paired`` restricts all stages to queries
where both retrieval and adaptation succeeded, which makes the closest choice
no worse than either by construction.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import Case, CaseBase, make_folds
from .generator import ExplainConfig, explain, generate
from .metrics import count_diffs, normalized_distance, pairwise_distances
from .oracle import Oracle, train_knn
from .potential import BLOCK, GOOD_MAX_DIFFS, _label_codes
from .wachter import WachterConfig, nearest_other_class, wachter_search
from .xcb import build_xc_base

logger = logging.getLogger(__name__)

STAGES = ("baseline", "retrieval", "adaptation", "closest")
OracleFactory = Callable[[CaseBase], Oracle]


def knn_factory(k: int = 3) -> OracleFactory:
    return lambda cb: train_knn(cb, k)


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else None


def _unlabelled(c: Case) -> Case:
    return Case(c.id, c.values)


def nearest_good_cf(cb: CaseBase, target: np.ndarray, target_labels: np.ndarray,
                    exclude_self: bool = False) -> np.ndarray:
    """Distance from each target row to its nearest good counterfactual in cb.

    NaN where the row has none. Rows of ``target`` are encoded vectors.
    """
    y = _label_codes(cb)
    lookup = {c: k for k, c in enumerate(cb.classes)}
    ty = np.array([lookup.get(l, -1) for l in target_labels])
    out = np.full(len(target), np.nan)
    for s in range(0, len(target), BLOCK):
        e = min(len(target), s + BLOCK)
        counts = np.zeros((e - s, len(cb)), dtype=np.int16)
        for j in range(cb.n_features):
            counts += cb.differs(target[s:e, j, None], cb.X[None, :, j], j)
        ok = (counts >= 1) & (counts <= GOOD_MAX_DIFFS) & (ty[s:e, None] != y[None, :])
        if not ok.any():
            continue
        dist = np.where(ok, pairwise_distances(target[s:e], cb.X, cb), np.inf)
        best = dist.min(axis=1)
        out[s:e] = np.where(np.isfinite(best), best, np.nan)
    return out


@dataclass
class FoldResult:
    fold: int
    n_queries: int
    n_xcs: int
    coverage: dict
    generated: dict
    mean_distance: dict
    baseline_distance: float | None
    rcf: dict
    rcf_paired: dict
    failures: int
    soundness_violations: int
    plausibility_violations: int
    n_generated: int


@dataclass
class CompetenceReport:
    dataset: str
    tolerance: float | None
    tolerance_mode: str
    seed: int
    n_folds: int
    k: int | None
    coverage: dict
    generated: dict
    mean_distance: dict
    rcf: dict
    rcf_paired: dict
    failures: int
    n_queries: int
    mean_xcs: float
    n_generated: int
    soundness_violations: int
    plausibility_violations: int
    folds: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def r(d):
            return {k: (None if v is None else round(v, 6)) for k, v in d.items()}

        return {
            "dataset": self.dataset,
            "tolerance": self.tolerance,
            "tolerance_mode": self.tolerance_mode,
            "seed": self.seed,
            "n_folds": self.n_folds,
            "k": self.k,
            "n_queries": self.n_queries,
            "mean_xcs": round(self.mean_xcs, 3),
            "coverage": r(self.coverage),
            "generated_coverage": r(self.generated),
            "mean_cf_distance": r(self.mean_distance),
            "rcf": r(self.rcf),
            "rcf_paired": r(self.rcf_paired),
            "failures": self.failures,
            "n_generated": self.n_generated,
            "soundness_violations": self.soundness_violations,
            "plausibility_violations": self.plausibility_violations,
            "folds": [
                {"fold": f.fold, "n_queries": f.n_queries, "n_xcs": f.n_xcs,
                 "coverage": r(f.coverage), "rcf": r(f.rcf), "rcf_paired": r(f.rcf_paired),
                 "failures": f.failures}
                for f in self.folds
            ],
        }


def _plausible(q: Case, cf: Case, train: CaseBase, column_values: list) -> bool:
    """Every value the generator introduced occurs in the training fold at that position."""
    for j, (a, b) in enumerate(zip(q.values, cf.values)):
        if a != b and b not in column_values[j]:
            return False
    return True


def run_fold(cb: CaseBase, train_ids, test_ids, fold: int, oracle_factory: OracleFactory,
             tolerance: float | None, max_neighbors: int | None = None,
             threads: int | None = None) -> FoldResult:
    train = cb.subset(train_ids)
    if tolerance is not None:
        train = train.with_tolerance(tolerance)
    oracle = oracle_factory(train)
    xcb = build_xc_base(train, threads=threads)
    queries = [_unlabelled(cb.case(i)) for i in test_ids]
    qlabels = np.array([cb.case(i).label for i in test_ids], dtype=object)
    Q = np.array([train.encode(q) for q in queries])

    has_base = ~np.isnan(nearest_good_cf(train, Q, qlabels))
    train_nn = nearest_good_cf(train, train.X, train.labels)
    base_dist = _mean(train_nn[~np.isnan(train_nn)])

    columns = [set(c.values[j] for c in train.cases) for j in range(train.n_features)]
    got_r = np.zeros(len(queries), bool)
    got_a = np.zeros(len(queries), bool)
    d_r, d_a, d_c, paired = [], [], [], []
    sound_bad = plaus_bad = n_gen = 0

    for k, q in enumerate(queries):
        if not len(xcb):
            continue
        c = generate(q, xcb, oracle, adapt_always=True, max_neighbors=max_neighbors)
        dr = da = None
        for cf in (c.retrieval, c.adaptation):
            if cf is None:
                continue
            n_gen += 1
            n_diff = count_diffs(q, cf, train).count
            if not 1 <= n_diff <= GOOD_MAX_DIFFS or oracle.classify(cf) == c.query_class:
                sound_bad += 1
            if not _plausible(q, cf, train, columns):
                plaus_bad += 1
        if c.retrieval is not None:
            got_r[k] = True
            dr = normalized_distance(q, c.retrieval, train)
            d_r.append(dr)
        if c.adaptation is not None:
            got_a[k] = True
            da = normalized_distance(q, c.adaptation, train)
            d_a.append(da)
        if dr is not None or da is not None:
            d_c.append(min(d for d in (dr, da) if d is not None))
        if dr is not None and da is not None:
            paired.append((dr, da, min(dr, da)))

    n = len(queries)
    cov = {
        "baseline": float(has_base.mean()),
        "retrieval": float((has_base | got_r).mean()),
        "adaptation": float((has_base | got_r | got_a).mean()),
    }
    cov["closest"] = cov["adaptation"]
    generated = {"retrieval": float(got_r.mean()), "adaptation": float((got_r | got_a).mean())}
    mean_d = {"baseline": base_dist, "retrieval": _mean(d_r), "adaptation": _mean(d_a),
              "closest": _mean(d_c)}

    rcf = dict.fromkeys(STAGES)
    rcf_p = dict.fromkeys(STAGES)
    if base_dist:
        rcf["baseline"] = rcf_p["baseline"] = 1.0
        for s in ("retrieval", "adaptation", "closest"):
            if mean_d[s] is not None:
                rcf[s] = mean_d[s] / base_dist
        if paired:
            p = np.array(paired)
            rcf_p["retrieval"], rcf_p["adaptation"], rcf_p["closest"] = (p.mean(axis=0) / base_dist).tolist()
    else:
        logger.warning("%s fold %d: no good counterfactuals in the training portion; RCF undefined",
                       cb.name, fold)

    return FoldResult(fold, n, len(xcb), cov, generated, mean_d, base_dist, rcf, rcf_p,
                      int((~(got_r | got_a)).sum()), sound_bad, plaus_bad, n_gen)


def _avg(dicts, keys):
    out = {}
    for key in keys:
        vals = [d[key] for d in dicts if d.get(key) is not None]
        out[key] = float(np.mean(vals)) if vals else None
    return out


def evaluate(cb: CaseBase, oracle_factory: OracleFactory | None = None,
             tolerance: float | None = None, seed: int = 0, n_folds: int = 10,
             max_neighbors: int | None = None, threads: int | None = None,
             k: int | None = 3) -> CompetenceReport:
    """Averages over folds; RCF averages skip folds where it is undefined."""
    if oracle_factory is None:
        oracle_factory = knn_factory(k or 3)
    plan = make_folds(cb, seed, n_folds)
    folds = []
    for f in range(n_folds):
        train_ids, test_ids = plan.split(f)
        folds.append(run_fold(cb, train_ids, test_ids, f, oracle_factory, tolerance,
                              max_neighbors, threads))
    mode = cb.schema.tolerance_mode
    # paired averages only over folds where every stage is defined, so the
    # closest <= min(retrieval, adaptation) ordering survives averaging
    full = [f.rcf_paired for f in folds if all(v is not None for v in f.rcf_paired.values())]
    return CompetenceReport(
        dataset=cb.name, tolerance=tolerance, tolerance_mode=mode, seed=seed, n_folds=n_folds, k=k,
        coverage=_avg([f.coverage for f in folds], STAGES),
        generated=_avg([f.generated for f in folds], ("retrieval", "adaptation")),
        mean_distance=_avg([f.mean_distance for f in folds], STAGES),
        rcf=_avg([f.rcf for f in folds], STAGES),
        rcf_paired=_avg(full, STAGES),
        failures=sum(f.failures for f in folds),
        n_queries=sum(f.n_queries for f in folds),
        mean_xcs=float(np.mean([f.n_xcs for f in folds])),
        n_generated=sum(f.n_generated for f in folds),
        soundness_violations=sum(f.soundness_violations for f in folds),
        plausibility_violations=sum(f.plausibility_violations for f in folds),
        folds=folds,
    )


def figure_tables(reports) -> tuple[str, str]:
    """Plot-ready CSV text: coverage per stage, and RCF per stage, one row per dataset."""
    def table(metric, stages):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset"] + list(stages))
        for rep in reports:
            vals = getattr(rep, metric)
            w.writerow([rep.dataset] + ["" if vals[s] is None else f"{vals[s]:.4f}" for s in stages])
        return buf.getvalue()

    return (table("coverage", ("baseline", "retrieval", "adaptation")),
            table("rcf", ("retrieval", "adaptation", "closest")))


# CBR generator against the perturbation baseline

@dataclass(frozen=True)
class QueryRecord:
    fold: int
    query_id: int
    method: str
    success: bool
    diffs: int | None
    distance: float | None


def compare_baselines(cb: CaseBase, oracle_factory: OracleFactory | None = None,
                      seed: int = 0, tolerance: float | None = None, n_folds: int = 10,
                      lambdas=(0.1, 1.0, 10.0, 100.0), max_iterations: int = 200,
                      max_queries: int | None = None, k: int = 3) -> dict:
    """Run both generators on the same folds and queries.

    ``max_queries`` caps queries per fold (the perturbation search is slow).
    """
    if oracle_factory is None:
        oracle_factory = knn_factory(k)
    plan = make_folds(cb, seed, n_folds)
    records = []
    cfg = ExplainConfig(use_existing=False, adapt=True)
    for f in range(n_folds):
        train_ids, test_ids = plan.split(f)
        train = cb.subset(train_ids)
        if tolerance is not None:
            train = train.with_tolerance(tolerance)
        oracle = oracle_factory(train)
        xcb = build_xc_base(train)
        for qid in test_ids[:max_queries]:
            q = _unlabelled(cb.case(qid))
            if len(xcb):
                out = explain(q, train, xcb, oracle, cfg)
                cf = out.counterfactual
            else:
                cf = None
            records.append(_record(f, qid, "cbr", q, cf, train))

            wcfg = WachterConfig(nearest_other_class(q, oracle), tuple(lambdas), max_iterations, seed)
            res = wachter_search(q, train, oracle, wcfg)
            records.append(_record(f, qid, "wachter", q, res.counterfactual, train))
    return {"dataset": cb.name, "seed": seed, "tolerance": tolerance,
            "methods": summarize(records), "records": records}


def _record(fold, qid, method, q, cf, train):
    if cf is None:
        return QueryRecord(fold, qid, method, False, None, None)
    return QueryRecord(fold, qid, method, True, count_diffs(q, cf, train).count,
                       normalized_distance(q, cf, train))


def summarize(records) -> dict:
    out = {}
    for method in sorted({r.method for r in records}):
        rs = [r for r in records if r.method == method]
        ok = [r for r in rs if r.success]
        out[method] = {
            "queries": len(rs),
            "coverage": len(ok) / len(rs) if rs else None,
            "mean_diffs": _mean([r.diffs for r in ok]),
            "mean_distance": _mean([r.distance for r in ok]),
            "failure_rate": 1 - len(ok) / len(rs) if rs else None,
        }
    return out
