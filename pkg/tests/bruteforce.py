"""Plain-Python reference implementation of explain() for small case-bases.

Independent of the vectorised code paths: differences, distances and all
orderings are recomputed from raw values. Tie rules: nearest first, then
smaller query id, then smaller counterfactual id; donors by (distance, id).
Candidates equal to the query within tolerance never count as counterfactuals.
"""

from cfcase.data import Case


def diffs(a, b, cb):
    out = []
    for j, f in enumerate(cb.schema.features):
        x, y = a[j], b[j]
        if f.is_numeric:
            x, y = float(x), float(y)
            if cb.schema.tolerance_mode == "range":
                lo, hi = cb.ranges[j]
                same = abs(x - y) <= f.tolerance * (hi - lo)
            else:
                same = abs(x - y) <= f.tolerance * max(abs(x), abs(y))
        else:
            same = str(x) == str(y)
        if not same:
            out.append(j)
    return out


def dist(a, b, cb):
    total = 0.0
    for j, f in enumerate(cb.schema.features):
        if f.is_numeric:
            lo, hi = cb.ranges[j]
            if hi > lo:
                total += min(1.0, abs(float(a[j]) - float(b[j])) / (hi - lo))
        elif str(a[j]) != str(b[j]):
            total += 1.0
    return total / cb.n_features


def all_xcs(cb):
    out = []
    for a in cb.cases:
        for b in cb.cases:
            if a.label != b.label:
                d = diffs(a.values, b.values, cb)
                if 1 <= len(d) <= 2:
                    out.append((a.id, b.id, tuple(d)))
    return sorted(out)


def substitute(q, positions, source):
    v = list(q)
    for j in positions:
        v[j] = source[j]
    return tuple(v)


def explain_ref(q, cb, oracle, use_existing=True, adapt=True, prefer_closest=False):
    """Returns (stage, xc (qid, cfid) or None, donor id or None, cf values or None)."""
    label = lambda v: oracle.classify(Case(None, tuple(v)))
    qc = label(q)
    if use_existing:
        near = sorted((dist(q, c.values, cb), c.id, c) for c in cb.cases
                      if 1 <= len(diffs(q, c.values, cb)) <= 2)
        for _, _, c in near:
            if label(c.values) != qc:
                return "existing", None, None, c.values
    xcs = all_xcs(cb)
    if not xcs:
        return "failed", None, None, None
    _, qid, cfid, dset = min((dist(q, cb.case(a).values, cb), a, b, d) for a, b, d in xcs)
    cf = cb.case(cfid)
    reused = substitute(q, dset, cf.values)
    retrieval = reused if label(reused) != qc and diffs(q, reused, cb) else None
    if not adapt:
        if retrieval is None:
            return "failed", (qid, cfid), None, None
        return "retrieval", (qid, cfid), None, retrieval
    adapted = donor = None
    if retrieval is None or prefer_closest:
        donors = sorted((dist(q, c.values, cb), c.id) for c in cb.cases if c.label == cf.label)
        for _, i in donors:
            cand = substitute(q, dset, cb.case(i).values)
            if diffs(q, cand, cb) and label(cand) != qc:
                adapted, donor = cand, i
                break
    opts = []
    if retrieval is not None:
        opts.append((dist(q, retrieval, cb), 0, "retrieval", None, retrieval))
    if adapted is not None:
        opts.append((dist(q, adapted, cb), 1, "adaptation", donor, adapted))
    if not opts:
        return "failed", (qid, cfid), None, None
    _, _, stage, donor, values = min(opts)
    return stage, (qid, cfid), donor, values
