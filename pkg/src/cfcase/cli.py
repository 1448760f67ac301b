"""Command-line entry point: potential | build-xcb | explain | evaluate | compare.

Exit codes: 0 success, 1 data or I/O error, 2 bad flags, 3 no counterfactual found.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import shlex
import sys
import tempfile
from pathlib import Path

from . import datasets
from .data import RANGE, VALUE, CaseBase, DataError, FeatureSchema, load_case_base, load_schema
from .evaluation import compare_baselines, evaluate, figure_tables, knn_factory
from .generator import ExplainConfig, explain
from .oracle import SubprocessOracle, train_knn
from .potential import analyze_potential, reports_to_csv
from .xcb import XCBase, build_xc_base

EXIT_OK, EXIT_DATA, EXIT_USAGE, EXIT_FAILED = 0, 1, 2, 3

log = logging.getLogger("cfcase")


def _tolerance(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError(f"tolerance must lie in [0, 1), got {v}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _lambdas(text: str) -> tuple:
    try:
        lams = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda list: {text!r}") from None
    if not lams or any(l <= 0 for l in lams) or any(b <= a for a, b in zip(lams, lams[1:])):
        raise argparse.ArgumentTypeError("lambdas must be positive and strictly ascending")
    return lams


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", action="append", required=True,
                        help="CSV path or bundled dataset name (repeatable where noted)")
    common.add_argument("--schema", help="JSON feature schema; inferred from the CSV if omitted")
    common.add_argument("--label", help="label column (default: schema label or last column)")
    common.add_argument("--tolerance", type=_tolerance,
                        help="numeric matching tolerance in [0, 1)")
    common.add_argument("--tolerance-mode", choices=(VALUE, RANGE),
                        help="tolerance relative to the values compared or to the feature range")
    common.add_argument("--k", type=_positive_int, default=3, help="neighbours for the kNN oracle")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=_positive_int, default=None,
                        help="worker threads (default: all cores)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cfcase", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("potential", parents=[common],
                   help="feature-difference histogram over cross-class pairs")

    sub.add_parser("build-xcb", parents=[common], help="build and save the explanation case-base")

    e = sub.add_parser("explain", parents=[common], help="explain one or more query rows")
    q = e.add_mutually_exclusive_group(required=True)
    q.add_argument("--query", help="feature values as one CSV row, in schema order")
    q.add_argument("--query-file", help="CSV file of query rows (an optional header is skipped)")
    e.add_argument("--xcb", help="previously built explanation case-base (JSON)")
    e.add_argument("--oracle-command",
                   help="external classifier: reads CSV rows on stdin, prints one label per line")
    e.add_argument("--prefer-closest", action="store_true",
                   help="run both routes and keep the nearer counterfactual")
    e.add_argument("--no-existing", action="store_true",
                   help="skip the lookup of stored counterfactuals")
    e.add_argument("--no-adapt", action="store_true", help="retrieval and reuse only")
    e.add_argument("--max-neighbors", type=_positive_int)

    v = sub.add_parser("evaluate", parents=[common], help="cross-validated competence and RCF")
    v.add_argument("--folds", type=_positive_int, default=10)
    v.add_argument("--max-neighbors", type=_positive_int)
    v.add_argument("--figures", metavar="PREFIX",
                   help="also write PREFIX_coverage.csv and PREFIX_rcf.csv")

    c = sub.add_parser("compare", parents=[common], help="CBR generator against the perturbation baseline")
    c.add_argument("--folds", type=_positive_int, default=10)
    c.add_argument("--lambdas", type=_lambdas, default=(0.1, 1.0, 10.0, 100.0))
    c.add_argument("--max-iterations", type=_positive_int, default=200)
    c.add_argument("--max-queries", type=_positive_int,
                   help="cap on queries per fold")
    return p


def write_atomic(path: str | None, text: str) -> None:
    """Write to a sibling temp file then rename, so failures leave nothing behind."""
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _load(spec: str, args) -> CaseBase:
    """Load a dataset, applying --tolerance-mode (tolerance values are applied later)."""
    schema = load_schema(args.schema) if args.schema else None
    cb = load_case_base(datasets.resolve(spec), schema=schema, label=args.label)
    if args.tolerance_mode is not None:
        s = cb.schema
        cb = CaseBase(FeatureSchema(s.features, s.label, args.tolerance_mode), cb.cases,
                      cb.name, cb.dropped_rows)
    return cb


def _single(args) -> str:
    if len(args.data) != 1:
        raise _Usage(f"{args.command} takes exactly one --data")
    return args.data[0]


class _Usage(Exception):
    pass


def cmd_potential(args) -> int:
    reports = []
    for spec in args.data:
        reports.append(analyze_potential(_load(spec, args), args.tolerance, args.threads))
    if args.format == "csv":
        write_atomic(args.out, reports_to_csv(reports))
    else:
        out = [r.to_dict() for r in reports]
        write_atomic(args.out, _dumps(out[0] if len(out) == 1 else out))
    return EXIT_OK


def cmd_build_xcb(args) -> int:
    cb = _load(_single(args), args)
    xcb = build_xc_base(cb, args.tolerance, threads=args.threads)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["query", "cf", "diff"])
        names = cb.schema.names
        for x in xcb.xcs:
            w.writerow([x.query_id, x.cf_id, ";".join(names[j] for j in sorted(x.diff_features))])
        write_atomic(args.out, buf.getvalue())
    else:
        write_atomic(args.out, _dumps(xcb.to_dict()))
    log.info("%s: %d XCs", cb.name, len(xcb))
    return EXIT_OK


def _queries(args, cb: CaseBase):
    if args.query is not None:
        rows = [next(csv.reader([args.query]))]
    else:
        try:
            with open(args.query_file, newline="") as fh:
                rows = [r for r in csv.reader(fh) if r]
        except OSError as exc:
            raise DataError(f"cannot read {args.query_file}: {exc}") from None
        if rows and [c.strip() for c in rows[0]][:cb.n_features] == cb.schema.names:
            rows = rows[1:]
    if not rows:
        raise DataError("no query rows given")
    out = []
    for r in rows:
        if len(r) == cb.n_features + 1:
            r = r[:-1]  # trailing label column, ignored: the oracle decides the class
        out.append(cb.parse_case(r))
    return out


def _outcome_dict(o, cb: CaseBase) -> dict:
    names = cb.schema.names
    d = {
        "stage": o.stage,
        "query": dict(zip(names, o.query.values)),
        "query_class": o.query_class,
        "counterfactual": None,
        "counterfactual_class": o.counterfactual_class,
        "changes": [],
        "distance": o.distance,
        "xc": None,
        "donor_id": o.donor_id,
        "candidates_tried": o.candidates_tried,
    }
    if o.used_xc is not None:
        d["xc"] = {"query_id": o.used_xc.query_id, "cf_id": o.used_xc.cf_id,
                   "diff_features": [names[j] for j in sorted(o.used_xc.diff_features)]}
    if o.counterfactual is not None:
        cf = o.counterfactual
        d["counterfactual"] = dict(zip(names, cf.values))
        if cf.id is not None:
            d["counterfactual_id"] = cf.id
        d["changes"] = [{"feature": n, "from": a, "to": b}
                        for n, a, b in zip(names, o.query.values, cf.values) if a != b]
    return d


def cmd_explain(args) -> int:
    cb = _load(_single(args), args)
    if args.tolerance is not None:
        cb = cb.with_tolerance(args.tolerance)
    if args.oracle_command:
        oracle = SubprocessOracle(shlex.split(args.oracle_command), cb.classes)
    else:
        oracle = train_knn(cb, args.k)
    xcb = XCBase.load(args.xcb, cb) if args.xcb else build_xc_base(cb, threads=args.threads)
    cfg = ExplainConfig(use_existing=not args.no_existing, adapt=not args.no_adapt,
                        prefer_closest=args.prefer_closest, max_neighbors=args.max_neighbors)
    outcomes = [explain(q, cb, xcb, oracle, cfg) for q in _queries(args, cb)]
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "query_class", "counterfactual_class", "distance", "changes"])
        for o in outcomes:
            d = _outcome_dict(o, cb)
            w.writerow([o.stage, o.query_class, o.counterfactual_class or "",
                        "" if o.distance is None else f"{o.distance:.6f}",
                        ";".join(f"{c['feature']}:{c['from']}->{c['to']}" for c in d["changes"])])
        write_atomic(args.out, buf.getvalue())
    else:
        docs = [_outcome_dict(o, cb) for o in outcomes]
        write_atomic(args.out, _dumps(docs[0] if len(docs) == 1 else docs))
    return EXIT_OK if all(o.ok for o in outcomes) else EXIT_FAILED


def _tol_for(cb: CaseBase, args):
    if args.tolerance is not None:
        return args.tolerance
    return datasets.default_tolerance(cb.name)


def cmd_evaluate(args) -> int:
    reports = []
    for spec in args.data:
        cb = _load(spec, args)
        reports.append(evaluate(cb, knn_factory(args.k), _tol_for(cb, args), args.seed,
                                args.folds, args.max_neighbors, args.threads, k=args.k))
    coverage, rcf = figure_tables(reports)
    if args.format == "csv":
        stem = args.out[:-4] if args.out and args.out.endswith(".csv") else args.out
        if stem is None:
            sys.stdout.write(coverage + "\n" + rcf)
        else:
            write_atomic(f"{stem}_coverage.csv", coverage)
            write_atomic(f"{stem}_rcf.csv", rcf)
    else:
        write_atomic(args.out, _dumps({"reports": [r.to_dict() for r in reports]}))
    if args.figures:
        write_atomic(f"{args.figures}_coverage.csv", coverage)
        write_atomic(f"{args.figures}_rcf.csv", rcf)
    return EXIT_OK


def cmd_compare(args) -> int:
    tables = []
    for spec in args.data:
        cb = _load(spec, args)
        tables.append(compare_baselines(cb, knn_factory(args.k), args.seed, _tol_for(cb, args),
                                        args.folds, args.lambdas, args.max_iterations,
                                        args.max_queries, k=args.k))
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset", "method", "queries", "coverage", "mean_diffs", "mean_distance", "failure_rate"])
        for t in tables:
            for m, s in t["methods"].items():
                w.writerow([t["dataset"], m, s["queries"]] +
                           ["" if s[k] is None else f"{s[k]:.4f}"
                            for k in ("coverage", "mean_diffs", "mean_distance", "failure_rate")])
        write_atomic(args.out, buf.getvalue())
    else:
        docs = [{**{k: t[k] for k in ("dataset", "seed", "tolerance", "methods")},
                 "records": [r.__dict__ for r in t["records"]]} for t in tables]
        write_atomic(args.out, _dumps({"comparisons": docs}))
    return EXIT_OK


COMMANDS = {
    "potential": cmd_potential,
    "build-xcb": cmd_build_xcb,
    "explain": cmd_explain,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except _Usage as exc:
        parser.error(str(exc))
    except (DataError, OSError, ValueError) as exc:
        print(f"cfcase: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
