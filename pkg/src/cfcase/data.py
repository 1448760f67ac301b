"""Cases, schemas and case-bases, plus CSV ingestion and fold planning."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
# numeric values a, b match when |a - b| <= tol * max(|a|, |b|) ("value") or
# <= tol * (observed max - observed min) of the feature ("range")
VALUE = "value"
RANGE = "range"
MISSING_MARKERS = frozenset({"?", ""})

Value = Union[float, str]


class DataError(Exception):
    """Raised for unreadable, malformed or schema-inconsistent data."""


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str = NUMERIC
    tolerance: float = 0.0

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise DataError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if not 0.0 <= self.tolerance < 1.0:
            raise DataError(f"feature {self.name!r}: tolerance must lie in [0, 1)")
        if self.kind == CATEGORICAL and self.tolerance != 0.0:
            raise DataError(f"feature {self.name!r}: categorical features take no tolerance")

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]
    label: str = "class"
    tolerance_mode: str = VALUE

    def __post_init__(self):
        if self.tolerance_mode not in (VALUE, RANGE):
            raise DataError(f"unknown tolerance mode {self.tolerance_mode!r}")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        if self.label in names:
            raise DataError(f"label column {self.label!r} is also listed as a feature")

    def __len__(self):
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown feature {name!r}") from None

    def with_tolerance(self, tolerance: float, mode: str | None = None) -> "FeatureSchema":
        """Copy of the schema with every numeric tolerance set to ``tolerance``."""
        feats = tuple(
            FeatureSpec(f.name, f.kind, tolerance if f.is_numeric else 0.0) for f in self.features
        )
        return FeatureSchema(feats, self.label, mode or self.tolerance_mode)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "tolerance_mode": self.tolerance_mode,
            "features": [{"name": f.name, "kind": f.kind, "tolerance": f.tolerance} for f in self.features],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        try:
            feats = tuple(
                FeatureSpec(f["name"], f.get("kind", NUMERIC), float(f.get("tolerance", 0.0)))
                for f in d["features"]
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed schema: {exc}") from None
        return cls(feats, d.get("label", "class"), d.get("tolerance_mode", VALUE))


def load_schema(path: Union[str, Path]) -> FeatureSchema:
    try:
        with open(path) as fh:
            return FeatureSchema.from_dict(json.load(fh))
    except OSError as exc:
        raise DataError(f"cannot read schema {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"schema {path} is not valid JSON: {exc}") from None


@dataclass(frozen=True)
class Case:
    """A feature vector with an optional class label.

    Synthetic counterfactuals carry ``id=None`` and ``label=None`` until the
    oracle labels them.
    """

    id: int | None
    values: tuple[Value, ...]
    label: str | None = None

    def replace(self, positions: Iterable[int], source: "Case") -> "Case":
        """New unlabelled case with ``positions`` copied from ``source``."""
        vals = list(self.values)
        for j in positions:
            vals[j] = source.values[j]
        return Case(None, tuple(vals))


def _median(sorted_vals: np.ndarray) -> float:
    n = len(sorted_vals)
    mid = n // 2
    if n % 2:
        return float(sorted_vals[mid])
    return float((sorted_vals[mid - 1] + sorted_vals[mid]) / 2.0)


def mad(values: Sequence[float]) -> float:
    """Median absolute deviation from the median."""
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise ValueError("mad() of an empty sequence")
    med = _median(arr)
    return _median(np.sort(np.abs(arr - med)))


@dataclass(frozen=True, eq=False)
class CaseBase:
    """Immutable collection of cases with derived per-feature statistics.

    Alongside the raw cases it keeps an encoded float matrix ``X`` (categorical
    symbols mapped to integer codes) that the vectorised scans work from.
    """

    schema: FeatureSchema
    cases: tuple[Case, ...]
    name: str = ""
    dropped_rows: int = 0
    X: np.ndarray = field(init=False, repr=False)
    labels: np.ndarray = field(init=False, repr=False)
    ids: np.ndarray = field(init=False, repr=False)
    ranges: dict = field(init=False, repr=False)
    mads: dict = field(init=False, repr=False)
    classes: tuple = field(init=False)
    by_class: dict = field(init=False, repr=False)
    vocab: tuple = field(init=False, repr=False)

    def __post_init__(self):
        schema = self.schema
        if not self.cases:
            raise DataError("a case-base needs at least one case")
        ids = [c.id for c in self.cases]
        if any(i is None for i in ids) or len(set(ids)) != len(ids):
            raise DataError("case ids must be present and unique")
        d = len(schema)
        for c in self.cases:
            if len(c.values) != d:
                raise DataError(f"case {c.id}: expected {d} values, got {len(c.values)}")
            if c.label is None:
                raise DataError(f"case {c.id} has no label")

        vocab = []
        X = np.empty((len(self.cases), d), dtype=float)
        for j, f in enumerate(schema.features):
            col = [c.values[j] for c in self.cases]
            if f.is_numeric:
                try:
                    X[:, j] = [float(v) for v in col]
                except (TypeError, ValueError):
                    raise DataError(f"feature {f.name!r} holds non-numeric values") from None
                vocab.append(None)
            else:
                symbols = {s: k for k, s in enumerate(sorted({str(v) for v in col}))}
                X[:, j] = [symbols[str(v)] for v in col]
                vocab.append(symbols)
        X.flags.writeable = False

        ranges, mads = {}, {}
        for j, f in enumerate(schema.features):
            if f.is_numeric:
                ranges[j] = (float(X[:, j].min()), float(X[:, j].max()))
                mads[j] = mad(X[:, j])

        labels = np.array([c.label for c in self.cases], dtype=object)
        id_arr = np.array(ids, dtype=np.int64)
        id_arr.flags.writeable = False
        classes = tuple(sorted(set(labels.tolist())))
        by_class = {k: tuple(int(i) for i in id_arr[labels == k]) for k in classes}

        set_ = object.__setattr__
        set_(self, "X", X)
        set_(self, "labels", labels)
        set_(self, "ids", id_arr)
        set_(self, "ranges", ranges)
        set_(self, "mads", mads)
        set_(self, "classes", classes)
        set_(self, "by_class", by_class)
        set_(self, "vocab", tuple(vocab))
        set_(self, "_pos", {int(i): k for k, i in enumerate(id_arr)})
        spans = np.zeros(d)
        for j, (lo, hi) in ranges.items():
            spans[j] = hi - lo
        spans.flags.writeable = False
        set_(self, "_spans", spans)
        set_(self, "_num", np.array([f.is_numeric for f in schema.features]))
        set_(self, "_tol", np.array([f.tolerance for f in schema.features]))

    def __len__(self):
        return len(self.cases)

    @property
    def n_features(self) -> int:
        return len(self.schema)

    def case(self, case_id: int) -> Case:
        return self.cases[self._pos[case_id]]

    def position(self, case_id: int) -> int:
        return self._pos[case_id]

    # per-feature vectors used by the metric kernels

    @property
    def numeric_mask(self) -> np.ndarray:
        return self._num

    @property
    def spans(self) -> np.ndarray:
        """max - min per feature (0 for categoricals)."""
        return self._spans

    @property
    def tolerances(self) -> np.ndarray:
        return self._tol

    def differs(self, A: np.ndarray, B: np.ndarray, j: int | None = None) -> np.ndarray:
        """Elementwise "values differ beyond tolerance" for encoded arrays.

        With ``j`` the inputs are single columns of feature ``j``; otherwise the
        last axis runs over all features. Categorical codes have tolerance 0.
        """
        tol = self.tolerances if j is None else self.tolerances[j]
        delta = np.abs(A - B)
        if self.schema.tolerance_mode == RANGE:
            span = self.spans if j is None else self.spans[j]
            return delta > tol * span
        return delta > tol * np.maximum(np.abs(A), np.abs(B))

    def encode(self, case: Case) -> np.ndarray:
        """Encode a (possibly unseen) case into the coordinates of ``X``.

        Categorical symbols missing from the vocabulary map to -1, which
        matches no stored case.
        """
        if len(case.values) != self.n_features:
            raise DataError(f"expected {self.n_features} values, got {len(case.values)}")
        out = np.empty(self.n_features)
        for j, (f, v) in enumerate(zip(self.schema.features, case.values)):
            if f.is_numeric:
                try:
                    out[j] = float(v)
                except (TypeError, ValueError):
                    raise DataError(f"feature {f.name!r}: {v!r} is not numeric") from None
            else:
                out[j] = self.vocab[j].get(str(v), -1)
        return out

    def subset(self, ids: Iterable[int], name: str | None = None) -> "CaseBase":
        """New case-base over ``ids`` with statistics recomputed."""
        keep = sorted(self._pos[i] for i in ids)
        return CaseBase(self.schema, tuple(self.cases[k] for k in keep),
                        name=self.name if name is None else name)

    def with_tolerance(self, tolerance: float, mode: str | None = None) -> "CaseBase":
        return CaseBase(self.schema.with_tolerance(tolerance, mode), self.cases,
                        name=self.name, dropped_rows=self.dropped_rows)

    def parse_case(self, raw: Sequence[str], case_id: int | None = None,
                   label: str | None = None) -> Case:
        """Build a case from text cells in schema order."""
        if len(raw) != self.n_features:
            raise DataError(f"expected {self.n_features} values, got {len(raw)}")
        vals = []
        for f, cell in zip(self.schema.features, raw):
            cell = cell.strip()
            if f.is_numeric:
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(f"feature {f.name!r}: {cell!r} is not numeric") from None
            else:
                vals.append(cell)
        return Case(case_id, tuple(vals), label)


def build_case_base(schema: FeatureSchema, rows: Sequence[Sequence[Value]],
                    labels: Sequence, name: str = "") -> CaseBase:
    """Case-base from in-memory rows; ids are row positions."""
    if len(rows) != len(labels):
        raise DataError("rows and labels differ in length")
    cases = []
    for i, (row, lab) in enumerate(zip(rows, labels)):
        vals = tuple(float(v) if f.is_numeric else str(v) for f, v in zip(schema.features, row))
        cases.append(Case(i, vals, str(lab)))
    return CaseBase(schema, tuple(cases), name=name)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def infer_schema(header: Sequence[str], rows: Sequence[Sequence[str]], label: str) -> FeatureSchema:
    """A column is numeric iff every retained cell parses as a real number."""
    feats = []
    for j, name in enumerate(header):
        if name == label:
            continue
        kind = NUMERIC if all(_is_number(r[j]) for r in rows) else CATEGORICAL
        feats.append(FeatureSpec(name, kind))
    return FeatureSchema(tuple(feats), label)


def load_case_base(path: Union[str, Path], schema: FeatureSchema | None = None,
                   label: str | None = None) -> CaseBase:
    """Read a headed CSV into a CaseBase.

    Rows containing a missing marker ("?" or an empty cell) are dropped and
    counted in ``dropped_rows``. The label column defaults to the schema's
    label, else the last column.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise DataError(f"{path} is empty") from None
            raw = [row for row in reader if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None

    if label is None:
        label = schema.label if schema is not None else header[-1]
    if label not in header:
        raise DataError(f"label column {label!r} not found in {path}")

    rows, dropped = [], 0
    for lineno, row in enumerate(raw, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        row = [c.strip() for c in row]
        if any(c in MISSING_MARKERS for c in row):
            dropped += 1
            continue
        rows.append((lineno - 2, row))
    if dropped:
        logger.info("%s: dropped %d rows with missing values", path.name, dropped)
    if not rows:
        raise DataError(f"{path}: no rows left after dropping missing values")

    if schema is None:
        schema = infer_schema(header, [r for _, r in rows], label)
    else:
        if label != schema.label:
            schema = FeatureSchema(schema.features, label, schema.tolerance_mode)
        expected = set(schema.names) | {label}
        if set(header) != expected or len(header) != len(schema) + 1:
            raise DataError(f"{path}: columns {header} do not match the schema")

    col = {h: k for k, h in enumerate(header)}
    order = [col[n] for n in schema.names]
    lab = col[label]
    cases = []
    for rid, row in rows:
        vals = []
        for f, k in zip(schema.features, order):
            if f.is_numeric:
                try:
                    vals.append(float(row[k]))
                except ValueError:
                    raise DataError(f"{path}: row {rid + 2}, {f.name!r}={row[k]!r} is not numeric") from None
            else:
                vals.append(row[k])
        cases.append(Case(rid, tuple(vals), row[lab]))
    return CaseBase(schema, tuple(cases), name=path.stem, dropped_rows=dropped)


def write_case_base(cb: CaseBase, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cb.schema.names + [cb.schema.label])
        for c in cb.cases:
            w.writerow([repr(v) if isinstance(v, float) else v for v in c.values] + [c.label])


@dataclass(frozen=True)
class FoldPlan:
    seed: int
    folds: tuple[tuple[int, ...], ...]

    def split(self, k: int) -> tuple[list[int], list[int]]:
        """(training ids, query ids) for fold ``k``."""
        test = list(self.folds[k])
        train = sorted(i for j, f in enumerate(self.folds) if j != k for i in f)
        return train, test


def make_folds(cb: CaseBase, seed: int, n_folds: int = 10) -> FoldPlan:
    """Uniform random partition of the case ids; not stratified."""
    if len(cb) < n_folds:
        raise DataError(f"need at least {n_folds} cases for {n_folds} folds, have {len(cb)}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(cb.ids)
    folds = tuple(tuple(sorted(int(i) for i in part)) for part in np.array_split(perm, n_folds))
    return FoldPlan(seed, folds)
