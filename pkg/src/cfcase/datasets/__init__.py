"""Bundled UCI datasets (KEEL copies, rows with missing values removed).

Regenerate with ``scripts/make_datasets.py``.
"""

from __future__ import annotations

import os
from pathlib import Path

from ..data import CaseBase, DataError, load_case_base

HERE = Path(__file__).parent

NAMES = ("iris", "wine", "glass", "bupa", "sonar", "votes", "wisconsin")

# matching tolerance used by the competence runs: 2.5% for bupa, 1% elsewhere
TOLERANCES = {"bupa": 0.025}
DEFAULT_TOLERANCE = 0.01

EVALUATION_SET = ("iris", "wine", "glass", "bupa", "wisconsin")


def default_tolerance(name: str) -> float:
    return TOLERANCES.get(name, DEFAULT_TOLERANCE)


def resolve(spec: str) -> Path:
    """Find a dataset by path, under $CFCASE_DATA_DIR, or by bundled name."""
    p = Path(spec)
    if p.is_file():
        return p
    root = os.environ.get("CFCASE_DATA_DIR")
    if root:
        for cand in (Path(root) / spec, Path(root) / f"{spec}.csv"):
            if cand.is_file():
                return cand
    stem = p.name[:-4] if p.name.endswith(".csv") else p.name
    if stem in NAMES:
        return HERE / f"{stem}.csv"
    raise DataError(f"dataset {spec!r} not found")


def load(name: str) -> CaseBase:
    return load_case_base(resolve(name))
