"""Case-based counterfactual explanations for tabular classifiers."""

from .data import (Case, CaseBase, DataError, FeatureSchema, FeatureSpec, FoldPlan,
                   build_case_base, load_case_base, load_schema, make_folds)
from .evaluation import CompetenceReport, compare_baselines, evaluate
from .generator import ExplainConfig, GenerationOutcome, explain
from .metrics import count_diffs, mad, mad_distance, normalized_distance
from .oracle import FunctionOracle, KNNOracle, SubprocessOracle, train_knn
from .potential import PotentialReport, analyze_potential, good_cf_availability
from .wachter import WachterConfig, generate_wachter, wachter_search
from .xcb import ExplanationCase, XCBase, build_xc_base, xp_coverage

__version__ = "0.1.0"

__all__ = [
    "Case", "CaseBase", "DataError", "FeatureSchema", "FeatureSpec", "FoldPlan",
    "build_case_base", "load_case_base", "load_schema", "make_folds",
    "CompetenceReport", "compare_baselines", "evaluate",
    "ExplainConfig", "GenerationOutcome", "explain",
    "count_diffs", "mad", "mad_distance", "normalized_distance",
    "FunctionOracle", "KNNOracle", "SubprocessOracle", "train_knn",
    "PotentialReport", "analyze_potential", "good_cf_availability",
    "WachterConfig", "generate_wachter", "wachter_search",
    "ExplanationCase", "XCBase", "build_xc_base", "xp_coverage",
]
