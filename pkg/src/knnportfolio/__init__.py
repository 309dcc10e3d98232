"""k-nearest-neighbour algorithm portfolio for SAT."""

__version__ = "0.1.0"

from .dimacs import CnfInstance, parse_dimacs, parse_file, to_dimacs
from .evaluator import EvalReport, leave_one_out, report, sweep, vbs
from .features import FEATURE_NAMES, FeatureExtractor, StatSummary, extract_features, summarize
from .knowledge_base import (
    Category,
    InstanceRecord,
    KnowledgeBase,
    build_kb,
    load_kb,
    nearest_neighbors,
    save_kb,
)
from .metrics import (
    DistanceKind,
    DistanceVariant,
    RuntimeOutcome,
    Status,
    argosmart_distance,
    par10,
    par10_set,
    scaled_euclidean_distance,
)
from .runner import Answer, SolveReport, portfolio_solve, run_solver
from .selector import KNNPortfolio, SelectionResult, rank_solvers, select_solver

__all__ = [
    "Answer", "Category", "CnfInstance", "DistanceKind", "DistanceVariant", "EvalReport",
    "FEATURE_NAMES", "FeatureExtractor", "InstanceRecord", "KNNPortfolio", "KnowledgeBase",
    "RuntimeOutcome", "SelectionResult", "SolveReport", "StatSummary", "Status",
    "argosmart_distance", "build_kb", "extract_features", "leave_one_out", "load_kb",
    "nearest_neighbors", "par10", "par10_set", "parse_dimacs", "parse_file", "portfolio_solve",
    "rank_solvers", "report", "run_solver", "save_kb", "scaled_euclidean_distance",
    "select_solver", "summarize", "sweep", "to_dimacs", "vbs",
]
