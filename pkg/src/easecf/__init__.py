"""Item-item collaborative filtering for implicit feedback with a closed-form solver.

The training objective (squared reconstruction error with L2
regularization and a zero-diagonal constraint on the item-item weight
matrix) is solved in one shot from the data Gram matrix. The package
covers the full pipeline: interaction ingestion, evaluation splits, Gram
computation, solving, top-k ranking, and metric evaluation against
popularity and cosine-neighborhood baselines.
"""

__version__ = "0.1.0"

from .errors import (
    DivergenceError,
    EaseError,
    EmptyDatasetError,
    FactorizationError,
    FormatError,
    IngestError,
    VocabMismatchError,
    ZeroVarianceError,
)
from .evaluation import (
    CosineItemScorer,
    MetricReport,
    ModelScorer,
    PopularityScorer,
    evaluate,
    ndcg_at_k,
    recall_at_k,
    rec_count_curve,
    weight_histogram,
)
from .gram import GramMatrix, build_gram, load_gram, merge_grams, save_gram
from .interactions import (
    InteractionMatrix,
    Vocabulary,
    ingest,
    ingest_path,
    load_matrix,
    read_interactions,
    save_matrix,
)
from .ranking import RankedList, recommend_batch, score_user, top_k
from .solver import (
    SolveDiagnostics,
    WeightModel,
    clamp_nonneg,
    load_model,
    save_model,
    solve,
    solve_diagnostics,
)
from .splits import EvalSplit, EvalUser, load_split, save_split, split_strong, split_weak

__all__ = [
    "__version__",
    "CosineItemScorer",
    "DivergenceError",
    "EaseError",
    "EmptyDatasetError",
    "EvalSplit",
    "EvalUser",
    "FactorizationError",
    "FormatError",
    "GramMatrix",
    "IngestError",
    "InteractionMatrix",
    "MetricReport",
    "ModelScorer",
    "PopularityScorer",
    "RankedList",
    "SolveDiagnostics",
    "Vocabulary",
    "VocabMismatchError",
    "WeightModel",
    "ZeroVarianceError",
    "build_gram",
    "clamp_nonneg",
    "evaluate",
    "ingest",
    "ingest_path",
    "load_gram",
    "load_matrix",
    "load_model",
    "load_split",
    "merge_grams",
    "ndcg_at_k",
    "recall_at_k",
    "rec_count_curve",
    "recommend_batch",
    "save_gram",
    "save_matrix",
    "save_model",
    "save_split",
    "score_user",
    "solve",
    "solve_diagnostics",
    "split_strong",
    "split_weak",
    "top_k",
    "weight_histogram",
]
