"""Benchmark harness for tabular prediction tasks with free-text columns."""

from .core import (
    MISSING,
    Column,
    ColumnRole,
    FoldAssignment,
    TabTextError,
    Table,
    TaskKind,
    k_fold_split,
    subsample_rows,
)
from .embed import (
    EmbedderKind,
    EmbeddingBlock,
    ExternalEmbedding,
    FeatureMatrix,
    HashedNgram,
    TfIdf,
    TopicFactorization,
    WordVecAvg,
    assemble_features,
    load_external_embeddings,
    load_word_vectors,
    make_embedder,
)
from .evaluate import (
    EvalResult,
    ExperimentSpec,
    emit_report,
    metric_accuracy,
    metric_r2,
    run_experiment,
    run_grid,
)
from .ingest import (
    DatasetManifest,
    PreprocessReport,
    classify_column,
    coerce_numeric_column,
    general_preprocess,
    ingest_dataset,
    load_csv,
    load_manifest,
)
from .models import External, FittedModel, Gbdt, Logistic, ModelKind, Ridge, fit, make_model, run_external
from .select import SelectorResult, applicable, apply_selection, run_selector

__version__ = "0.1.0"

__all__ = [
    "MISSING",
    "Column",
    "ColumnRole",
    "DatasetManifest",
    "EmbedderKind",
    "EmbeddingBlock",
    "EvalResult",
    "ExperimentSpec",
    "External",
    "ExternalEmbedding",
    "FeatureMatrix",
    "FittedModel",
    "FoldAssignment",
    "Gbdt",
    "HashedNgram",
    "Logistic",
    "ModelKind",
    "PreprocessReport",
    "Ridge",
    "SelectorResult",
    "TabTextError",
    "Table",
    "TaskKind",
    "TfIdf",
    "TopicFactorization",
    "WordVecAvg",
    "applicable",
    "apply_selection",
    "assemble_features",
    "classify_column",
    "coerce_numeric_column",
    "emit_report",
    "fit",
    "general_preprocess",
    "ingest_dataset",
    "k_fold_split",
    "load_csv",
    "load_external_embeddings",
    "load_manifest",
    "load_word_vectors",
    "make_embedder",
    "make_model",
    "metric_accuracy",
    "metric_r2",
    "run_experiment",
    "run_external",
    "run_grid",
    "run_selector",
    "subsample_rows",
]
