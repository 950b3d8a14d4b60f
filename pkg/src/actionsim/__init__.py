"""Training-free action-similarity pipeline: caption, judge, classify, report."""

__version__ = "0.1.0"

from .caption import CaptionerSpec, Description, DescriptionSequence
from .classify import ClassifySpec, EvaluationResult, evaluate_matrix
from .config import RunConfig, load_config
from .corpus import Corpus, SampleId, SampleRecord, load_manifest
from .judge import JudgeSpec, SimilarityScore, parse_score, score_pair
from .matrix import MatrixSpec, SimilarityMatrix, build_matrix, load_matrix, save_matrix
from .pipeline import run_experiment
from .report import ExperimentSummary, emit_tables, render_heatmap

__all__ = [
    "CaptionerSpec",
    "ClassifySpec",
    "Corpus",
    "Description",
    "DescriptionSequence",
    "EvaluationResult",
    "ExperimentSummary",
    "JudgeSpec",
    "MatrixSpec",
    "RunConfig",
    "SampleId",
    "SampleRecord",
    "SimilarityMatrix",
    "SimilarityScore",
    "__version__",
    "build_matrix",
    "emit_tables",
    "evaluate_matrix",
    "load_config",
    "load_manifest",
    "load_matrix",
    "parse_score",
    "render_heatmap",
    "run_experiment",
    "save_matrix",
    "score_pair",
]
