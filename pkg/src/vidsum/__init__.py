"""Video summarization machinery over concept-annotation files.

The package splits into six parts: the annotation data model and validator
(:mod:`vidsum.annotation`), synthetic corpora (:mod:`vidsum.synth`),
budgeted set-function optimizers (:mod:`vidsum.optimize`), the measure and
evaluation suite (:mod:`vidsum.measures`), reference-bank generation and
baselines (:mod:`vidsum.gtgen`), and the trainable mixture summarizer
(:mod:`vidsum.learn`). The ``vidsum`` command in :mod:`vidsum.cli` wires
them together.
"""

__version__ = "0.1.0"

from .annotation import (
    Annotation,
    AnnotationParseError,
    AnnotationReferenceError,
    Keyword,
    MegaEvent,
    Snippet,
    Summary,
    ValidationReport,
    duration_of,
    load_annotation,
    load_summary,
    save_annotation,
    save_summary,
    snippet_rating,
    validate,
)
from .gtgen import (
    ConfigOutcome,
    MixtureConfig,
    ReferenceBank,
    baseline_random,
    baseline_uniform,
    build_reference_bank,
    config_grid,
    generate_summary,
    load_reference_bank,
    nash_select,
    pareto_filter,
    save_reference_bank,
)
from .learn import (
    FeatureBundle,
    MixtureModel,
    MixtureSummarizer,
    TrainConfig,
    combined_loss,
    feature_bundle,
    infer,
    load_model,
    loss_augmented_inference,
    model_score,
    save_model,
    train,
)
from .measures import (
    MEASURES,
    Cluster,
    MeasureReport,
    avg_max_f1,
    concept_clusters,
    div_cluster,
    div_sim,
    imp_score,
    leave_one_out_f1,
    measure_report,
    mega_cont,
    normalize_measure,
    temporal_f1,
    time_clusters,
)
from .optimize import (
    ObjectiveHandle,
    brute_force_opt,
    facility_location,
    knapsack_select,
    lazy_greedy,
)
from .synth import CorpusSpec, synth_corpus, synth_video

__all__ = [
    "Annotation",
    "AnnotationParseError",
    "AnnotationReferenceError",
    "Cluster",
    "ConfigOutcome",
    "CorpusSpec",
    "FeatureBundle",
    "Keyword",
    "MEASURES",
    "MeasureReport",
    "MegaEvent",
    "MixtureConfig",
    "MixtureModel",
    "MixtureSummarizer",
    "ObjectiveHandle",
    "ReferenceBank",
    "Snippet",
    "Summary",
    "TrainConfig",
    "ValidationReport",
    "avg_max_f1",
    "baseline_random",
    "baseline_uniform",
    "brute_force_opt",
    "build_reference_bank",
    "combined_loss",
    "concept_clusters",
    "config_grid",
    "div_cluster",
    "div_sim",
    "duration_of",
    "facility_location",
    "feature_bundle",
    "generate_summary",
    "imp_score",
    "infer",
    "knapsack_select",
    "lazy_greedy",
    "leave_one_out_f1",
    "load_annotation",
    "load_model",
    "load_reference_bank",
    "load_summary",
    "loss_augmented_inference",
    "measure_report",
    "mega_cont",
    "model_score",
    "nash_select",
    "normalize_measure",
    "pareto_filter",
    "save_annotation",
    "save_model",
    "save_reference_bank",
    "save_summary",
    "snippet_rating",
    "temporal_f1",
    "time_clusters",
    "train",
    "validate",
]
