"""Community-language alignment scoring and bias audits.

Train a lightweight classifier per community corpus, read its confidence as
an alignment score in [0, 1], calibrate the high-alignment threshold from
survival curves, and use the scores to audit taboo-speech classifiers
(confidence/alignment correlation with bootstrap intervals) and
taboo-annotated datasets (high-alignment proportions with mean/SD flagging).
"""

from ._version import __version__
from .bias import (
    CorrelationResult,
    DegenerateCorrelationError,
    NoTabooDeclaredError,
    ProportionMatrix,
    ResetFlag,
    aligned_proportion,
    classifier_bias,
    dataset_bias_matrix,
    flag_for_reset,
    pearson,
)
from .calibrate import (
    CcdfCurve,
    CoverageUnattainableError,
    NoScoresError,
    ThresholdConfig,
    ValidationMatrix,
    compute_ccdf,
    default_grid,
    select_threshold,
    validation_matrix,
)
from .clc import (
    ClcModel,
    FeatureConfig,
    ScoreTable,
    TrainHyper,
    TrainingDivergedError,
    UnreadableModelError,
    extract_features,
    import_scores,
    load_model,
    save_model,
    score,
    stable_hash,
    train_clc,
)
from .corpus import (
    CommunityCorpus,
    InsufficientNegativesError,
    TrainingSet,
    Utterance,
    build_training_set,
    normalize,
    parse_corpus,
    split_by_month,
)
from .report import (
    AuditReport,
    build_report,
    emit_ccdf_csv,
    emit_correlations_csv,
    emit_reset_flags_csv,
    render_matrix,
)
from .taboo import (
    DatasetSchema,
    LabelNotFoundError,
    TabooDataset,
    TabooInstance,
    TabooSchemaError,
    ToxicityAuthError,
    ToxicityClientConfig,
    ToxicityResult,
    fetch_toxicity,
    import_taboo_scores,
    parse_taboo_dataset,
)

__all__ = [
    "__version__",
    # corpus
    "Utterance", "CommunityCorpus", "TrainingSet", "InsufficientNegativesError",
    "normalize", "parse_corpus", "split_by_month", "build_training_set",
    # clc
    "FeatureConfig", "TrainHyper", "ClcModel", "ScoreTable",
    "TrainingDivergedError", "UnreadableModelError",
    "stable_hash", "extract_features", "train_clc", "score",
    "save_model", "load_model", "import_scores",
    # calibrate
    "ThresholdConfig", "CcdfCurve", "ValidationMatrix",
    "NoScoresError", "CoverageUnattainableError",
    "default_grid", "compute_ccdf", "select_threshold", "validation_matrix",
    # taboo
    "TabooInstance", "TabooDataset", "DatasetSchema",
    "TabooSchemaError", "LabelNotFoundError",
    "ToxicityClientConfig", "ToxicityResult", "ToxicityAuthError",
    "parse_taboo_dataset", "import_taboo_scores", "fetch_toxicity",
    # bias
    "CorrelationResult", "ProportionMatrix", "ResetFlag",
    "DegenerateCorrelationError", "NoTabooDeclaredError",
    "pearson", "classifier_bias", "aligned_proportion",
    "dataset_bias_matrix", "flag_for_reset",
    # report
    "AuditReport", "build_report", "render_matrix",
    "emit_ccdf_csv", "emit_correlations_csv", "emit_reset_flags_csv",
]
