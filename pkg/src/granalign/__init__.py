"""granalign: multi-granularity speech unit alignment and classification toolkit.

Turns frame-level phoneme emissions into time-aligned phonemes, syllables
and words, builds speaker-independent datasets from them, trains a
bidirectional-LSTM + multi-head-attention classifier, and reports
subject-level metrics plus attention-based unit rankings.
"""

__version__ = "0.1.0"

from .ctc import (
    BLANK_LABEL,
    AlignedUnit,
    EmissionMatrix,
    TargetSequence,
    expand_with_blanks,
    group_words,
    min_frames_required,
    unit_confidence,
    viterbi_align,
)
from .dataset import (
    Batch,
    FeatureRef,
    FeatureStore,
    SplitAssignment,
    UtteranceRecord,
    filter_units,
    make_batches,
    select_granularity,
    stratified_speaker_split,
)
from .errors import (
    ConsistencyError,
    DataError,
    EmptyInputError,
    GranalignError,
    InfeasibleAlignmentError,
    NumericError,
    TrainingDivergedError,
    ValidationError,
    VocabularyError,
)
from .fmat import read_fmat, write_fmat
from .metrics import (
    AttentionEntry,
    AttentionReport,
    MetricsReport,
    SeedSummary,
    SubjectPrediction,
    aggregate_subjects,
    attention_report,
    auprc_score,
    auroc_score,
    compute_metrics,
    seed_summary,
    summary_table,
)
from .model import (
    ClassifierConfig,
    ModelParams,
    backward,
    cross_entropy_loss,
    forward,
    init_params,
    loss_and_gradients,
    zeros_like_params,
)
from .ndjson import (
    read_records,
    read_segments,
    read_target,
    read_units,
    validate_granularity,
    write_records,
    write_segments,
    write_target,
    write_units,
)
from .syllables import (
    DEFAULT_INVENTORY,
    SONORITY_RANKS,
    PhonemeInventory,
    SonorityTag,
    Syllable,
    align_syllables,
    classify,
    ssp_syllabify,
)
from .training import (
    EpochStats,
    FitResult,
    TrainConfig,
    adamw_step,
    fit,
    global_grad_norm,
    init_adam_state,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from .vad import (
    FrameProbSeries,
    SegmenterConfig,
    SpeechSegment,
    merge_short,
    rms_prob,
    split_long,
    threshold_segments,
)

__all__ = [
    "__version__",
    # errors
    "GranalignError",
    "ValidationError",
    "DataError",
    "EmptyInputError",
    "InfeasibleAlignmentError",
    "VocabularyError",
    "ConsistencyError",
    "NumericError",
    "TrainingDivergedError",
    # vad
    "FrameProbSeries",
    "SpeechSegment",
    "SegmenterConfig",
    "threshold_segments",
    "split_long",
    "merge_short",
    "rms_prob",
    # ctc
    "BLANK_LABEL",
    "EmissionMatrix",
    "TargetSequence",
    "AlignedUnit",
    "expand_with_blanks",
    "min_frames_required",
    "viterbi_align",
    "unit_confidence",
    "group_words",
    # syllables
    "DEFAULT_INVENTORY",
    "SONORITY_RANKS",
    "PhonemeInventory",
    "SonorityTag",
    "Syllable",
    "classify",
    "ssp_syllabify",
    "align_syllables",
    # dataset
    "UtteranceRecord",
    "FeatureRef",
    "FeatureStore",
    "SplitAssignment",
    "Batch",
    "filter_units",
    "select_granularity",
    "stratified_speaker_split",
    "make_batches",
    # model / training
    "ClassifierConfig",
    "ModelParams",
    "TrainConfig",
    "EpochStats",
    "FitResult",
    "forward",
    "backward",
    "cross_entropy_loss",
    "loss_and_gradients",
    "init_params",
    "zeros_like_params",
    "adamw_step",
    "init_adam_state",
    "global_grad_norm",
    "fit",
    "predict",
    "save_checkpoint",
    "load_checkpoint",
    # metrics
    "SubjectPrediction",
    "MetricsReport",
    "SeedSummary",
    "AttentionEntry",
    "AttentionReport",
    "aggregate_subjects",
    "compute_metrics",
    "auroc_score",
    "auprc_score",
    "seed_summary",
    "attention_report",
    "summary_table",
    # io
    "read_fmat",
    "write_fmat",
    "read_segments",
    "write_segments",
    "read_units",
    "write_units",
    "read_target",
    "write_target",
    "read_records",
    "write_records",
    "validate_granularity",
]
