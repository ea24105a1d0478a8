"""Annotation-frame selection: a learned pairwise performance predictor,
stochastic batched bubble sorting, and a strategy benchmarking harness."""

from .ingest import (
    DatasetManifest,
    FormatError,
    LabelTable,
    ManifestRecord,
    Mask,
    PerformanceMatrix,
    VideoFeatures,
    VideoUnit,
    load_checkpoint,
    load_features,
    load_labels,
    load_manifest,
    load_mask,
    load_perf_matrix,
    load_units,
    save_checkpoint,
    save_features,
    save_labels,
    save_manifest,
    save_mask,
)
from .losses import (
    TrainingPair,
    loss_middle_biased,
    loss_relative,
    loss_single,
    middle_distance,
    prediction_target,
)
from .metrics import FrameScore, boundary_f, boundary_map, jaccard, label_vector
from .net import (
    AdamState,
    FrameSample,
    ModelConfig,
    ModelWeights,
    TargetedSample,
    TrainingError,
    adam_step,
    backward,
    forward,
    init_weights,
    loss_and_grad,
    normalized_index,
    predict_batch,
)
from .harness import (
    AblationRow,
    ObjectScore,
    StrategyReport,
    SyntheticSpec,
    ablate_batch,
    benchmark,
    cov,
    make_synthetic,
    summarize,
)
from .sorter import (
    ComparisonRecord,
    SelectionResult,
    SortConfig,
    SortTrace,
    bubble_select,
    compare,
    model_comparator,
    select_frame,
)
from .strategies import STRATEGIES, select
from .trainer import TrainResult, TrainSpec, desk_scale, preset, sample_batch, train

__version__ = "0.1.0"
