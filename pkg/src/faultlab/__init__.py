"""faultlab: reversible fault injection for small transformer checkpoints.

Load a deterministic transformer, inject parameterized faults (bit flips,
weight noise, activation damage, attention-mask noise, head/layer dropout),
measure the effect with seeded repeatable experiments, and prove the model
byte-identical after revert.
"""

from ._version import __version__
from .backend import BACKEND_NAME
from .checkpoint import load_checkpoint, save_checkpoint, validate
from .data import (
    Batch,
    ClassificationDataset,
    ClassificationRecord,
    LMDataset,
    Tokenizer,
    batch,
    load_classification,
    load_lm_lines,
    subset,
)
from .errors import (
    BadMagicError,
    CheckpointError,
    DataError,
    DimensionError,
    DoubleRevertError,
    EmptyDatasetError,
    FaultlabError,
    ForeignReceiptError,
    HeaderError,
    InvalidSpecError,
    MetricError,
    OverlappingTensorsError,
    ReportError,
    RunnerError,
    RunnerIntegrityError,
    SequenceTooLongError,
    ShapeLengthMismatchError,
    SiteOccupiedError,
    SnapshotMismatchError,
    SpecParseError,
    StructureError,
    TargetingError,
    TruncatedPayloadError,
    UnknownDtypeError,
    VocabRangeError,
)
from .faults import (
    FAULT_VARIANTS,
    ActivationFault,
    AttentionMaskFault,
    BitFlip,
    FaultReceipt,
    HeadDropout,
    LayerFault,
    WeightCorruption,
    apply_fault,
    revert,
)
from .injector import FaultInjector
from .metrics import (
    METRIC_NAMES,
    AccuracyMetric,
    LatencyMetric,
    MetricResult,
    PerplexityMetric,
    evaluate_all,
    make_metrics,
)
from .model import (
    HOOK_SITES,
    ModelConfig,
    TransformerModel,
    expected_param_shapes,
    resolve_layers,
    restore_params,
    snapshot_params,
)
from .report import compare, load_result, markdown_summary, plot_csv
from .rng import SeededRng, fnv1a64
from .runner import (
    SUMMARY_CSV_COLUMNS,
    ExperimentConfig,
    ExperimentResult,
    SummaryStats,
    compute_summary,
    persist,
    run,
    summary_csv,
    sweep_layers,
    with_layer,
)
from .spec_grammar import format_fault_spec, parse_fault_spec
from .tensor import Tensor, gelu, layer_norm, matmul, matmul_nt, softmax_lastdim
from .toys import (
    build_margin_classifier,
    build_toy_model,
    build_uniform_lm,
    make_margin_dataset,
    make_toy_files,
)

__all__ = [
    "__version__",
    "BACKEND_NAME",
    # errors
    "FaultlabError",
    "DimensionError",
    "VocabRangeError",
    "SequenceTooLongError",
    "StructureError",
    "SnapshotMismatchError",
    "SiteOccupiedError",
    "CheckpointError",
    "BadMagicError",
    "TruncatedPayloadError",
    "OverlappingTensorsError",
    "ShapeLengthMismatchError",
    "UnknownDtypeError",
    "HeaderError",
    "InvalidSpecError",
    "SpecParseError",
    "TargetingError",
    "DoubleRevertError",
    "ForeignReceiptError",
    "DataError",
    "EmptyDatasetError",
    "MetricError",
    "RunnerError",
    "RunnerIntegrityError",
    "ReportError",
    # tensors
    "Tensor",
    "matmul",
    "matmul_nt",
    "softmax_lastdim",
    "layer_norm",
    "gelu",
    # rng
    "SeededRng",
    "fnv1a64",
    # checkpoints
    "save_checkpoint",
    "load_checkpoint",
    "validate",
    # model
    "ModelConfig",
    "TransformerModel",
    "expected_param_shapes",
    "resolve_layers",
    "snapshot_params",
    "restore_params",
    "HOOK_SITES",
    # faults
    "FAULT_VARIANTS",
    "BitFlip",
    "WeightCorruption",
    "ActivationFault",
    "AttentionMaskFault",
    "HeadDropout",
    "LayerFault",
    "FaultReceipt",
    "apply_fault",
    "revert",
    "FaultInjector",
    "parse_fault_spec",
    "format_fault_spec",
    # data
    "Tokenizer",
    "ClassificationRecord",
    "ClassificationDataset",
    "LMDataset",
    "Batch",
    "load_classification",
    "load_lm_lines",
    "subset",
    "batch",
    # metrics
    "METRIC_NAMES",
    "MetricResult",
    "AccuracyMetric",
    "PerplexityMetric",
    "LatencyMetric",
    "make_metrics",
    "evaluate_all",
    # experiments
    "ExperimentConfig",
    "ExperimentResult",
    "SummaryStats",
    "compute_summary",
    "run",
    "sweep_layers",
    "with_layer",
    "persist",
    "summary_csv",
    "SUMMARY_CSV_COLUMNS",
    # reports
    "load_result",
    "plot_csv",
    "markdown_summary",
    "compare",
    # toys
    "build_toy_model",
    "build_uniform_lm",
    "build_margin_classifier",
    "make_margin_dataset",
    "make_toy_files",
]
