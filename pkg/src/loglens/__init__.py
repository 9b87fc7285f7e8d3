"""Parser-free log anomaly detection.

A character-level Transformer encoder is trained on normal log lines plus
stochastically perturbed copies of them (no parsing, no labels), evaluated
with precision/recall/F1, and later updated from human-provided labels by
retraining only the classifier head while the encoder stays frozen.
"""

__version__ = "0.1.0"

from .augment import PerturbationSpec, build_balanced_pairs, edit_count, perturb_line
from .corpus import (
    LogRecord,
    SplitSpec,
    balance_test_set,
    chronological_split,
    corpus_stats,
    load_labeled_log,
    synth_generate,
)
from .encoding import TokenSequence, Vocabulary, build_fixed_vocab, encode_line, sinusoidal_pe
from .evaluation import ConfusionCounts, MetricsReport, confusion, emit_report, evaluate, prf1
from .gradcheck import grad_check
from .model import (
    Checkpoint,
    ModelConfig,
    ModelParams,
    classify,
    encoder_forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    TrainConfig,
    TrainHistory,
    UpdateSet,
    build_update_set,
    cross_entropy,
    train_selfsup,
    update_with_labels,
)

__all__ = [
    "PerturbationSpec",
    "build_balanced_pairs",
    "edit_count",
    "perturb_line",
    "LogRecord",
    "SplitSpec",
    "balance_test_set",
    "chronological_split",
    "corpus_stats",
    "load_labeled_log",
    "synth_generate",
    "TokenSequence",
    "Vocabulary",
    "build_fixed_vocab",
    "encode_line",
    "sinusoidal_pe",
    "ConfusionCounts",
    "MetricsReport",
    "confusion",
    "emit_report",
    "evaluate",
    "prf1",
    "grad_check",
    "Checkpoint",
    "ModelConfig",
    "ModelParams",
    "classify",
    "encoder_forward",
    "init_params",
    "load_checkpoint",
    "save_checkpoint",
    "TrainConfig",
    "TrainHistory",
    "UpdateSet",
    "build_update_set",
    "cross_entropy",
    "train_selfsup",
    "update_with_labels",
]
