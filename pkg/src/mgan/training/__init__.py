"""Two-stage training: source pretraining, then alternating source/target optimization."""

from .checkpoint import FORMAT_VERSION, MAGIC, Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .loop import (
    ConfigError,
    EarlyStopping,
    PairResult,
    TrainConfig,
    TrainLog,
    TrainResult,
    alternating_train,
    apply_step,
    batch_stream,
    format_record,
    pretrain_source,
    source_step,
    source_terms,
    target_step,
    target_terms,
    train_target_only,
)
from .optim import Adam, NonFiniteGradientError, clip_gradients, global_norm

__all__ = [
    "Adam", "Checkpoint", "CheckpointError", "ConfigError", "EarlyStopping", "FORMAT_VERSION",
    "MAGIC", "NonFiniteGradientError", "PairResult", "TrainConfig", "TrainLog", "TrainResult",
    "alternating_train", "apply_step", "batch_stream", "clip_gradients", "format_record",
    "global_norm", "load_checkpoint", "pretrain_source", "save_checkpoint", "source_step",
    "source_terms", "target_step", "target_terms", "train_target_only",
]
