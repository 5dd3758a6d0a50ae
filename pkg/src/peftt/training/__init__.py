from .optim import Adam, AdamState, adam_step
from .scenarios import ABBREVIATIONS, Mode, Scenario, abbreviation_for, default_lr, resolve_abbreviation
from .trainer import (
    EVAL_BATCH_SIZE,
    ClassificationPipeline,
    EpochRecord,
    Trainer,
    TrainReport,
    evaluate,
    run_training,
)

__all__ = [
    "ABBREVIATIONS",
    "EVAL_BATCH_SIZE",
    "Adam",
    "AdamState",
    "ClassificationPipeline",
    "EpochRecord",
    "Mode",
    "Scenario",
    "TrainReport",
    "Trainer",
    "abbreviation_for",
    "adam_step",
    "default_lr",
    "evaluate",
    "resolve_abbreviation",
    "run_training",
]
