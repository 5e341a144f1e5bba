from .data import SplitDataset, Standardizer, batches, fit_standardizer, make_splits
from .loop import (
    EarlyStopping,
    FitResult,
    TrainConfig,
    evaluate,
    fit,
    monitor_value,
    predict_split,
    regression_mse,
    score_predictions,
    train_step,
)
from .objectives import AdamState, adam_step, aggregate_losses, clip_global_norm, task_loss

__all__ = [
    "AdamState", "EarlyStopping", "FitResult", "SplitDataset", "Standardizer", "TrainConfig",
    "adam_step", "aggregate_losses", "batches", "clip_global_norm", "evaluate", "fit",
    "fit_standardizer", "make_splits", "monitor_value", "predict_split", "regression_mse",
    "score_predictions", "task_loss", "train_step",
]
