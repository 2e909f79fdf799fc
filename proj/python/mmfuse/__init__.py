"""Image + clinical fusion classifier for phyllodes tumor grading."""

from ._core import (
    Error,
    ablate,
    auc_roc,
    confusion_metrics,
    eer_point,
    explain,
    generate,
    load_config,
    make_folds,
    mean_ci,
    report,
    split,
    synth,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Error",
    "ablate",
    "auc_roc",
    "confusion_metrics",
    "eer_point",
    "explain",
    "generate",
    "load_config",
    "make_folds",
    "mean_ci",
    "report",
    "split",
    "synth",
    "train",
]
