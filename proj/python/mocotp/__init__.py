"""Momentum contrast with temporal positives: python bindings."""

from ._core import (
    MemoryQueue,
    MocotpError,
    average_precision,
    cosine_lr,
    f1_sweep,
    info_nce,
    info_nce_grad,
    iou,
    macro_f1,
    masked_info_nce,
    match_detections,
    mean_average_precision,
    pr_curve,
    random_dihedral,
    rot90,
    run_det_eval,
    run_pretrain,
    run_probe_suite,
    run_synth_gen,
    tile_image,
)

__all__ = [
    "MemoryQueue",
    "MocotpError",
    "average_precision",
    "cosine_lr",
    "f1_sweep",
    "info_nce",
    "info_nce_grad",
    "iou",
    "macro_f1",
    "masked_info_nce",
    "match_detections",
    "mean_average_precision",
    "pr_curve",
    "random_dihedral",
    "rot90",
    "run_det_eval",
    "run_pretrain",
    "run_probe_suite",
    "run_synth_gen",
    "tile_image",
]
