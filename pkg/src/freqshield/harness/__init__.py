"""Desk-scale benchmark harness: datasets, splits, training, metrics, exports."""

from .carriers import FAMILIES, make_carrier
from .dataset import (CLEAN, DatasetManifest, GenerationRecipe, ImageCache, SampleRecord,
                      generate_dataset)
from .inspect import (AttnProfile, GateHeatmap, attention_profile, export_attention_profile,
                      export_gate_heatmap, gate_quadrant_stats)
from .metrics import EvalReport, read_predictions_csv, write_predictions_csv
from .splits import (FRACTIONS, SplitPlan, ablate_algorithms, check_plan, make_loao_split,
                     make_random_split, subsample_fraction)
from .training import (AugmentConfig, TrainConfig, TrainResult, augment_batch, evaluate,
                       run_training)

__all__ = [
    "CLEAN", "FAMILIES", "AttnProfile", "AugmentConfig", "DatasetManifest", "EvalReport",
    "GateHeatmap", "GenerationRecipe", "ImageCache", "SampleRecord", "SplitPlan", "TrainConfig",
    "TrainResult", "FRACTIONS", "ablate_algorithms", "attention_profile", "augment_batch",
    "check_plan", "evaluate", "export_attention_profile", "export_gate_heatmap",
    "gate_quadrant_stats", "generate_dataset", "make_carrier", "make_loao_split",
    "make_random_split", "read_predictions_csv", "run_training", "subsample_fraction",
    "write_predictions_csv",
]
