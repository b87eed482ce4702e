from .calibration import (
    AXES, CalibrationReport, FragmentCountPredictor, IdentityPredictor, NearestNeighborPredictor,
    PromptDensity, calibrate, kde_fit, kde_score, synthetic_properties,
)
from .config import TrainConfig
from .generation import generate, sample_start_fragment, top_k_indices
from .training import FragmentInitializer, StoryGenerator, load_model, save_model, split_indices, train

__all__ = [
    "AXES", "CalibrationReport", "FragmentCountPredictor", "FragmentInitializer",
    "IdentityPredictor", "NearestNeighborPredictor", "PromptDensity", "StoryGenerator",
    "TrainConfig", "calibrate", "generate", "kde_fit", "kde_score", "sample_start_fragment",
    "load_model", "save_model", "split_indices", "synthetic_properties", "top_k_indices", "train",
]
