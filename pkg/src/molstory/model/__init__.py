from .initializer import init_initializer, initializer_forward, initializer_loss
from .layers import geometry_attention
from .network import (
    CAUTERIZE, ActionVocabulary, ModelConfig, StepBatch, accuracy, backward, collate,
    forward, forward_step, init_params, state_features, story_loss,
)
from .optim import AdamState, adam_step
from .weights import WeightFormatError, dump_weights, load_weights, parse_weights, save_weights

__all__ = [
    "CAUTERIZE", "ActionVocabulary", "AdamState", "ModelConfig", "StepBatch",
    "WeightFormatError", "accuracy", "adam_step", "backward", "collate", "dump_weights",
    "forward", "forward_step", "geometry_attention", "init_initializer",
    "initializer_forward", "initializer_loss", "init_params", "load_weights",
    "parse_weights", "save_weights", "state_features", "story_loss",
]
