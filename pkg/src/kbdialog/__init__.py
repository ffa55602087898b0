"""Task-oriented dialogue with attention-based state tracking, differentiable
KB lookup and copy-augmented decoding, on a small numpy autodiff core."""

from .corpus import (
    Dialogue,
    Instance,
    KBTable,
    Vocabulary,
    build_instances,
    build_vocabulary,
    delexicalize,
    load_kvret,
)
from .evaluate import EvalReport, corpus_bleu, entity_f1, evaluate_model
from .model import DialogueModel, ModelConfig
from .training import TrainConfig, train

__all__ = [
    "Dialogue",
    "DialogueModel",
    "EvalReport",
    "Instance",
    "KBTable",
    "ModelConfig",
    "TrainConfig",
    "Vocabulary",
    "build_instances",
    "build_vocabulary",
    "corpus_bleu",
    "delexicalize",
    "entity_f1",
    "evaluate_model",
    "load_kvret",
    "train",
]

__version__ = "0.1.0"
