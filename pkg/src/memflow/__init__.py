"""Joint entity and relation extraction with category memories and trigger sensing."""

from .config import TrainConfig, load_config, preset
from .corpus import Corpus, Sentence, generate_synthetic, load_corpus, save_corpus, synthetic_splits
from .evaluation import EvalReport, score
from .model import Model
from .train import Prediction, predict, predict_corpus, train_two_stage

__version__ = "0.1.0"

__all__ = [
    "Corpus", "EvalReport", "Model", "Prediction", "Sentence", "TrainConfig",
    "generate_synthetic", "load_config", "load_corpus", "predict", "predict_corpus",
    "preset", "save_corpus", "score", "synthetic_splits", "train_two_stage",
]
