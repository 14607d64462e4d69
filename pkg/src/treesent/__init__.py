"""Tree-structured sentiment classifiers (RvNN / binary Tree-LSTM) with
subtree attention and polar-dictionary distant supervision."""

__version__ = "0.1.0"

from .config import TrainingConfig
from .trees import ParseTree, binarize, label_scheme, parse_sexpr, read_tree_file
from .lexicon import PolarDictionary, annotate, collect_loss_nodes, load_dictionary
from .embeddings import Vocabulary, build_vocabulary, load_embeddings
from .model import ModelParams, init_model, predict
from .training import evaluate, sentence_loss, train
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "__version__",
    "TrainingConfig",
    "ParseTree",
    "binarize",
    "label_scheme",
    "parse_sexpr",
    "read_tree_file",
    "PolarDictionary",
    "annotate",
    "collect_loss_nodes",
    "load_dictionary",
    "Vocabulary",
    "build_vocabulary",
    "load_embeddings",
    "ModelParams",
    "init_model",
    "predict",
    "evaluate",
    "sentence_loss",
    "train",
    "load_checkpoint",
    "save_checkpoint",
]
