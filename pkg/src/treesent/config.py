"""Training/run configuration shared across the model, trainer, and service."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .trees import LabelScheme, label_scheme

__all__ = ["TrainingConfig"]

_ENCODERS = ("treelstm", "rvnn")
_CLASSIFIERS = ("hidden", "attention_only", "concat")
_OPTIMIZERS = ("adagrad", "adadelta")
_LABELS = ("binary", "fine5")
_CANDIDATE_SCOPES = ("descendants", "children")
_CLIP_MODES = ("global_norm", "per_element")


@dataclass
class TrainingConfig:
    hidden_dim: int = 200
    word_dim: int = 200
    attn_dim: int | None = None
    labels: str = "binary"
    sentence_level_only: bool = True
    encoder: str = "treelstm"
    classifier: str = "concat"
    use_dictionary: bool = False
    attn_candidates: str = "descendants"
    optimizer: str = "adagrad"
    lr: float = 0.005
    adagrad_eps: float = 1e-8
    adadelta_rho: float = 0.95
    adadelta_eps: float = 1e-6
    weight_decay: float = 1e-4
    clip: float = 5.0
    clip_mode: str = "global_norm"
    epochs: int = 10
    seed: int = 0
    eval_every: int = 1
    early_stop_dev_acc: float | None = None
    forget_bias_one: bool = True
    embeddings_in_l2: bool = True

    def __post_init__(self):
        if self.hidden_dim <= 0 or self.word_dim <= 0:
            raise ValueError("hidden_dim and word_dim must be positive")
        if self.attn_dim is not None and self.attn_dim <= 0:
            raise ValueError("attn_dim must be positive")
        if self.encoder not in _ENCODERS:
            raise ValueError(f"encoder must be one of {_ENCODERS}")
        if self.classifier not in _CLASSIFIERS:
            raise ValueError(f"classifier must be one of {_CLASSIFIERS}")
        if self.optimizer not in _OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {_OPTIMIZERS}")
        if self.labels not in _LABELS:
            raise ValueError(f"labels must be one of {_LABELS}")
        if self.attn_candidates not in _CANDIDATE_SCOPES:
            raise ValueError(f"attn_candidates must be one of {_CANDIDATE_SCOPES}")
        if self.clip_mode not in _CLIP_MODES:
            raise ValueError(f"clip_mode must be one of {_CLIP_MODES}")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.clip <= 0:
            raise ValueError("clip threshold must be positive")
        if self.epochs < 1 or self.eval_every < 1:
            raise ValueError("epochs and eval_every must be at least 1")

    @property
    def num_classes(self) -> int:
        return 2 if self.labels == "binary" else 5

    @property
    def use_attention(self) -> bool:
        return self.classifier != "hidden"

    @property
    def attention_dim(self) -> int:
        return self.attn_dim if self.attn_dim is not None else self.hidden_dim

    def scheme(self) -> LabelScheme:
        return label_scheme(self.labels, sentence_level_only=self.sentence_level_only)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)
