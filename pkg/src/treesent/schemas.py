"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel


class HealthResponse(BaseModel):
    status: str
    version: str


class TrainRequest(BaseModel):
    train_path: str
    dev_path: str
    checkpoint_path: str
    metrics_path: Optional[str] = None
    dict_path: Optional[str] = None
    embeddings_path: Optional[str] = None
    no_dict: bool = False
    encoder: Literal["treelstm", "rvnn"] = "treelstm"
    classifier: Literal["hidden", "attention_only", "concat"] = "concat"
    labels: Literal["binary", "fine5"] = "binary"
    phrase_labels: bool = False
    hidden_dim: int = 200
    word_dim: int = 200
    attn_dim: Optional[int] = None
    attn_candidates: Literal["descendants", "children"] = "descendants"
    optimizer: Literal["adagrad", "adadelta"] = "adagrad"
    lr: float = 0.005
    weight_decay: float = 1e-4
    clip: float = 5.0
    clip_mode: Literal["global_norm", "per_element"] = "global_norm"
    epochs: int = 10
    seed: int = 0
    eval_every: int = 1
    early_stop_dev_acc: Optional[float] = None
    embeddings_in_l2: bool = True


class EpochMetrics(BaseModel):
    epoch: int
    train_loss: float
    dev_acc: Optional[float] = None


class TrainResponse(BaseModel):
    best_epoch: int
    best_dev_accuracy: float
    epochs_run: int
    checkpoint_path: str
    metrics_path: str
    history: List[EpochMetrics]


class EvalRequest(BaseModel):
    checkpoint_path: str
    trees_path: str


class EvalResponse(BaseModel):
    accuracy: float
    n: int


class AttentionRequest(BaseModel):
    checkpoint_path: str
    trees_path: Optional[str] = None
    trees: Optional[List[str]] = None
    include_dot: bool = False


class AttentionEntry(BaseModel):
    node_span: List[int]
    weight: float


class AttentionRecord(BaseModel):
    node_span: List[int]
    distribution: List[float]
    argmax: int
    attention: List[AttentionEntry]
    dot: Optional[str] = None


class AttentionResponse(BaseModel):
    records: List[AttentionRecord]


class GradcheckRequest(BaseModel):
    seed: int = 0
    instances: int = 3
    corrupt_op: bool = False


class CheckResult(BaseModel):
    name: str
    max_relative_error: float
    tolerance: float
    passed: bool


class GradcheckResponse(BaseModel):
    passed: bool
    checks: List[CheckResult]
