"""Per-modality projection heads mapping frozen encoder features into the
shared unit-sphere embedding space, plus chunk-window arithmetic and the
eval-time chunk aggregation rule."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .data import LabeledRecord, Modality, UnifiedEmotion, sample_train_chunk  # noqa: F401
from .errors import ConfigurationError, DegenerateInputError
from .numerics import (
    BatchNormLayer,
    DropoutLayer,
    L2NormalizeLayer,
    LinearLayer,
    Param,
    ReluLayer,
)

logger = logging.getLogger("emoclim.embedding")


@dataclass
class JointEmbedding:
    """A unit-norm vector in the joint space with its provenance."""

    vector: np.ndarray
    modality: Modality
    label: UnifiedEmotion
    item_id: str


class ProjectionHead:
    """linear -> batchnorm -> relu -> dropout -> linear -> L2 normalize.

    Output rows always lie on the unit sphere; the final normalization's
    Jacobian is part of the backward pass.
    """

    def __init__(self, in_dim: int, embed_dim: int, hidden_dim: int | None,
                 dropout_rate: float, init_rng: np.random.Generator,
                 dropout_rng: np.random.Generator, name: str = "head",
                 dtype=np.float32):
        hidden = hidden_dim if hidden_dim is not None else in_dim
        if embed_dim < 1 or hidden < 1:
            raise ConfigurationError("embed_dim and hidden_dim must be positive")
        self.name = name
        self.in_dim = in_dim
        self.hidden_dim = hidden
        self.embed_dim = embed_dim
        self.linear1 = LinearLayer(in_dim, hidden, init_rng, dtype, name=f"{name}.linear1")
        self.bn = BatchNormLayer(hidden, dtype=dtype, name=f"{name}.bn")
        self.relu = ReluLayer()
        self.dropout = DropoutLayer(dropout_rate, dropout_rng, name=f"{name}.dropout")
        self.linear2 = LinearLayer(hidden, embed_dim, init_rng, dtype, name=f"{name}.linear2")
        self.l2norm = L2NormalizeLayer()

    def forward(self, features: np.ndarray, train: bool) -> np.ndarray:
        h = self.linear1.forward(features)
        h = self.bn.forward(h, train=train)
        h = self.relu.forward(h)
        h = self.dropout.forward(h, train=train)
        h = self.linear2.forward(h)
        return self.l2norm.forward(h)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        g = self.l2norm.backward(grad_out)
        g = self.linear2.backward(g)
        g = self.dropout.backward(g)
        g = self.relu.backward(g)
        g = self.bn.backward(g)
        return self.linear1.backward(g)

    def params(self) -> list[Param]:
        return self.linear1.params() + self.bn.params() + self.linear2.params()

    def zero_grads(self) -> None:
        for p in self.params():
            p.grad[...] = 0

    def clone(self, dtype=None) -> "ProjectionHead":
        dup = ProjectionHead.__new__(ProjectionHead)
        dup.name = self.name
        dup.in_dim = self.in_dim
        dup.hidden_dim = self.hidden_dim
        dup.embed_dim = self.embed_dim
        dup.linear1 = self.linear1.clone(dtype)
        dup.bn = self.bn.clone(dtype)
        dup.relu = ReluLayer()
        dup.dropout = self.dropout.clone(dtype)
        dup.linear2 = self.linear2.clone(dtype)
        dup.l2norm = L2NormalizeLayer()
        return dup

    def state_tensors(self) -> dict[str, np.ndarray]:
        """Persistable arrays: parameters plus batch-norm running stats."""
        return {
            f"{self.name}.linear1.weight": self.linear1.weight,
            f"{self.name}.linear1.bias": self.linear1.bias,
            f"{self.name}.bn.gamma": self.bn.gamma,
            f"{self.name}.bn.beta": self.bn.beta,
            f"{self.name}.bn.running_mean": self.bn.running_mean,
            f"{self.name}.bn.running_var": self.bn.running_var,
            f"{self.name}.linear2.weight": self.linear2.weight,
            f"{self.name}.linear2.bias": self.linear2.bias,
        }

    def load_state_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        for name, target in self.state_tensors().items():
            if name not in tensors:
                raise ConfigurationError(f"checkpoint is missing tensor '{name}'")
            value = tensors[name]
            if value.shape != target.shape:
                raise ConfigurationError(
                    f"tensor '{name}': shape {value.shape} != expected {target.shape}")
            target[...] = value.astype(target.dtype)


def project(head: ProjectionHead, features: np.ndarray, train: bool) -> np.ndarray:
    """Embed a feature batch; every output row has unit norm."""
    if not np.all(np.isfinite(features)):
        raise ConfigurationError("features contain non-finite values")
    return head.forward(features, train=train)


@dataclass(frozen=True)
class ChunkPlan:
    """Sliding-window layout over a clip of `total_len` seconds."""

    total_len: float
    window_len: float
    overlap_ratio: float = 0.75

    def __post_init__(self):
        if self.total_len <= 0 or self.window_len <= 0:
            raise ConfigurationError("chunk plan lengths must be positive")
        if not 0.0 <= self.overlap_ratio < 1.0:
            raise ConfigurationError(f"overlap_ratio must be in [0,1), got {self.overlap_ratio}")

    @property
    def hop(self) -> float:
        return self.window_len * (1.0 - self.overlap_ratio)


def num_chunks(plan: ChunkPlan) -> int:
    """floor((total - window) / hop) + 1 sliding windows.

    A window longer than the clip degrades to a single full-length chunk.
    The tiny epsilon keeps exact-fit hop counts from rounding down.
    """
    if plan.window_len > plan.total_len:
        logger.warning("window %.3fs exceeds clip length %.3fs; using one full-length chunk",
                       plan.window_len, plan.total_len)
        return 1
    return int(math.floor((plan.total_len - plan.window_len) / plan.hop + 1e-9)) + 1


def chunk_starts(plan: ChunkPlan) -> list[float]:
    """Start offsets (seconds) of each sliding window."""
    if plan.window_len > plan.total_len:
        return [0.0]
    return [i * plan.hop for i in range(num_chunks(plan))]


def embed_item_eval(head: ProjectionHead, record: LabeledRecord,
                    modality: Modality) -> JointEmbedding:
    """Project every chunk in eval mode, average, and re-normalize.

    Re-normalization keeps the unit-norm invariant; cosine ranking is
    unaffected because it is scale-invariant per query.
    """
    z = project(head, record.chunks, train=False)
    mean = z.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < 1e-12:
        raise DegenerateInputError(
            f"item {record.item_id}: chunk embeddings average to a near-zero vector")
    return JointEmbedding(
        vector=(mean / norm).astype(z.dtype),
        modality=modality,
        label=record.label,
        item_id=record.item_id,
    )
