"""Training loop: epoch iteration over paired batches, deterministic
validation, best-checkpoint selection, and checkpoint assembly/restore."""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass

import numpy as np

from .data import (
    DatasetSplit,
    LabeledRecord,
    epoch_batches,
    save_checkpoint,
    select_records,
)
from .embedding import ProjectionHead, project
from .errors import ConfigurationError, EvaluationError, TrainingError
from .losses import COMPONENT_NAMES, LabeledBatch, LossConfig, TotalLoss, total_loss
from .numerics import AdamW
from .seeding import derive_rng

logger = logging.getLogger("emoclim.training")


@dataclass(frozen=True)
class TrainConfig:
    embed_dim: int = 128
    hidden_dim: int | None = None  # None: match each head's input width
    temperature: float = 0.07
    lambdas: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    batch_size: int = 64
    lr: float = 1e-4
    weight_decay: float = 0.01
    epochs: int = 15
    dropout: float = 0.5
    seed: int = 0
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.embed_dim < 1:
            raise ConfigurationError("embed_dim must be positive")
        if self.hidden_dim is not None and self.hidden_dim < 1:
            raise ConfigurationError("hidden_dim must be positive")
        if self.batch_size < 2:
            raise ConfigurationError("batch_size must be >= 2")
        if self.lr < 0:
            raise ConfigurationError("lr must be nonnegative")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be nonnegative")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must be in [0,1)")
        LossConfig(self.temperature, tuple(self.lambdas))

    def loss_config(self) -> LossConfig:
        return LossConfig(self.temperature, tuple(self.lambdas))

    def to_json_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["lambdas"] = list(doc["lambdas"])
        return doc


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    components: dict[str, float]
    wall_time: float

    def to_json_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            **{name: self.components.get(name) for name in COMPONENT_NAMES},
            "wall_time": self.wall_time,
        }


@dataclass
class TrainResult:
    image_head: ProjectionHead
    audio_head: ProjectionHead
    log: list[EpochStats]
    best_epoch: int
    best_val_loss: float
    checkpoint_tensors: dict[str, np.ndarray]
    checkpoint_config: dict
    samples_seen: int = 0


def build_heads(cfg: TrainConfig, image_dim: int, audio_dim: int
                ) -> tuple[ProjectionHead, ProjectionHead]:
    image_head = ProjectionHead(
        image_dim, cfg.embed_dim, cfg.hidden_dim, cfg.dropout,
        init_rng=derive_rng(cfg.seed, "init.image_head"),
        dropout_rng=derive_rng(cfg.seed, "dropout.image_head"),
        name="image_head")
    audio_head = ProjectionHead(
        audio_dim, cfg.embed_dim, cfg.hidden_dim, cfg.dropout,
        init_rng=derive_rng(cfg.seed, "init.audio_head"),
        dropout_rng=derive_rng(cfg.seed, "dropout.audio_head"),
        name="audio_head")
    return image_head, audio_head


def eval_embed_matrix(head: ProjectionHead, records) -> np.ndarray:
    """Eval-mode embeddings for a record list: project every chunk, average
    per item, re-normalize. Eval projection is row-independent, so all
    chunks go through in one stacked batch. Works for any records exposing
    `.chunks` and `.item_id`."""
    counts = [rec.chunks.shape[0] for rec in records]
    stacked = np.concatenate([rec.chunks for rec in records], axis=0)
    z = project(head, stacked, train=False)
    out = np.empty((len(records), z.shape[1]), dtype=z.dtype)
    offset = 0
    for i, c in enumerate(counts):
        mean = z[offset:offset + c].mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < 1e-12:
            raise EvaluationError(
                f"item {records[i].item_id}: chunk embeddings average to near-zero")
        out[i] = mean / norm
        offset += c
    return out


def _paired_eval_batches(n_image: int, n_audio: int, batch_size: int):
    """Deterministic unshuffled batch index pairs; the smaller pool wraps."""
    larger = max(n_image, n_audio)
    for start in range(0, larger, batch_size):
        size = min(batch_size, larger - start)
        if size < 2:
            break
        img_idx = [(start + j) % n_image for j in range(size)]
        au_idx = [(start + j) % n_audio for j in range(size)]
        yield img_idx, au_idx


def validate(image_head: ProjectionHead, audio_head: ProjectionHead,
             image_val: list[LabeledRecord], audio_val: list[LabeledRecord],
             cfg: TrainConfig) -> float:
    """Mean total loss over deterministic eval-mode validation batches."""
    if not image_val or not audio_val:
        raise EvaluationError("validation pools must be nonempty")
    z_img = eval_embed_matrix(image_head, image_val)
    z_au = eval_embed_matrix(audio_head, audio_val)
    y_img = np.array([rec.label for rec in image_val], dtype=object)
    y_au = np.array([rec.label for rec in audio_val], dtype=object)
    loss_cfg = cfg.loss_config()

    losses: list[float] = []
    any_contributing = False
    for img_idx, au_idx in _paired_eval_batches(len(image_val), len(audio_val), cfg.batch_size):
        batch = LabeledBatch(z_img[img_idx], y_img[img_idx], z_au[au_idx], y_au[au_idx])
        result = total_loss(batch, loss_cfg)
        losses.append(result.loss)
        any_contributing = any_contributing or result.n_contributing > 0
    if not losses:
        raise EvaluationError("validation pools too small to form a batch")
    if not any_contributing:
        raise EvaluationError("every validation batch had empty positive sets")
    return float(np.mean(losses))


def _assemble_checkpoint(image_head: ProjectionHead, audio_head: ProjectionHead,
                         optimizer: AdamW, cfg: TrainConfig,
                         image_dim: int, audio_dim: int) -> tuple[dict[str, np.ndarray], dict]:
    tensors: dict[str, np.ndarray] = {}
    tensors.update({k: v.copy() for k, v in image_head.state_tensors().items()})
    tensors.update({k: v.copy() for k, v in audio_head.state_tensors().items()})
    for p, m, v in zip(optimizer.params, optimizer.m, optimizer.v):
        tensors[f"optimizer.m.{p.name}"] = m.copy()
        tensors[f"optimizer.v.{p.name}"] = v.copy()
    tensors["optimizer.step_count"] = np.array(float(optimizer.step_count), dtype=np.float32)
    config = dict(cfg.to_json_dict())
    config["image_in_dim"] = image_dim
    config["audio_in_dim"] = audio_dim
    return tensors, config


def heads_from_checkpoint(tensors: dict[str, np.ndarray], config: dict
                          ) -> tuple[ProjectionHead, ProjectionHead, TrainConfig]:
    """Rebuild both heads (parameters and running stats) from a checkpoint."""
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    cfg_doc = {k: v for k, v in config.items() if k in known}
    if "lambdas" in cfg_doc:
        cfg_doc["lambdas"] = tuple(cfg_doc["lambdas"])
    cfg = TrainConfig(**cfg_doc)
    image_head, audio_head = build_heads(
        cfg, int(config["image_in_dim"]), int(config["audio_in_dim"]))
    image_head.load_state_tensors(tensors)
    audio_head.load_state_tensors(tensors)
    return image_head, audio_head, cfg


def train(image_records: list[LabeledRecord], audio_records: list[LabeledRecord],
          image_split: DatasetSplit, audio_split: DatasetSplit,
          cfg: TrainConfig, log_path: str | None = None) -> TrainResult:
    """Run the full optimization and keep the lowest-validation-loss state.

    Deterministic given cfg.seed: initialization, dropout, batch order, and
    chunk choice all derive from it through fixed labels.
    """
    if cfg.epochs < 1:
        raise ConfigurationError("epochs must be >= 1: no checkpoint could be selected")

    img_train = select_records(image_records, image_split.train)
    au_train = select_records(audio_records, audio_split.train)
    img_val = select_records(image_records, image_split.val)
    au_val = select_records(audio_records, audio_split.val)
    if not img_train or not au_train:
        raise ConfigurationError("both training pools must be nonempty")

    image_dim = img_train[0].chunks.shape[1]
    audio_dim = au_train[0].chunks.shape[1]
    image_head, audio_head = build_heads(cfg, image_dim, audio_dim)
    params = image_head.params() + audio_head.params()
    optimizer = AdamW(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    loss_cfg = cfg.loss_config()
    batch_rng = derive_rng(cfg.seed, "batches")

    log: list[EpochStats] = []
    best_val = float("inf")
    best_epoch = -1
    best_snapshot: tuple[dict[str, np.ndarray], dict] | None = None
    samples_seen = 0

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        batch_losses: list[float] = []
        component_sums = {name: 0.0 for name in COMPONENT_NAMES}
        component_counts = {name: 0 for name in COMPONENT_NAMES}

        for b, batch in enumerate(
                epoch_batches(img_train, au_train, cfg.batch_size, batch_rng)):
            z_img = project(image_head, batch.image_features, train=True)
            z_au = project(audio_head, batch.audio_features, train=True)
            result: TotalLoss = total_loss(
                LabeledBatch(z_img, batch.image_labels, z_au, batch.audio_labels), loss_cfg)
            if not np.isfinite(result.loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            optimizer.zero_grads()
            image_head.backward(result.grad_images)
            audio_head.backward(result.grad_audio)
            optimizer.step()
            samples_seen += batch.n
            batch_losses.append(result.loss)
            for name, value in result.components.items():
                if value is not None:
                    component_sums[name] += value
                    component_counts[name] += 1

        val_loss = validate(image_head, audio_head, img_val, au_val, cfg)
        stats = EpochStats(
            epoch=epoch,
            train_loss=float(np.mean(batch_losses)) if batch_losses else float("nan"),
            val_loss=val_loss,
            components={name: (component_sums[name] / component_counts[name]
                               if component_counts[name] else None)
                        for name in COMPONENT_NAMES},
            wall_time=time.perf_counter() - t0,
        )
        log.append(stats)
        logger.info("epoch %d: train_loss=%.6f val_loss=%.6f",
                    epoch, stats.train_loss, stats.val_loss)

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_snapshot = _assemble_checkpoint(
                image_head, audio_head, optimizer, cfg, image_dim, audio_dim)

    assert best_snapshot is not None
    tensors, config = best_snapshot
    config["best_epoch"] = best_epoch
    config["best_val_loss"] = best_val
    if cfg.checkpoint_path:
        save_checkpoint(cfg.checkpoint_path, tensors, config)
    if log_path:
        with open(log_path, "w", encoding="utf-8") as fh:
            for stats in log:
                fh.write(json.dumps(stats.to_json_dict()) + "\n")

    best_image, best_audio, _ = heads_from_checkpoint(tensors, config)
    return TrainResult(
        image_head=best_image,
        audio_head=best_audio,
        log=log,
        best_epoch=best_epoch,
        best_val_loss=best_val,
        checkpoint_tensors=tensors,
        checkpoint_config=config,
        samples_seen=samples_seen,
    )
