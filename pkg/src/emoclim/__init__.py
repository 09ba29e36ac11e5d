"""Emotion-aligned joint embedding engine for image and music features.

Trains per-modality projection heads over frozen encoder features with
supervised contrastive objectives, evaluates the shared space through
cross-modal and intra-modal retrieval, and probes the music embeddings
with a multi-label tagging head.
"""

from .data import (
    DatasetSplit,
    FeatureRecord,
    IMAGE_TAXONOMY,
    LabeledRecord,
    MUSIC_TAXONOMY,
    Modality,
    SourceTaxonomy,
    SyntheticConfig,
    UnifiedEmotion,
    generate_synthetic,
    load_split,
    load_unified,
    map_label,
    read_feature_file,
    read_tag_file,
    save_split,
    stratified_split,
    write_feature_file,
    write_tag_file,
)
from .embedding import ChunkPlan, JointEmbedding, ProjectionHead, embed_item_eval, num_chunks
from .errors import EmoclimError
from .evaluation import (
    ProbeConfig,
    RetrievalReport,
    TagProbe,
    evaluate_retrieval,
    pr_auc,
    roc_auc,
    train_tag_probe,
)
from .losses import LabeledBatch, LossConfig, supcon_cross, supcon_intra, total_loss
from .training import TrainConfig, TrainResult, heads_from_checkpoint, train, validate

__version__ = "0.1.0"

__all__ = [
    "ChunkPlan",
    "DatasetSplit",
    "EmoclimError",
    "FeatureRecord",
    "IMAGE_TAXONOMY",
    "JointEmbedding",
    "LabeledBatch",
    "LabeledRecord",
    "LossConfig",
    "MUSIC_TAXONOMY",
    "Modality",
    "ProbeConfig",
    "ProjectionHead",
    "RetrievalReport",
    "SourceTaxonomy",
    "SyntheticConfig",
    "TagProbe",
    "TrainConfig",
    "TrainResult",
    "UnifiedEmotion",
    "embed_item_eval",
    "evaluate_retrieval",
    "generate_synthetic",
    "heads_from_checkpoint",
    "load_split",
    "load_unified",
    "map_label",
    "num_chunks",
    "pr_auc",
    "read_feature_file",
    "read_tag_file",
    "roc_auc",
    "save_split",
    "stratified_split",
    "supcon_cross",
    "supcon_intra",
    "total_loss",
    "train",
    "train_tag_probe",
    "validate",
    "write_feature_file",
    "write_tag_file",
]
