"""Retrieval evaluation over the joint space (four directions, precision@K
and mean reciprocal rank, macro-averaged per emotion class) and the
downstream multi-label tagging probe with ROC-AUC / PR-AUC metrics."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import LabeledRecord, UnifiedEmotion
from .embedding import JointEmbedding, ProjectionHead
from .errors import ConfigurationError, EvaluationError, TrainingError
from .numerics import AdamW, BatchNormLayer, LinearLayer, Param, ReluLayer
from .seeding import derive_rng

logger = logging.getLogger("emoclim.evaluation")

DIRECTIONS = ("image_to_audio", "audio_to_image", "image_to_image", "audio_to_audio")


# ---------------------------------------------------------------------------
# Ranking and rank metrics


def rank_candidates(query: JointEmbedding, candidates: list[JointEmbedding],
                    exclude_query_id: bool = False) -> list[str]:
    """Candidate ids by descending cosine similarity; ties break by
    ascending id so reports are reproducible."""
    pool = [c for c in candidates if not (exclude_query_id and c.item_id == query.item_id)]
    if not pool:
        raise EvaluationError("empty candidate set")
    scored = [(-float(query.vector @ c.vector), c.item_id) for c in pool]
    return [item_id for _, item_id in sorted(scored)]


def precision_at_k(ranked_labels, query_label, k: int) -> float:
    if len(ranked_labels) < k:
        raise EvaluationError(f"need at least {k} candidates, got {len(ranked_labels)}")
    hits = sum(1 for lab in ranked_labels[:k] if lab == query_label)
    return hits / k


def reciprocal_rank(ranked_labels, query_label) -> float:
    for rank, lab in enumerate(ranked_labels, start=1):
        if lab == query_label:
            return 1.0 / rank
    return 0.0


def macro_average(values: list[float], labels: list) -> tuple[dict, float]:
    """Per-class means, then the unweighted mean across classes; classes
    with no queries are excluded from the average with a warning."""
    if not values:
        raise EvaluationError("no queries to average")
    per_class: dict = {}
    for emotion in UnifiedEmotion:
        member = [v for v, lab in zip(values, labels) if lab == emotion]
        if member:
            per_class[emotion] = float(np.mean(member))
    absent = [e.name for e in UnifiedEmotion if e not in per_class]
    if absent:
        logger.warning("classes with no queries excluded from macro average: %s",
                       ", ".join(absent))
    macro = float(np.mean(list(per_class.values())))
    return per_class, macro


# ---------------------------------------------------------------------------
# Retrieval report


@dataclass
class DirectionResult:
    per_class_precision: dict[UnifiedEmotion, float]
    per_class_mrr: dict[UnifiedEmotion, float]
    macro_precision: float
    macro_mrr: float


@dataclass
class RetrievalReport:
    k: int
    directions: dict[str, DirectionResult]

    def to_json_dict(self) -> dict:
        doc: dict = {"k": self.k, "directions": {}}
        for name, res in self.directions.items():
            doc["directions"][name] = {
                "per_class": {
                    emotion.value: {
                        f"p_at_{self.k}": res.per_class_precision[emotion],
                        "mrr": res.per_class_mrr[emotion],
                    }
                    for emotion in res.per_class_precision
                },
                f"macro_p_at_{self.k}": res.macro_precision,
                "macro_mrr": res.macro_mrr,
            }
        return doc

    def csv_lines(self) -> list[str]:
        """One wide row mirroring the retrieval-table layout."""
        header, row = [], []
        for name in DIRECTIONS:
            res = self.directions[name]
            header += [f"{name}_p_at_{self.k}", f"{name}_mrr"]
            row += [f"{res.macro_precision:.4f}", f"{res.macro_mrr:.4f}"]
        return [",".join(header), ",".join(row)]


def _direction_metrics(queries: list[JointEmbedding], candidates: list[JointEmbedding],
                       k: int, intra_modal: bool, n_threads: int = 1) -> DirectionResult:
    cand_matrix = np.stack([c.vector for c in candidates]).astype(np.float64)
    cand_ids = [c.item_id for c in candidates]
    cand_labels = [c.label for c in candidates]
    # Ties break by ascending candidate id: pre-sorting by id makes the
    # stable score sort inherit that order.
    id_order = sorted(range(len(candidates)), key=lambda i: cand_ids[i])
    cand_matrix = cand_matrix[id_order]
    cand_ids = [cand_ids[i] for i in id_order]
    cand_labels = [cand_labels[i] for i in id_order]

    def one_query(q: JointEmbedding) -> tuple[float, float]:
        scores = cand_matrix @ q.vector.astype(np.float64)
        order = np.argsort(-scores, kind="stable")
        ranked = [cand_labels[i] for i in order
                  if not (intra_modal and cand_ids[i] == q.item_id)]
        if len(ranked) < k:
            raise EvaluationError(
                f"query {q.item_id}: only {len(ranked)} candidates for k={k}")
        return precision_at_k(ranked, q.label, k), reciprocal_rank(ranked, q.label)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(one_query, queries))
    else:
        results = [one_query(q) for q in queries]

    precisions = [p for p, _ in results]
    rrs = [r for _, r in results]
    labels = [q.label for q in queries]
    per_class_p, macro_p = macro_average(precisions, labels)
    per_class_r, macro_r = macro_average(rrs, labels)
    return DirectionResult(per_class_p, per_class_r, macro_p, macro_r)


def evaluate_retrieval(image_embeddings: list[JointEmbedding],
                       audio_embeddings: list[JointEmbedding],
                       k: int = 5, n_threads: int = 1) -> RetrievalReport:
    """All four retrieval directions; intra-modal directions exclude the
    query item itself from its candidate pool."""
    if not image_embeddings or not audio_embeddings:
        raise EvaluationError("both embedding pools must be nonempty")
    spec = {
        "image_to_audio": (image_embeddings, audio_embeddings, False),
        "audio_to_image": (audio_embeddings, image_embeddings, False),
        "image_to_image": (image_embeddings, image_embeddings, True),
        "audio_to_audio": (audio_embeddings, audio_embeddings, True),
    }
    directions = {
        name: _direction_metrics(queries, candidates, k, intra, n_threads)
        for name, (queries, candidates, intra) in spec.items()
    }
    return RetrievalReport(k=k, directions=directions)


# ---------------------------------------------------------------------------
# Threshold-free binary metrics


def roc_auc(scores, labels) -> float:
    """Normalized Mann-Whitney U: P(random positive scores above random
    negative), ties counting one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("roc_auc needs at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j < scores.size and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + 1 + j)  # midrank of the tie group
        i = j
    rank_sum = math.fsum(ranks[labels])
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def pr_auc(scores, labels) -> float:
    """Average precision: mean of precision measured at each positive's
    rank, scanning by descending score with index-order tie-breaking."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise EvaluationError("pr_auc needs at least one positive and one negative")
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    precisions = []
    tp = 0
    for rank, hit in enumerate(hits, start=1):
        if hit:
            tp += 1
            precisions.append(tp / rank)
    return math.fsum(precisions) / n_pos


def tag_metrics(scores: np.ndarray, targets: np.ndarray
                ) -> tuple[list[float | None], list[float | None], float, float]:
    """Per-tag ROC-AUC / PR-AUC plus unweighted macro averages.

    Tags with no positives or no negatives are excluded (None) with a
    warning rather than pinned to 0.5.
    """
    scores = np.asarray(scores)
    targets = np.asarray(targets)
    if scores.shape != targets.shape:
        raise ConfigurationError(f"scores {scores.shape} vs targets {targets.shape}")
    roc: list[float | None] = []
    pr: list[float | None] = []
    excluded = 0
    for t in range(scores.shape[1]):
        col = targets[:, t]
        if col.min() == col.max():
            roc.append(None)
            pr.append(None)
            excluded += 1
            continue
        roc.append(roc_auc(scores[:, t], col))
        pr.append(pr_auc(scores[:, t], col))
    if excluded:
        logger.warning("%d tags excluded from AUC averages (single-class)", excluded)
    usable_roc = [v for v in roc if v is not None]
    usable_pr = [v for v in pr if v is not None]
    if not usable_roc:
        raise EvaluationError("no tag had both positives and negatives")
    return roc, pr, float(np.mean(usable_roc)), float(np.mean(usable_pr))


# ---------------------------------------------------------------------------
# Tagging probe


@dataclass(frozen=True)
class ProbeConfig:
    hidden_dim: int = 512
    lr: float = 1e-3
    weight_decay: float = 0.0
    epochs: int = 100
    batch_size: int = 128
    seed: int = 0


class TagProbe:
    """linear -> batchnorm -> relu -> linear classifier head over frozen
    embeddings; outputs raw logits."""

    def __init__(self, in_dim: int, n_tags: int, hidden_dim: int,
                 rng: np.random.Generator, dtype=np.float32):
        self.in_dim = in_dim
        self.n_tags = n_tags
        self.linear1 = LinearLayer(in_dim, hidden_dim, rng, dtype, name="probe.linear1")
        self.bn = BatchNormLayer(hidden_dim, dtype=dtype, name="probe.bn")
        self.relu = ReluLayer()
        self.linear2 = LinearLayer(hidden_dim, n_tags, rng, dtype, name="probe.linear2")

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        h = self.linear1.forward(x)
        h = self.bn.forward(h, train=train)
        h = self.relu.forward(h)
        return self.linear2.forward(h)

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        g = self.linear2.backward(grad_logits)
        g = self.relu.backward(g)
        g = self.bn.backward(g)
        return self.linear1.backward(g)

    def params(self) -> list[Param]:
        return self.linear1.params() + self.bn.params() + self.linear2.params()

    def clone(self, dtype=None) -> "TagProbe":
        dup = TagProbe.__new__(TagProbe)
        dup.in_dim = self.in_dim
        dup.n_tags = self.n_tags
        dup.linear1 = self.linear1.clone(dtype)
        dup.bn = self.bn.clone(dtype)
        dup.relu = ReluLayer()
        dup.linear2 = self.linear2.clone(dtype)
        return dup


def bce_with_logits(logits: np.ndarray, targets: np.ndarray
                    ) -> tuple[float, np.ndarray]:
    """Mean elementwise binary cross-entropy on raw logits, with gradient.

    Uses the overflow-free form max(x,0) - x*t + log(1 + exp(-|x|)).
    """
    x = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if x.shape != t.shape:
        raise ConfigurationError(f"logits {x.shape} vs targets {t.shape}")
    per_entry = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    loss = float(per_entry.mean())
    sigmoid = 1.0 / (1.0 + np.exp(-x))
    grad = ((sigmoid - t) / x.size).astype(logits.dtype)
    return loss, grad


def train_tag_probe(features: np.ndarray, tags: np.ndarray,
                    cfg: ProbeConfig = ProbeConfig()) -> TagProbe:
    """Fit the probe on frozen features with AdamW; deterministic in seed."""
    features = np.asarray(features, dtype=np.float32)
    tags = np.asarray(tags, dtype=np.float32)
    if features.shape[0] != tags.shape[0]:
        raise ConfigurationError("features and tags must have matching row counts")
    n, d = features.shape
    probe = TagProbe(d, tags.shape[1], cfg.hidden_dim, derive_rng(cfg.seed, "init.probe"))
    optimizer = AdamW(probe.params(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    shuffle_rng = derive_rng(cfg.seed, "probe.batches")

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if idx.size < 2:
                break
            logits = probe.forward(features[idx], train=True)
            loss, grad = bce_with_logits(logits, tags[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite probe loss at epoch {epoch}")
            optimizer.zero_grads()
            probe.backward(grad)
            optimizer.step()
    return probe


def probe_logits(probe: TagProbe, features: np.ndarray) -> np.ndarray:
    return probe.forward(np.asarray(features, dtype=np.float32), train=False)


def embeddings_for_records(head: ProjectionHead, records: list[LabeledRecord]) -> np.ndarray:
    """Frozen joint embeddings for probe input (eval mode, chunk-averaged)."""
    from .training import eval_embed_matrix

    return eval_embed_matrix(head, records)
