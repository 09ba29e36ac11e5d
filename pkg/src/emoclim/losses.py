"""Supervised contrastive objectives on the joint embedding space.

Implements the cross-modal anchor loss, its intra-modal variant, and the
weighted four-term total, each with analytic gradients with respect to the
embedding matrices. Loss math runs in float64 regardless of input dtype;
gradients are cast back to the input dtype.

For a batch of N anchors with unit-norm rows Z1 and N candidates Z2, the
cross-modal loss is

    -(1/Nc) * sum_i (1/|P(i)|) * sum_{p in P(i)}
        log( exp(z1_i . z2_p / tau) / sum_k exp(z1_i . z2_k / tau) )

where P(i) collects candidate indices sharing anchor i's label, and Nc
counts anchors with nonempty P(i); anchors with no positives are skipped.
The intra-modal variant uses one matrix for both roles and excludes each
anchor from its own positive set and softmax denominator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EmptyPositivesError

logger = logging.getLogger("emoclim.losses")

COMPONENT_NAMES = ("image_to_audio", "audio_to_image", "image_to_image", "audio_to_audio")


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 0.07
    lambdas: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigurationError(f"temperature must be positive, got {self.temperature}")
        if len(self.lambdas) != 4:
            raise ConfigurationError("exactly four loss weights are required")
        if any(lam < 0 for lam in self.lambdas):
            raise ConfigurationError("loss weights must be nonnegative")
        if not any(lam > 0 for lam in self.lambdas):
            raise ConfigurationError("at least one loss weight must be positive")


@dataclass
class LabeledBatch:
    """Paired per-modality embeddings and labels; both sides hold N items."""

    image_embeddings: np.ndarray
    image_labels: np.ndarray
    audio_embeddings: np.ndarray
    audio_labels: np.ndarray

    def __post_init__(self):
        self.image_labels = np.asarray(self.image_labels, dtype=object)
        self.audio_labels = np.asarray(self.audio_labels, dtype=object)
        n = self.image_embeddings.shape[0]
        if self.audio_embeddings.shape[0] != n:
            raise ConfigurationError("image and audio sides must hold the same item count")
        if len(self.image_labels) != n or len(self.audio_labels) != n:
            raise ConfigurationError("label count must match embedding rows")
        for name, z in (("image", self.image_embeddings), ("audio", self.audio_embeddings)):
            norms = np.linalg.norm(np.asarray(z, dtype=np.float64), axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-3):
                raise ConfigurationError(f"{name} embeddings must have unit-norm rows")

    @property
    def n(self) -> int:
        return self.image_embeddings.shape[0]


def _positive_mask(y_anchor: np.ndarray, y_cand: np.ndarray) -> np.ndarray:
    ya = np.asarray(y_anchor, dtype=object)
    yc = np.asarray(y_cand, dtype=object)
    return ya[:, None] == yc[None, :]


def _supcon(z_anchor: np.ndarray, z_cand: np.ndarray, pos_mask: np.ndarray,
            tau: float, exclude_diagonal: bool) -> tuple[float, np.ndarray, np.ndarray]:
    """Shared core: loss plus d(loss)/dZ_anchor and d(loss)/dZ_cand in f64."""
    za = np.asarray(z_anchor, dtype=np.float64)
    zc = np.asarray(z_cand, dtype=np.float64)
    n = za.shape[0]
    logits = (za @ zc.T) / tau
    valid = np.ones((n, n), dtype=bool)
    if exclude_diagonal:
        np.fill_diagonal(valid, False)
        pos_mask = pos_mask & valid

    counts = pos_mask.sum(axis=1)
    contributing = counts > 0
    n_contrib = int(contributing.sum())
    if n_contrib == 0:
        raise EmptyPositivesError("every anchor has an empty positive set")
    if n_contrib < n:
        logger.debug("skipping %d of %d anchors with no positives", n - n_contrib, n)

    # Max-subtracted softmax over the valid candidate set per anchor row.
    masked = np.where(valid, logits, -np.inf)
    row_max = masked.max(axis=1, keepdims=True)
    exp = np.where(valid, np.exp(masked - row_max), 0.0)
    denom = exp.sum(axis=1, keepdims=True)
    log_prob = masked - row_max - np.log(denom)

    safe_counts = np.where(contributing, counts, 1)
    per_anchor = -(np.where(pos_mask, log_prob, 0.0).sum(axis=1)) / safe_counts
    loss = float(per_anchor[contributing].sum() / n_contrib)

    softmax = exp / denom
    coeff = (softmax - pos_mask / safe_counts[:, None]) * contributing[:, None] / n_contrib
    grad_anchor = (coeff @ zc) / tau
    grad_cand = (coeff.T @ za) / tau
    return loss, grad_anchor, grad_cand


def supcon_cross(z1: np.ndarray, y1, z2: np.ndarray, y2, tau: float
                 ) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-modal anchor loss: anchors from z1, positives/negatives from z2.

    No self-exclusion applies: the two matrices index different items, so
    the softmax denominator runs over all N candidates.
    """
    if tau <= 0:
        raise ConfigurationError(f"temperature must be positive, got {tau}")
    if z1.shape != z2.shape:
        raise ConfigurationError(f"embedding shapes differ: {z1.shape} vs {z2.shape}")
    pos = _positive_mask(y1, y2)
    loss, ga, gc = _supcon(z1, z2, pos, tau, exclude_diagonal=False)
    return loss, ga.astype(z1.dtype), gc.astype(z2.dtype)


def supcon_intra(z: np.ndarray, y, tau: float) -> tuple[float, np.ndarray]:
    """Intra-modal variant: one matrix plays both roles, self-pairs excluded
    from positives and from the softmax denominator."""
    if tau <= 0:
        raise ConfigurationError(f"temperature must be positive, got {tau}")
    pos = _positive_mask(y, y)
    loss, ga, gc = _supcon(z, z, pos, tau, exclude_diagonal=True)
    return loss, (ga + gc).astype(z.dtype)


@dataclass
class TotalLoss:
    loss: float
    grad_images: np.ndarray
    grad_audio: np.ndarray
    components: dict[str, float | None]
    n_contributing: int


def total_loss(batch: LabeledBatch, cfg: LossConfig) -> TotalLoss:
    """Weighted sum of the two cross-modal and two intra-modal losses.

    A component whose anchors all lack positives contributes zero with a
    logged warning instead of failing the whole batch.
    """
    tau = cfg.temperature
    l1, l2, l3, l4 = cfg.lambdas
    zi, za = batch.image_embeddings, batch.audio_embeddings
    yi, ya = batch.image_labels, batch.audio_labels

    grad_i = np.zeros(zi.shape, dtype=np.float64)
    grad_a = np.zeros(za.shape, dtype=np.float64)
    components: dict[str, float | None] = {}
    total = 0.0
    n_contributing = 0

    def skipped(name: str) -> None:
        logger.warning("loss component %s skipped: no anchor had positives", name)
        components[name] = None

    try:
        value, g_anchor, g_cand = supcon_cross(zi, yi, za, ya, tau)
        components["image_to_audio"] = value
        total += l1 * value
        grad_i += l1 * g_anchor
        grad_a += l1 * g_cand
        n_contributing += 1
    except EmptyPositivesError:
        skipped("image_to_audio")

    try:
        value, g_anchor, g_cand = supcon_cross(za, ya, zi, yi, tau)
        components["audio_to_image"] = value
        total += l2 * value
        grad_a += l2 * g_anchor
        grad_i += l2 * g_cand
        n_contributing += 1
    except EmptyPositivesError:
        skipped("audio_to_image")

    try:
        value, g = supcon_intra(zi, yi, tau)
        components["image_to_image"] = value
        total += l3 * value
        grad_i += l3 * g
        n_contributing += 1
    except EmptyPositivesError:
        skipped("image_to_image")

    try:
        value, g = supcon_intra(za, ya, tau)
        components["audio_to_audio"] = value
        total += l4 * value
        grad_a += l4 * g
        n_contributing += 1
    except EmptyPositivesError:
        skipped("audio_to_audio")

    return TotalLoss(
        loss=float(total),
        grad_images=grad_i.astype(zi.dtype),
        grad_audio=grad_a.astype(za.dtype),
        components=components,
        n_contributing=n_contributing,
    )
