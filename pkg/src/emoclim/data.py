"""Emotion taxonomies, cross-dataset label mapping, binary feature-file and
checkpoint I/O, stratified splitting, training-batch sampling, and a synthetic
feature generator for self-contained runs.

File formats (all little-endian):

EMOF feature file
    magic "EMOF", version u32=1, modality u8 (0 image / 1 audio),
    feature_dim u32, record_count u64,
    taxonomy: u16 label count, then per label u16 byte-length + UTF-8 name;
              u16 dropped count, then dropped label indices (u16 each),
    records:  u16 id byte-length + UTF-8 id, u16 source label index,
              u16 chunk count C, then C*D float32 values.

EMOC checkpoint file
    magic "EMOC", version u32=1, u16 tensor count,
    per tensor: u16 name length + UTF-8 name, u8 rank, rank u32 dims,
    float32 data; then u32 config length + UTF-8 JSON config blob.

EMOT tag sidecar
    magic "EMOT", u64 item count, u16 tag count T,
    per item: u16 id length + UTF-8 id, ceil(T/8) bytes of little-endian
    packed tag bits.

Split file: JSON {"seed": int, "train": [ids], "val": [ids], "test": [ids]}.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, FormatError, IntegrityError, TaxonomyError

logger = logging.getLogger("emoclim.data")

EMOF_MAGIC = b"EMOF"
EMOC_MAGIC = b"EMOC"
EMOT_MAGIC = b"EMOT"
FORMAT_VERSION = 1


class Modality(enum.IntEnum):
    IMAGE = 0
    AUDIO = 1


class UnifiedEmotion(enum.Enum):
    """The six merged emotion classes shared by both modalities."""

    AMUSEMENT_FUNNY = "amusement_funny"
    EXCITEMENT_EXCITING = "excitement_exciting"
    CONTENTMENT_HAPPY = "contentment_happy"
    ANGER_ANGRY = "anger_angry"
    SADNESS_SAD = "sadness_sad"
    FEAR_SCARY = "fear_scary"


@dataclass(frozen=True)
class SourceTaxonomy:
    name: str
    labels: tuple[str, ...]
    dropped: frozenset[str]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise TaxonomyError(f"taxonomy {self.name}: duplicate labels")
        if not self.dropped <= set(self.labels):
            raise TaxonomyError(f"taxonomy {self.name}: dropped labels not in label list")


IMAGE_TAXONOMY = SourceTaxonomy(
    name="image",
    labels=("amusement", "awe", "contentment", "excitement",
            "anger", "disgust", "fear", "sadness"),
    dropped=frozenset({"awe", "disgust"}),
)

MUSIC_TAXONOMY = SourceTaxonomy(
    name="music",
    labels=("exciting", "funny", "happy", "tender", "angry", "sad", "scary"),
    dropped=frozenset({"tender"}),
)

# Five pairs differ only in wording; contentment <-> happy is the remaining
# positive-valence pair once those are matched.
_LABEL_TO_UNIFIED: dict[str, UnifiedEmotion] = {
    "amusement": UnifiedEmotion.AMUSEMENT_FUNNY,
    "excitement": UnifiedEmotion.EXCITEMENT_EXCITING,
    "contentment": UnifiedEmotion.CONTENTMENT_HAPPY,
    "anger": UnifiedEmotion.ANGER_ANGRY,
    "sadness": UnifiedEmotion.SADNESS_SAD,
    "fear": UnifiedEmotion.FEAR_SCARY,
    "funny": UnifiedEmotion.AMUSEMENT_FUNNY,
    "exciting": UnifiedEmotion.EXCITEMENT_EXCITING,
    "happy": UnifiedEmotion.CONTENTMENT_HAPPY,
    "angry": UnifiedEmotion.ANGER_ANGRY,
    "sad": UnifiedEmotion.SADNESS_SAD,
    "scary": UnifiedEmotion.FEAR_SCARY,
}

SOURCE_LABEL_FOR: dict[str, dict[UnifiedEmotion, str]] = {
    "image": {u: s for s, u in _LABEL_TO_UNIFIED.items()
              if s in IMAGE_TAXONOMY.labels},
    "music": {u: s for s, u in _LABEL_TO_UNIFIED.items()
              if s in MUSIC_TAXONOMY.labels},
}


def map_label(taxonomy: SourceTaxonomy, label: str) -> UnifiedEmotion | None:
    """Map a source label to its unified class, or None when it is dropped."""
    if label not in taxonomy.labels:
        raise TaxonomyError(f"label '{label}' not in taxonomy '{taxonomy.name}'")
    if label in taxonomy.dropped:
        return None
    unified = _LABEL_TO_UNIFIED.get(label)
    if unified is None:
        raise TaxonomyError(
            f"retained label '{label}' of taxonomy '{taxonomy.name}' has no unified mapping")
    return unified


@dataclass
class FeatureRecord:
    """One item's per-chunk encoder features under its source label."""

    item_id: str
    source_label: str
    chunks: np.ndarray  # (C, D) float32

    def __post_init__(self):
        self.chunks = np.ascontiguousarray(self.chunks, dtype=np.float32)
        if self.chunks.ndim != 2 or self.chunks.shape[0] < 1:
            raise ConfigurationError(
                f"record {self.item_id}: chunks must be (C>=1, D), got {self.chunks.shape}")


@dataclass
class LabeledRecord:
    """A feature record whose label has been mapped into the unified space."""

    item_id: str
    label: UnifiedEmotion
    chunks: np.ndarray


def unify_records(taxonomy: SourceTaxonomy,
                  records: list[FeatureRecord]) -> list[LabeledRecord]:
    """Apply the label mapping; records with dropped labels are removed."""
    out = []
    for rec in records:
        unified = map_label(taxonomy, rec.source_label)
        if unified is not None:
            out.append(LabeledRecord(rec.item_id, unified, rec.chunks))
    return out


def sample_train_chunk(record, rng: np.random.Generator) -> np.ndarray:
    """Uniformly pick one of the record's chunk feature vectors.

    Single-chunk records return chunk 0 without consuming rng state.
    """
    c = record.chunks.shape[0]
    if c == 1:
        return record.chunks[0]
    return record.chunks[int(rng.integers(c))]


# ---------------------------------------------------------------------------
# Binary readers/writers


class _Cursor:
    """Byte cursor that reports the failing offset on truncation."""

    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, n: int, why: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.what}: truncated while reading {why}", self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, why: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size, why))

    def u8(self, why: str) -> int:
        return self.unpack("<B", why)[0]

    def u16(self, why: str) -> int:
        return self.unpack("<H", why)[0]

    def u32(self, why: str) -> int:
        return self.unpack("<I", why)[0]

    def u64(self, why: str) -> int:
        return self.unpack("<Q", why)[0]

    def string(self, why: str) -> str:
        n = self.u16(f"{why} length")
        raw = self.take(n, why)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{self.what}: invalid UTF-8 in {why}", self.pos - n) from exc

    def f32_array(self, count: int, why: str) -> np.ndarray:
        raw = self.take(4 * count, why)
        return np.frombuffer(raw, dtype="<f4", count=count).copy()

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(f"{self.what}: {len(self.data) - self.pos} trailing bytes", self.pos)


def _encode_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ConfigurationError(f"string too long to encode: {s[:32]}...")
    return struct.pack("<H", len(raw)) + raw


def write_feature_file(path: str, modality: Modality, taxonomy: SourceTaxonomy,
                       records: list[FeatureRecord], feature_dim: int | None = None) -> None:
    """Write an EMOF file. `feature_dim` is required when `records` is empty."""
    if records:
        dims = {rec.chunks.shape[1] for rec in records}
        if len(dims) != 1:
            raise IntegrityError(f"inconsistent feature dims across records: {sorted(dims)}")
        d = dims.pop()
        if feature_dim is not None and feature_dim != d:
            raise ConfigurationError(f"feature_dim {feature_dim} != record dim {d}")
    elif feature_dim is None:
        raise ConfigurationError("feature_dim is required for an empty record list")
    else:
        d = feature_dim

    label_index = {name: i for i, name in enumerate(taxonomy.labels)}
    seen: set[str] = set()
    parts = [
        EMOF_MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<B", int(modality)),
        struct.pack("<I", d),
        struct.pack("<Q", len(records)),
        struct.pack("<H", len(taxonomy.labels)),
    ]
    for name in taxonomy.labels:
        parts.append(_encode_string(name))
    dropped_idx = sorted(label_index[name] for name in taxonomy.dropped)
    parts.append(struct.pack("<H", len(dropped_idx)))
    for i in dropped_idx:
        parts.append(struct.pack("<H", i))
    for rec in records:
        if rec.item_id in seen:
            raise IntegrityError(f"duplicate item_id '{rec.item_id}'")
        seen.add(rec.item_id)
        if rec.source_label not in label_index:
            raise TaxonomyError(
                f"record {rec.item_id}: label '{rec.source_label}' not in taxonomy")
        c = rec.chunks.shape[0]
        if c > 0xFFFF:
            raise ConfigurationError(f"record {rec.item_id}: too many chunks ({c})")
        parts.append(_encode_string(rec.item_id))
        parts.append(struct.pack("<H", label_index[rec.source_label]))
        parts.append(struct.pack("<H", c))
        parts.append(np.ascontiguousarray(rec.chunks, dtype="<f4").tobytes())
    _atomic_write(path, b"".join(parts))


def read_feature_file(path: str) -> tuple[Modality, SourceTaxonomy, list[FeatureRecord]]:
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data, what=str(path))
    if cur.take(4, "magic") != EMOF_MAGIC:
        raise FormatError(f"{path}: bad magic, not an EMOF file", 0)
    version = cur.u32("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}", cur.pos - 4)
    raw_modality = cur.u8("modality")
    if raw_modality not in (0, 1):
        raise FormatError(f"{path}: bad modality byte {raw_modality}", cur.pos - 1)
    modality = Modality(raw_modality)
    d = cur.u32("feature_dim")
    count = cur.u64("record_count")

    n_labels = cur.u16("taxonomy label count")
    labels = tuple(cur.string(f"taxonomy label {i}") for i in range(n_labels))
    n_dropped = cur.u16("dropped count")
    dropped_idx = [cur.u16(f"dropped index {i}") for i in range(n_dropped)]
    for i in dropped_idx:
        if i >= n_labels:
            raise FormatError(f"{path}: dropped index {i} out of range", cur.pos - 2)
    taxonomy = SourceTaxonomy(
        name="image" if modality == Modality.IMAGE else "music",
        labels=labels,
        dropped=frozenset(labels[i] for i in dropped_idx),
    )

    records = []
    seen: set[str] = set()
    for r in range(count):
        item_id = cur.string(f"record {r} id")
        if item_id in seen:
            raise IntegrityError(f"{path}: duplicate item_id '{item_id}'")
        seen.add(item_id)
        label_idx = cur.u16(f"record {r} label index")
        if label_idx >= n_labels:
            raise FormatError(f"{path}: record {r} label index {label_idx} out of range",
                              cur.pos - 2)
        c = cur.u16(f"record {r} chunk count")
        if c < 1:
            raise FormatError(f"{path}: record {r} has zero chunks", cur.pos - 2)
        values = cur.f32_array(c * d, f"record {r} feature data")
        records.append(FeatureRecord(item_id, labels[label_idx], values.reshape(c, d)))
    cur.expect_end()
    return modality, taxonomy, records


def load_unified(path: str) -> tuple[Modality, SourceTaxonomy, list[LabeledRecord]]:
    """Read an EMOF file and map its labels; dropped-label records removed."""
    modality, taxonomy, records = read_feature_file(path)
    return modality, taxonomy, unify_records(taxonomy, records)


def save_checkpoint(path: str, tensors: dict[str, np.ndarray], config: dict) -> None:
    """Write an EMOC checkpoint; tensor order follows dict insertion order."""
    if len(tensors) > 0xFFFF:
        raise ConfigurationError("too many tensors for checkpoint format")
    parts = [EMOC_MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<H", len(tensors))]
    for name, value in tensors.items():
        # ascontiguousarray would promote rank-0 tensors to rank 1
        arr = np.asarray(value, dtype="<f4", order="C")
        if arr.ndim > 0xFF:
            raise ConfigurationError(f"tensor {name}: rank too large")
        parts.append(_encode_string(name))
        parts.append(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            parts.append(struct.pack("<I", dim))
        parts.append(arr.tobytes())
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts.append(struct.pack("<I", len(blob)))
    parts.append(blob)
    _atomic_write(path, b"".join(parts))


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data, what=str(path))
    if cur.take(4, "magic") != EMOC_MAGIC:
        raise FormatError(f"{path}: bad magic, not an EMOC checkpoint", 0)
    version = cur.u32("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}", cur.pos - 4)
    n_tensors = cur.u16("tensor count")
    tensors: dict[str, np.ndarray] = {}
    for t in range(n_tensors):
        name = cur.string(f"tensor {t} name")
        if name in tensors:
            raise IntegrityError(f"{path}: duplicate tensor '{name}'")
        rank = cur.u8(f"tensor {name} rank")
        dims = tuple(cur.u32(f"tensor {name} dim {i}") for i in range(rank))
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        tensors[name] = cur.f32_array(size, f"tensor {name} data").reshape(dims)
    blob_len = cur.u32("config length")
    blob = cur.take(blob_len, "config blob")
    cur.expect_end()
    try:
        config = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: invalid config blob", len(data) - blob_len) from exc
    return tensors, config


def write_tag_file(path: str, item_ids: list[str], tags: np.ndarray) -> None:
    """Write an EMOT sidecar of per-item binary tag vectors."""
    tags = np.asarray(tags)
    if tags.ndim != 2 or tags.shape[0] != len(item_ids):
        raise ConfigurationError(f"tags must be (n_items, T), got {tags.shape}")
    n, t = tags.shape
    parts = [EMOT_MAGIC, struct.pack("<Q", n), struct.pack("<H", t)]
    seen: set[str] = set()
    for item_id, row in zip(item_ids, tags):
        if item_id in seen:
            raise IntegrityError(f"duplicate item_id '{item_id}' in tag file")
        seen.add(item_id)
        parts.append(_encode_string(item_id))
        parts.append(np.packbits(row.astype(np.uint8), bitorder="little").tobytes())
    _atomic_write(path, b"".join(parts))


def read_tag_file(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data, what=str(path))
    if cur.take(4, "magic") != EMOT_MAGIC:
        raise FormatError(f"{path}: bad magic, not an EMOT tag file", 0)
    n = cur.u64("item count")
    t = cur.u16("tag count")
    n_bytes = (t + 7) // 8
    ids: list[str] = []
    rows = np.zeros((n, t), dtype=np.uint8)
    seen: set[str] = set()
    for i in range(n):
        item_id = cur.string(f"item {i} id")
        if item_id in seen:
            raise IntegrityError(f"{path}: duplicate item_id '{item_id}'")
        seen.add(item_id)
        packed = np.frombuffer(cur.take(n_bytes, f"item {i} tag bits"), dtype=np.uint8)
        rows[i] = np.unpackbits(packed, bitorder="little")[:t]
        ids.append(item_id)
    cur.expect_end()
    return ids, rows


def _atomic_write(path: str, payload: bytes) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Splits


@dataclass
class DatasetSplit:
    seed: int
    train: list[str] = field(default_factory=list)
    val: list[str] = field(default_factory=list)
    test: list[str] = field(default_factory=list)


def save_split(path: str, split: DatasetSplit) -> None:
    doc = {"seed": split.seed, "train": split.train, "val": split.val, "test": split.test}
    _atomic_write(path, (json.dumps(doc, indent=2) + "\n").encode("utf-8"))


def load_split(path: str) -> DatasetSplit:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return DatasetSplit(seed=int(doc["seed"]), train=list(doc["train"]),
                            val=list(doc["val"]), test=list(doc["test"]))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: missing split fields: {exc}") from exc


_SPLIT_SHARES = (8, 1, 1)  # tenths: train / val / test


def _largest_remainder_counts(n: int) -> tuple[int, int, int]:
    base = [n * s // 10 for s in _SPLIT_SHARES]
    remainders = [n * s % 10 for s in _SPLIT_SHARES]
    leftover = n - sum(base)
    order = sorted(range(3), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        base[i] += 1
    return tuple(base)


def stratified_split(records: list[LabeledRecord], seed: int) -> DatasetSplit:
    """80/10/10 split, stratified per unified class via largest-remainder
    rounding; per-class shuffles are drawn from one seeded generator in the
    fixed class-definition order, so the split is a pure function of seed."""
    by_class: dict[UnifiedEmotion, list[str]] = {}
    for rec in records:
        by_class.setdefault(rec.label, []).append(rec.item_id)

    rng = np.random.default_rng(seed)
    split = DatasetSplit(seed=seed)
    for emotion in UnifiedEmotion:
        ids = by_class.get(emotion)
        if not ids:
            continue
        if len(ids) < 3:
            logger.warning("class %s has only %d item(s); stratification is degenerate",
                           emotion.name, len(ids))
        shuffled = [ids[i] for i in rng.permutation(len(ids))]
        n_train, n_val, n_test = _largest_remainder_counts(len(ids))
        split.train.extend(shuffled[:n_train])
        split.val.extend(shuffled[n_train:n_train + n_val])
        split.test.extend(shuffled[n_train + n_val:])
    return split


def select_records(records: list[LabeledRecord], ids: list[str]) -> list[LabeledRecord]:
    by_id = {rec.item_id: rec for rec in records}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise IntegrityError(f"{len(missing)} split ids missing from records, "
                             f"first: '{missing[0]}'")
    return [by_id[i] for i in ids]


# ---------------------------------------------------------------------------
# Batch sampling


@dataclass
class BatchFeatures:
    """Pre-projection features plus labels for one optimizer step."""

    image_features: np.ndarray
    image_labels: np.ndarray
    image_ids: list[str]
    audio_features: np.ndarray
    audio_labels: np.ndarray
    audio_ids: list[str]

    @property
    def n(self) -> int:
        return self.image_features.shape[0]


class _CyclingPool:
    """Yields records by uniform shuffling; reshuffles each time the pool
    is exhausted, so the smaller modality wraps within an epoch."""

    def __init__(self, records: list[LabeledRecord], rng: np.random.Generator,
                 shuffle: bool = True):
        self.records = records
        self.rng = rng
        self.shuffle = shuffle
        self._order: list[int] = []
        self._pos = 0

    def draw(self, count: int) -> list[LabeledRecord]:
        out = []
        while len(out) < count:
            if self._pos >= len(self._order):
                if self.shuffle:
                    self._order = list(self.rng.permutation(len(self.records)))
                else:
                    self._order = list(range(len(self.records)))
                self._pos = 0
            out.append(self.records[self._order[self._pos]])
            self._pos += 1
        return out


def _stack_batch(records: list[LabeledRecord], rng: np.random.Generator | None
                 ) -> tuple[np.ndarray, np.ndarray, list[str]]:
    if rng is None:
        feats = np.stack([rec.chunks[0] for rec in records])
    else:
        feats = np.stack([sample_train_chunk(rec, rng) for rec in records])
    labels = np.array([rec.label for rec in records], dtype=object)
    return feats, labels, [rec.item_id for rec in records]


def epoch_batches(image_records: list[LabeledRecord], audio_records: list[LabeledRecord],
                  batch_size: int, rng: np.random.Generator, min_batch: int = 2):
    """One epoch of paired batches.

    The larger pool is shuffled and consumed exactly once; the smaller pool
    cycles with a reshuffle per pass. One chunk is sampled per record.
    Trailing batches smaller than `min_batch` are dropped.
    """
    if not image_records or not audio_records:
        raise ConfigurationError("both modality pools must be nonempty")
    if batch_size < 2:
        raise ConfigurationError(f"batch_size must be >= 2, got {batch_size}")

    image_larger = len(image_records) >= len(audio_records)
    driver = image_records if image_larger else audio_records
    other_pool = _CyclingPool(audio_records if image_larger else image_records, rng)

    order = rng.permutation(len(driver))
    for start in range(0, len(driver), batch_size):
        chosen = [driver[i] for i in order[start:start + batch_size]]
        if len(chosen) < min_batch:
            break
        paired = other_pool.draw(len(chosen))
        image_side, audio_side = (chosen, paired) if image_larger else (paired, chosen)
        img_feats, img_labels, img_ids = _stack_batch(image_side, rng)
        au_feats, au_labels, au_ids = _stack_batch(audio_side, rng)
        yield BatchFeatures(img_feats, img_labels, img_ids, au_feats, au_labels, au_ids)


def sample_batch(image_records: list[LabeledRecord], audio_records: list[LabeledRecord],
                 batch_size: int, rng: np.random.Generator) -> BatchFeatures:
    """Draw the first batch of a fresh epoch (convenience wrapper)."""
    return next(epoch_batches(image_records, audio_records, batch_size, rng))


# ---------------------------------------------------------------------------
# Synthetic data


@dataclass(frozen=True)
class SyntheticConfig:
    per_class: int = 100
    image_dim: int = 64
    audio_dim: int = 64
    image_chunks: int = 1
    audio_chunks: int = 1
    sigma: float = 0.25
    chunk_sigma_scale: float = 0.25
    mean_scale: float = 3.0
    seed: int = 0


def generate_synthetic(cfg: SyntheticConfig) -> tuple[list[FeatureRecord], list[FeatureRecord]]:
    """Gaussian class clusters for both modalities.

    Each unified class gets one latent direction; both modality means are
    projections of that shared direction, so same-emotion clusters sit at
    correlated positions. Returns (image_records, audio_records) carrying
    source-taxonomy labels, ready for `write_feature_file`.
    """
    rng = np.random.default_rng(cfg.seed)
    latent_dim = max(cfg.image_dim, cfg.audio_dim)
    classes = list(UnifiedEmotion)
    latents = rng.standard_normal((len(classes), latent_dim))

    def class_mean(latent: np.ndarray, dim: int) -> np.ndarray:
        v = latent[:dim]
        return cfg.mean_scale * v / np.linalg.norm(v)

    def make_records(prefix: str, taxonomy_name: str, dim: int, chunks: int
                     ) -> list[FeatureRecord]:
        records = []
        for ci, emotion in enumerate(classes):
            mean = class_mean(latents[ci], dim)
            source = SOURCE_LABEL_FOR[taxonomy_name][emotion]
            for i in range(cfg.per_class):
                center = mean + cfg.sigma * rng.standard_normal(dim)
                noise = cfg.sigma * cfg.chunk_sigma_scale * rng.standard_normal((chunks, dim))
                records.append(FeatureRecord(
                    item_id=f"{prefix}-{source}-{i:05d}",
                    source_label=source,
                    chunks=(center[None, :] + noise).astype(np.float32),
                ))
        return records

    image_records = make_records("img", "image", cfg.image_dim, cfg.image_chunks)
    audio_records = make_records("au", "music", cfg.audio_dim, cfg.audio_chunks)
    return image_records, audio_records
