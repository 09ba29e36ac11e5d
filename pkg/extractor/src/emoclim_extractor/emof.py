"""EMOF / EMOT writers (little-endian).

This is the extractor's own implementation of the engine's file formats;
the binary layout is the contract between the two components.

EMOF: magic "EMOF", version u32=1, modality u8, feature_dim u32,
record_count u64; taxonomy (u16 label count, per label u16 length + UTF-8;
u16 dropped count + u16 indices); records (u16 id length + UTF-8,
u16 label index, u16 chunk count, C*D float32).

EMOT: magic "EMOT", u64 item count, u16 tag count, per item u16 id length
+ UTF-8 id + ceil(T/8) bytes of little-endian packed tag bits.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import JobConfigError

IMAGE_LABELS = ("amusement", "awe", "contentment", "excitement",
                "anger", "disgust", "fear", "sadness")
IMAGE_DROPPED = ("awe", "disgust")
MUSIC_LABELS = ("exciting", "funny", "happy", "tender", "angry", "sad", "scary")
MUSIC_DROPPED = ("tender",)

MODALITY_CODE = {"image": 0, "audio": 1}


@dataclass
class TaxonomySpec:
    labels: tuple[str, ...]
    dropped: tuple[str, ...]


TAXONOMIES = {
    "image": TaxonomySpec(IMAGE_LABELS, IMAGE_DROPPED),
    "audio": TaxonomySpec(MUSIC_LABELS, MUSIC_DROPPED),
}


def _pack_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _atomic_write(path: str, payload: bytes) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def write_feature_file(path: str, modality: str, feature_dim: int,
                       records: list[tuple[str, str, np.ndarray]]) -> None:
    """`records` holds (item_id, source_label, chunks[C x D]) tuples."""
    taxonomy = TAXONOMIES[modality]
    label_index = {name: i for i, name in enumerate(taxonomy.labels)}
    parts = [
        b"EMOF",
        struct.pack("<I", 1),
        struct.pack("<B", MODALITY_CODE[modality]),
        struct.pack("<I", feature_dim),
        struct.pack("<Q", len(records)),
        struct.pack("<H", len(taxonomy.labels)),
    ]
    for name in taxonomy.labels:
        parts.append(_pack_string(name))
    dropped_idx = sorted(label_index[name] for name in taxonomy.dropped)
    parts.append(struct.pack("<H", len(dropped_idx)))
    for idx in dropped_idx:
        parts.append(struct.pack("<H", idx))

    seen: set[str] = set()
    for item_id, label, chunks in records:
        if item_id in seen:
            raise JobConfigError(f"duplicate item_id '{item_id}'")
        seen.add(item_id)
        if label not in label_index:
            raise JobConfigError(f"label '{label}' not in the {modality} taxonomy")
        chunks = np.ascontiguousarray(chunks, dtype="<f4")
        if chunks.ndim != 2 or chunks.shape[1] != feature_dim:
            raise JobConfigError(
                f"item '{item_id}': chunks shape {chunks.shape} vs dim {feature_dim}")
        parts.append(_pack_string(item_id))
        parts.append(struct.pack("<H", label_index[label]))
        parts.append(struct.pack("<H", chunks.shape[0]))
        parts.append(chunks.tobytes())
    _atomic_write(path, b"".join(parts))


def write_tag_file(path: str, item_ids: list[str], tag_matrix: np.ndarray) -> None:
    tag_matrix = np.asarray(tag_matrix, dtype=np.uint8)
    n, t = tag_matrix.shape
    if n != len(item_ids):
        raise JobConfigError("tag matrix row count must match item ids")
    parts = [b"EMOT", struct.pack("<Q", n), struct.pack("<H", t)]
    for item_id, row in zip(item_ids, tag_matrix):
        parts.append(_pack_string(item_id))
        parts.append(np.packbits(row, bitorder="little").tobytes())
    _atomic_write(path, b"".join(parts))
