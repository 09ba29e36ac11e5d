"""Extraction jobs: manifest in, EMOF (and EMOT) out."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import audio as audio_ops
from . import images as image_ops
from .emof import TAXONOMIES, write_feature_file, write_tag_file
from .encoders import get_encoder
from .errors import JobConfigError
from .manifest import ManifestRow, read_manifest

logger = logging.getLogger("emoclim_extractor")


@dataclass
class ExtractorJob:
    modality: str  # "image" | "audio"
    encoder: str
    manifest_path: str
    output_path: str
    # image options
    crop_policy: str = "center"  # "center" | "random"
    n_random_crops: int = 4
    # audio options
    window_s: float | None = None  # default: encoder's expected window or 5.0
    overlap: float = 0.75
    seed: int = 0

    def __post_init__(self):
        if self.modality not in ("image", "audio"):
            raise JobConfigError(f"modality must be image or audio, got '{self.modality}'")
        if self.crop_policy not in ("center", "random"):
            raise JobConfigError(f"crop_policy must be center or random, got "
                                 f"'{self.crop_policy}'")
        if not 0.0 <= self.overlap < 1.0:
            raise JobConfigError(f"overlap must be in [0,1), got {self.overlap}")


def _resolve_window(job: ExtractorJob, encoder) -> float:
    expected = getattr(encoder, "expected_window_s", None)
    if job.window_s is None:
        return expected if expected is not None else 5.0
    if expected is not None and abs(job.window_s - expected) > 1e-9:
        raise JobConfigError(
            f"encoder '{encoder.name}' expects {expected}s windows, got {job.window_s}s")
    return job.window_s


def _extract_records(job: ExtractorJob) -> tuple[list[tuple[str, str, np.ndarray]], int,
                                                 list[ManifestRow]]:
    rows = read_manifest(job.manifest_path)
    encoder = get_encoder(job.encoder)
    if encoder.modality != job.modality:
        raise JobConfigError(
            f"encoder '{job.encoder}' handles {encoder.modality}, job is {job.modality}")
    taxonomy_labels = set(TAXONOMIES[job.modality].labels)
    rng = np.random.default_rng(job.seed)

    records: list[tuple[str, str, np.ndarray]] = []
    kept_rows: list[ManifestRow] = []
    window = _resolve_window(job, encoder) if job.modality == "audio" else None

    for row in rows:
        if row.source_label not in taxonomy_labels:
            logger.warning("skipping %s: label '%s' not in the %s taxonomy",
                           row.item_id, row.source_label, job.modality)
            continue
        try:
            if job.modality == "image":
                img = image_ops.load_image(row.media_path)
                n_random = job.n_random_crops if job.crop_policy == "random" else 0
                inputs = image_ops.prepare_crops(img, n_random, rng)
            else:
                samples, sr = audio_ops.load_wav(row.media_path)
                samples = audio_ops.resample(samples, sr, encoder.target_sample_rate)
                inputs = audio_ops.sliding_windows(
                    samples, encoder.target_sample_rate, window, job.overlap)
        except (OSError, ValueError) as exc:
            logger.warning("skipping %s: unreadable media (%s)", row.item_id, exc)
            continue
        features = encoder.encode(inputs)
        records.append((row.item_id, row.source_label, features))
        kept_rows.append(row)

    return records, encoder.feature_dim, kept_rows


def extract(job: ExtractorJob) -> int:
    """Run the job and write the EMOF file; returns the record count."""
    records, feature_dim, _ = _extract_records(job)
    write_feature_file(job.output_path, job.modality, feature_dim, records)
    logger.info("wrote %d records to %s", len(records), job.output_path)
    return len(records)


def top_tags(rows: list[ManifestRow], vocab_size: int) -> list[str]:
    """Most frequent tags over the training split (all rows when no split
    column is present), ties broken alphabetically."""
    train_rows = [r for r in rows if r.split == "train"]
    if not train_rows:
        train_rows = rows
    counts = Counter(tag for row in train_rows for tag in row.tags)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [tag for tag, _ in ranked[:vocab_size]]


def extract_tagged(job: ExtractorJob, tags_path: str, vocab_size: int = 50,
                   vocab_path: str | None = None,
                   split_path: str | None = None) -> tuple[int, list[str]]:
    """Extract features plus a binary tag sidecar over the top-`vocab_size`
    tag vocabulary; returns (record count, vocabulary).

    With `split_path`, also emit an engine split JSON from the manifest's
    split column (how tagged datasets publish their standard train/val/test
    directory splits)."""
    records, feature_dim, kept_rows = _extract_records(job)
    write_feature_file(job.output_path, job.modality, feature_dim, records)

    vocab = top_tags(kept_rows, vocab_size)
    index = {tag: i for i, tag in enumerate(vocab)}
    matrix = np.zeros((len(kept_rows), len(vocab)), dtype=np.uint8)
    for i, row in enumerate(kept_rows):
        for tag in row.tags:
            if tag in index:
                matrix[i, index[tag]] = 1
    write_tag_file(tags_path, [row.item_id for row in kept_rows], matrix)
    if vocab_path:
        with open(vocab_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(vocab) + "\n")
    if split_path:
        write_manifest_split(split_path, kept_rows)
    logger.info("wrote %d tagged records (T=%d) to %s", len(kept_rows), len(vocab),
                tags_path)
    return len(kept_rows), vocab


def write_manifest_split(path: str, rows: list[ManifestRow]) -> None:
    """Write an engine split JSON from the manifest's split column."""
    import json

    subsets: dict[str, list[str]] = {"train": [], "val": [], "test": []}
    for row in rows:
        if row.split not in subsets:
            raise JobConfigError(
                f"item '{row.item_id}': split column must be train/val/test, "
                f"got '{row.split}'")
        subsets[row.split].append(row.item_id)
    doc = {"seed": 0, "train": subsets["train"], "val": subsets["val"],
           "test": subsets["test"]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
