"""Input manifest parsing.

CSV columns: item_id, media_path, source_label[, tags[, split]].
`tags` is a semicolon-separated list; `split` (train/val/test) feeds the
tag-vocabulary selection for tagged extraction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .errors import ManifestError

REQUIRED_COLUMNS = ("item_id", "media_path", "source_label")


@dataclass
class ManifestRow:
    item_id: str
    media_path: str
    source_label: str
    tags: list[str] = field(default_factory=list)
    split: str | None = None


def read_manifest(path: str) -> list[ManifestRow]:
    rows: list[ManifestRow] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ManifestError(f"{path}: empty manifest")
        missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ManifestError(f"{path}: missing columns {missing}")
        for lineno, raw in enumerate(reader, start=2):
            item_id = (raw.get("item_id") or "").strip()
            media_path = (raw.get("media_path") or "").strip()
            label = (raw.get("source_label") or "").strip()
            if not item_id or not media_path or not label:
                raise ManifestError(f"{path}:{lineno}: empty required field")
            if item_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate item_id '{item_id}'")
            seen.add(item_id)
            tags_field = (raw.get("tags") or "").strip()
            tags = [t.strip() for t in tags_field.split(";") if t.strip()] if tags_field else []
            split = (raw.get("split") or "").strip().lower() or None
            rows.append(ManifestRow(item_id, media_path, label, tags, split))
    return rows
