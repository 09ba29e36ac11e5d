"""Feature extraction for the emoclim engine.

Wraps frozen pretrained encoders (CLIP vision tower for images, CLAP audio
tower for music) plus weight-free built-in encoders, applies the matching
preprocessing (224x224 crops with CLIP normalization; resampling and
sliding-window chunking for audio), and emits EMOF feature files and EMOT
tag sidecars that the engine ingests directly.
"""

from .emof import write_feature_file, write_tag_file
from .encoders import available_encoders, get_encoder
from .jobs import ExtractorJob, extract, extract_tagged
from .manifest import ManifestRow, read_manifest

__version__ = "0.1.0"

__all__ = [
    "ExtractorJob",
    "ManifestRow",
    "available_encoders",
    "extract",
    "extract_tagged",
    "get_encoder",
    "read_manifest",
    "write_feature_file",
    "write_tag_file",
]
