class ExtractorError(Exception):
    """Base class for extraction failures."""


class ManifestError(ExtractorError):
    """Malformed manifest CSV."""


class EncoderLoadError(ExtractorError):
    """A pretrained encoder could not be constructed; aborts the job."""


class JobConfigError(ExtractorError):
    """Inconsistent job configuration (window/encoder mismatch etc.)."""
