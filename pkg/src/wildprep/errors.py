"""Exception types shared by the pipeline stages."""


class WildprepError(Exception):
    """Base class for all pipeline errors."""


class ImageLoadError(WildprepError):
    """A source file is missing, unreadable, or not a decodable image."""


class ImageSaveError(WildprepError):
    """An output image could not be written."""


class SegmentationError(WildprepError):
    """Clustering cannot proceed (e.g. fewer distinct colors than clusters)."""


class ManifestError(WildprepError):
    """A manifest is missing, malformed, or violates its invariants."""


class ConfigError(WildprepError):
    """A configuration file or value is invalid."""
