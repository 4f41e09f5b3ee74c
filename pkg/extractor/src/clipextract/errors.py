"""Extractor exception taxonomy."""


class ExtractorError(Exception):
    """Base class for extraction pipeline errors."""


class ConfigError(ExtractorError, ValueError):
    """A parameter is outside its declared range."""


class SetupError(ExtractorError):
    """The feature backbone or detector could not be constructed."""


class ExtractionError(ExtractorError):
    """A clip could not be decoded or processed; message carries the clip id."""


class ListingError(ExtractorError, ValueError):
    """The clip listing file is malformed."""
