"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
ExternalServiceError -> 4, anything else -> 5.
"""


class FauxcheckError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FauxcheckError):
    """Bad or incomplete run configuration (missing paths, invalid values)."""


class DataError(FauxcheckError):
    """Malformed or insufficient input data."""


class CorpusError(DataError):
    """Corpus file cannot be parsed or violates the record schema."""


class CacheMissError(DataError):
    """An evidence bundle was requested in offline mode but is not cached."""


class EmbeddingLookupError(DataError):
    """A text has no entry in a file-backed embedding table."""


class ElaError(DataError):
    """Input bytes cannot be analyzed (not a decodable JPEG, bad color space)."""


class ExternalServiceError(FauxcheckError):
    """A remote search or crawl call failed."""
