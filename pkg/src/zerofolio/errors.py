"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ZeroFolioError(Exception):
    """Base class for all package errors."""


class DataError(ZeroFolioError):
    """Input data could not be read or is inconsistent."""


class MalformedArff(DataError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class MissingFile(DataError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing required file: {name}")


class InconsistentScenario(DataError):
    pass


class ManifestError(DataError):
    pass


class InstanceTooLarge(DataError):
    pass


class UnknownInstance(DataError, KeyError):
    pass


class ColumnMismatch(DataError, ValueError):
    pass


class DimensionMismatch(ZeroFolioError, ValueError):
    pass


class LengthMismatch(ZeroFolioError, ValueError):
    pass


class InvalidAlpha(ZeroFolioError, ValueError):
    pass


class EmptyTrainingSet(ZeroFolioError, ValueError):
    pass


class DegenerateGap(ZeroFolioError, ValueError):
    pass


class NoEmbeddableInstances(ZeroFolioError):
    pass


class CacheCorrupt(ZeroFolioError):
    def __init__(self, key: object, reason: str = "checksum mismatch"):
        self.key = key
        super().__init__(f"corrupt cache record for {key}: {reason}")


class BackendError(ZeroFolioError):
    """The embedding provider returned an unusable response."""

    def __init__(self, status: int | None, body: str = ""):
        self.status = status
        self.body = body[:200]
        super().__init__(f"embedding backend error (status={status}): {self.body}")


class AuthError(BackendError):
    pass


class RateLimited(BackendError):
    pass
