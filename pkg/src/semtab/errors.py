"""Exception hierarchy shared across the pipeline."""


class SemtabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SemtabError):
    """Invalid configuration: bad sizes, margins, dims, or vocab mismatches."""


class SpanError(SemtabError):
    """A log does not cover the time window a split requires."""


class ParseError(SemtabError):
    """A serialized record could not be parsed."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class ProtocolError(SemtabError):
    """An embedding response or record set violates the wire/format contract."""


class BatchError(SemtabError):
    """Remote embedding failed for some inputs after retries."""

    def __init__(self, message: str, failed_indices: list[int]):
        self.failed_indices = list(failed_indices)
        super().__init__(f"{message} (failed indices: {self.failed_indices})")


class CacheCorruptError(SemtabError):
    """Embedding cache file has a bad magic, version, or CRC."""


class CacheConflictError(SemtabError):
    """A cache put would overwrite an existing record with a different vector."""


class CoverageError(SemtabError):
    """Vocabulary values lack embedding records."""

    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__(f"missing embedding records for {len(self.missing)} values: "
                         f"{self.missing[:8]}{'...' if len(self.missing) > 8 else ''}")


class InputError(SemtabError):
    """A batch contains indices outside the model's vocabularies."""


class EmptyBatchError(SemtabError):
    """No valid target positions to compute a loss or metric over."""


class DivergenceError(SemtabError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, task: str | None = None, history=None):
        self.task = task
        self.history = history
        super().__init__(message if task is None else f"{message} (task: {task})")
