"""Exception hierarchy.

Every error raised by the pipeline derives from :class:`PipelineError` and
carries an ``exit_code`` so the CLI can map failures without a lookup table.
"""


class PipelineError(Exception):
    exit_code = 2


class UsageError(PipelineError):
    exit_code = 1


# raster_core
class NoForeground(PipelineError):
    pass


class OutOfBounds(PipelineError):
    pass


# quantizer
class EmptyInput(PipelineError):
    pass


class TooFewShades(PipelineError):
    pass


# autocc_features
class TooSmall(PipelineError):
    pass


class BinOutOfRange(PipelineError):
    pass


# mil_citation_knn
class DimensionMismatch(PipelineError):
    pass


class EmptyBag(PipelineError):
    pass


class ModelTooSmall(PipelineError):
    pass


# evaluation
class ClassTooSmall(PipelineError):
    pass


class UnknownClass(PipelineError):
    pass


# cli / io
class MissingFile(PipelineError):
    pass


class MalformedRow(PipelineError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyManifest(PipelineError):
    pass


class FormatError(PipelineError):
    pass
