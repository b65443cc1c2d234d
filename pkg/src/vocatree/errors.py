"""Exception hierarchy shared by every vocatree module."""


class VocatreeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(VocatreeError):
    """Invalid experiment or generator configuration (CLI exit code 2)."""


class ValidationError(VocatreeError, ValueError):
    pass


class ManifestParseError(ValidationError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateEntryError(ValidationError):
    pass


class UnsupportedFormatError(VocatreeError):
    pass


class CorruptFileError(VocatreeError):
    pass


class EmptyInputError(ValidationError):
    pass


class TooShortError(ValidationError):
    pass


class InsufficientDataError(ValidationError):
    pass


class SingleClassError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class NoInputError(ValidationError):
    pass


class SchemaError(ValidationError):
    pass
