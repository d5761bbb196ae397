"""Exception hierarchy shared across the toolkit."""


class MotifSiftError(Exception):
    """Base class for every error raised by motifsift."""


class DimensionError(MotifSiftError, ValueError):
    pass


class SizeError(MotifSiftError, ValueError):
    pass


class ParameterError(MotifSiftError, ValueError):
    pass


class GeometryError(MotifSiftError, ValueError):
    pass


class CodecError(MotifSiftError, RuntimeError):
    pass


class InsufficientDataError(MotifSiftError, ValueError):
    pass


class DegenerateGeometryError(GeometryError):
    pass


class DegenerateCellError(MotifSiftError, RuntimeError):
    """A benchmark cell whose template yields no features."""

    def __init__(self, class_name, message=None):
        self.class_name = class_name
        super().__init__(message or f"class {class_name!r}: template has zero features")


class EmptySelectionError(MotifSiftError, LookupError):
    pass


class InputError(MotifSiftError, OSError):
    pass
