"""Exception types raised across the package."""


class SynthError(ValueError):
    """Base class for all errors raised by sparsemimo."""


class CoincidentGeometry(SynthError):
    """A scatterer sits on (or within 1e-6 m of) an array element."""


class DimensionMismatch(SynthError):
    pass


class FlatImage(SynthError):
    """The image has no nonzero magnitude to normalize against."""


class EmptyInput(SynthError):
    pass


class Infeasible(SynthError):
    """The residual bound is below the least-squares floor of the program."""


class EmptySelection(SynthError):
    pass


class SubsetOutOfRange(SynthError):
    pass


class GridMismatch(SynthError):
    pass


class ParseError(SynthError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(SynthError):
    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class MagicMismatch(SynthError):
    pass


class TruncatedFile(SynthError):
    pass
