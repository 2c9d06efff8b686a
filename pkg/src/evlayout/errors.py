"""Exception hierarchy shared by every module.

Input problems derive from :class:`ValidationError` (CLI exit code 2);
non-finite numerics raise :class:`NumericError` (CLI exit code 3).
"""


class EvLayoutError(Exception):
    pass


class ValidationError(EvLayoutError, ValueError):
    pass


class NumericError(EvLayoutError, ArithmeticError):
    pass


class IndexedError(ValidationError):
    """Error tied to the first offending record index."""

    def __init__(self, index: int, detail: str = ""):
        self.index = int(index)
        msg = f"{type(self).__name__}({self.index})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


# event I/O
class MalformedHeader(ValidationError):
    pass


class MalformedRecord(IndexedError):
    pass


class RecordOutOfBounds(IndexedError):
    pass


class NonMonotonicTimestamp(IndexedError):
    pass


class BadPolarity(IndexedError):
    pass


# simulator
class OutOfCanvas(ValidationError):
    pass


class StepTooCoarse(NumericError):
    pass


class EmptyWindow(ValidationError):
    pass


class SceneError(ValidationError):
    pass


# etdf
class PixelOutOfBounds(ValidationError):
    pass


class BadBinWidth(ValidationError):
    pass


class NegativeCount(ValidationError):
    pass


class BadPatch(ValidationError):
    pass


class BinCountMismatch(ValidationError):
    pass


class AnchorHasNoEvents(ValidationError):
    pass


# sffm
class ShapeMismatch(ValidationError):
    pass


# metrics / annotations
class BadDims(ValidationError):
    pass


class SchemaError(ValidationError):
    def __init__(self, field: str, detail: str = ""):
        self.field = field
        super().__init__(f"{field}: {detail}" if detail else field)


class UnknownLabel(ValidationError):
    pass


class BadJunctionKind(ValidationError):
    pass


class MissingSeries(ValidationError):
    def __init__(self, sequence_id: str, detail: str = ""):
        self.sequence_id = sequence_id
        super().__init__(f"{sequence_id}: {detail}" if detail else sequence_id)
