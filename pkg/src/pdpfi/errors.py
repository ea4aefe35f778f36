"""Exception hierarchy.

Validation problems (bad input, violated preconditions) derive from
:class:`ValidationError`; failures inside a numerical routine derive from
:class:`NumericalError`. The CLI maps them to exit codes 2 and 3.
"""


class PdPfiError(Exception):
    """Base class for all package errors."""


class ValidationError(PdPfiError, ValueError):
    pass


class NumericalError(PdPfiError, ArithmeticError):
    pass


class EmptyFile(ValidationError):
    pass


class MissingTarget(ValidationError):
    pass


class _CellError(ValidationError):
    def __init__(self, row, col, message):
        self.row = row
        self.col = col
        super().__init__(f"row {row}, column {col}: {message}")


class ParseError(_CellError):
    pass


class NonFiniteValue(_CellError):
    pass


class IndexOutOfBounds(ValidationError, IndexError):
    pass


class InvalidSize(ValidationError):
    pass


class InvalidProbability(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class EmptyTrainingSet(ValidationError):
    pass


class TooFewRows(ValidationError):
    pass


class TooFewSplits(ValidationError):
    pass


class TooFewSamples(ValidationError):
    pass


class ConstantFeature(ValidationError):
    pass


class PlanMismatch(ValidationError):
    pass


class MixedKinds(ValidationError):
    pass


class DegenerateDesign(NumericalError):
    pass


class FitError(NumericalError):
    """A model fit failed on a particular resampling split."""

    def __init__(self, split, cause):
        self.split = split
        self.cause = cause
        super().__init__(f"fit failed on split {split}: {cause}")
