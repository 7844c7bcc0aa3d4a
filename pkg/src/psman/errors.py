"""Exception hierarchy.

Everything raised on purpose by the package derives from :class:`PsmanError`.
The CLI maps the three families below onto exit codes.
"""


class PsmanError(Exception):
    """Base class for package errors."""


class ConfigError(PsmanError, ValueError):
    """Invalid parameters or parameter combination."""


class DataError(PsmanError, ValueError):
    """Malformed or incompatible input data."""


class NumericalError(PsmanError, ArithmeticError):
    """A numerical routine could not produce a valid result."""


class RankDeficient(NumericalError):
    def __init__(self, index, magnitude, threshold):
        self.index = index
        self.magnitude = magnitude
        self.threshold = threshold
        super().__init__(
            f"matrix is rank deficient: |R[{index},{index}]| = {magnitude:.3e} "
            f"below threshold {threshold:.3e}"
        )


class NotOrthonormal(NumericalError):
    pass


class NonSquare(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class SpecMismatch(DataError):
    pass


class DatasetCountMismatch(DataError):
    pass


class EmptyClass(DataError):
    pass


class ZeroDataset(DataError):
    pass


class EmptyFile(DataError):
    pass


class ParseError(DataError):
    def __init__(self, row, col, message):
        self.row = row
        self.col = col
        super().__init__(f"row {row}, column {col}: {message}")


class MixedColumnCount(DataError):
    def __init__(self, row, expected, found):
        self.row = row
        self.expected = expected
        self.found = found
        super().__init__(f"row {row} has {found} columns, expected {expected}")
