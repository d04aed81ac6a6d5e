class FncError(Exception):
    """Base class for all toolkit errors."""


class UsageError(FncError):
    """Invalid command-line usage or inconsistent options."""


class DataError(FncError, ValueError):
    """Input data violates a precondition."""


class SeriesTooShortError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class NotContractiveError(DataError):
    """An affine map has contraction factor >= 1."""

    def __init__(self, index: int, factor: float):
        super().__init__(f"Map {index} is not contractive (factor {factor:.6g} >= 1)")
        self.index = index
        self.factor = factor


class DivergenceError(DataError):
    """A training run produced a non-finite cost; the step size is too large."""


class ImageFormatError(DataError):
    pass


class ContainerFormatError(DataError):
    pass
