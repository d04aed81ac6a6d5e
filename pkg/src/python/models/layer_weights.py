from dataclasses import dataclass

import numpy as np

from models.errors import DataError, DimensionMismatchError


@dataclass(frozen=True, eq=False)
class LayerWeights:
    """
    Synaptic matrices of a three-layer network.

    w1 is hidden x in_dim (input -> hidden), w2 is out_dim x hidden (hidden -> output).
    With `bias` a constant 1 is appended to the input and to the hidden layer, so
    w1 gains one column and w2 gains one column.
    """

    w1: np.ndarray
    w2: np.ndarray
    lambda1: float = 1.0
    lambda2: float = 1.0
    bias: bool = False

    def __post_init__(self):
        w1 = np.ascontiguousarray(np.asarray(self.w1, dtype=np.float64))
        w2 = np.ascontiguousarray(np.asarray(self.w2, dtype=np.float64))
        if w1.ndim != 2 or w2.ndim != 2:
            raise DimensionMismatchError("Weight matrices must be 2-D")
        extra = 1 if self.bias else 0
        if w2.shape[1] != w1.shape[0] + extra:
            raise DimensionMismatchError(
                f"w2 has {w2.shape[1]} columns but the hidden layer has {w1.shape[0]} units (+{extra} bias)"
            )
        if w1.shape[1] <= extra:
            raise DimensionMismatchError("w1 needs at least one input column")
        if not (np.all(np.isfinite(w1)) and np.all(np.isfinite(w2))):
            raise DataError("Weights must be finite")
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise DataError("Activation steepness must be positive")
        w1.setflags(write=False)
        w2.setflags(write=False)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)

    @property
    def in_dim(self) -> int:
        return int(self.w1.shape[1]) - (1 if self.bias else 0)

    @property
    def hidden(self) -> int:
        return int(self.w1.shape[0])

    @property
    def out_dim(self) -> int:
        return int(self.w2.shape[0])

    @property
    def parameter_count(self) -> int:
        return int(self.w1.size + self.w2.size)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.w2.ravel()])

    def with_flat(self, values: np.ndarray) -> "LayerWeights":
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size != self.parameter_count:
            raise DimensionMismatchError(f"Expected {self.parameter_count} weights, got {values.size}")
        split = self.w1.size
        return LayerWeights(
            values[:split].reshape(self.w1.shape),
            values[split:].reshape(self.w2.shape),
            self.lambda1,
            self.lambda2,
            self.bias,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, LayerWeights):
            return NotImplemented
        return (
            self.bias == other.bias
            and self.lambda1 == other.lambda1
            and self.lambda2 == other.lambda2
            and np.array_equal(self.w1, other.w1)
            and np.array_equal(self.w2, other.w2)
        )

    __hash__ = None
