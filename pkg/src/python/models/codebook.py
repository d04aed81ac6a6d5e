from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from models.errors import DataError


@dataclass(frozen=True, eq=False)
class Codebook:
    """m codeword vectors w_i in R^d, stored as an (m, d) array."""

    weights: np.ndarray

    def __post_init__(self):
        weights = np.ascontiguousarray(np.atleast_2d(np.asarray(self.weights, dtype=np.float64)))
        if weights.ndim != 2 or weights.shape[0] < 1 or weights.shape[1] < 1:
            raise DataError(f"Codebook needs an (m, d) array with m, d >= 1, got shape {weights.shape}")
        if not np.all(np.isfinite(weights)):
            raise DataError("Codebook entries must be finite")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def m(self) -> int:
        return int(self.weights.shape[0])

    @property
    def d(self) -> int:
        return int(self.weights.shape[1])

    def replace_row(self, index: int, row: np.ndarray) -> "Codebook":
        weights = self.weights.copy()
        weights[index] = row
        return Codebook(weights)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Codebook):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    __hash__ = None


InitMode = Literal["sample", "plusplus"]


@dataclass(frozen=True)
class LearningSchedule:
    """
    Online Kohonen schedule, eta(n) = eta0 / (1 + n / tau) with tau = max_steps / 10 by default.

    `radius0` > 0 switches on the neighbourhood mode: codewords on a 1-D chain within a
    Gaussian window around the winner also move, the window shrinking like eta.
    """

    max_steps: int = 10000
    eta0: float = 0.5
    tau: Optional[float] = None
    seed: int = 0
    radius0: float = 0.0
    init: InitMode = "sample"

    def __post_init__(self):
        if self.max_steps < 0:
            raise DataError(f"max_steps must be >= 0, got {self.max_steps}")
        if not 0 < self.eta0 <= 1:
            raise DataError(f"eta0 must lie in (0, 1], got {self.eta0}")
        if self.tau is not None and not self.tau > 0:
            raise DataError(f"tau must be > 0, got {self.tau}")
        if self.radius0 < 0:
            raise DataError(f"radius0 must be >= 0, got {self.radius0}")
        if self.init not in ("sample", "plusplus"):
            raise DataError(f"Unknown codebook init '{self.init}'")

    @property
    def decay_tau(self) -> float:
        if self.tau is not None:
            return self.tau
        return max(self.max_steps / 10.0, 1.0)

    def eta(self, n: int) -> float:
        return self.eta0 / (1.0 + n / self.decay_tau)

    def radius(self, n: int) -> float:
        return self.radius0 / (1.0 + n / self.decay_tau)

    def to_dict(self) -> dict:
        return {
            "max_steps": self.max_steps,
            "eta0": self.eta0,
            "tau": self.tau,
            "seed": self.seed,
            "radius0": self.radius0,
            "init": self.init,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LearningSchedule":
        defaults = cls()
        return cls(**{key: data.get(key, getattr(defaults, key)) for key in defaults.to_dict()})
