from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np

from models.errors import DataError, DimensionMismatchError


@dataclass(frozen=True)
class TimeSeries:
    """An ordered real series with its characteristic dimension d."""

    values: np.ndarray
    dim: int = 1

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64).ravel())
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.size == 0:
            raise DataError("Time series must contain at least one sample")
        if self.dim < 1:
            raise DataError(f"Characteristic dimension must be >= 1, got {self.dim}")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def inputs(self) -> np.ndarray:
        """x_1 .. x_{N-1}: the arguments of the one-step map."""
        return self.values[:-1]

    @property
    def targets(self) -> np.ndarray:
        """x_2 .. x_N: the successors the map must reproduce."""
        return self.values[1:]

    def vectors(self) -> np.ndarray:
        """Disjoint d-blocks, x^k_m = x_{kd+m}; a trailing partial block is dropped."""
        count = len(self) // self.dim
        return self.values[: count * self.dim].reshape(count, self.dim)

    def in_unit_interval(self) -> bool:
        return bool(np.all(self.values > 0.0) and np.all(self.values < 1.0))


@dataclass(frozen=True)
class Block:
    """One interval of the state-space partition with its sample statistics."""

    lower: float
    upper: float
    count: int
    mean: float
    variance: float

    def contains(self, x: float) -> bool:
        return self.lower <= x < self.upper

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "count": self.count,
            "mean": self.mean,
            "variance": self.variance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Block":
        return cls(
            lower=float(data["lower"]),
            upper=float(data["upper"]),
            count=int(data["count"]),
            mean=float(data["mean"]),
            variance=float(data["variance"]),
        )


@dataclass(frozen=True)
class Partition:
    """Ordered, disjoint blocks covering the data range."""

    blocks: Tuple[Block, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        for left, right in zip(self.blocks, self.blocks[1:]):
            if left.upper != right.lower:
                raise DataError(
                    f"Partition blocks must be contiguous: {left.upper} != {right.lower}"
                )

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def means(self) -> np.ndarray:
        return np.array([b.mean for b in self.blocks], dtype=np.float64)

    @property
    def variances(self) -> np.ndarray:
        return np.array([b.variance for b in self.blocks], dtype=np.float64)

    @property
    def thresholds(self) -> np.ndarray:
        """Interior boundaries between consecutive blocks."""
        return np.array([b.upper for b in self.blocks[:-1]], dtype=np.float64)

    def assign(self, data: np.ndarray) -> np.ndarray:
        """Index of the block each datum falls in; the outer blocks absorb out-of-range values."""
        return np.searchsorted(self.thresholds, np.asarray(data, dtype=np.float64), side="right")


ModelMode = Literal["constant", "linear"]


@dataclass(frozen=True)
class PiecewiseModel:
    """
    Blend of per-block constant (f^α) or linear (a^α + b^α x) pieces.

    Linear coefficients are stored flat as [a_1..a_M, b_1..b_M].
    `offset` and `scale` map model space back to data space: x = offset + scale * x'.
    """

    partition: Partition
    mode: ModelMode
    coeffs: np.ndarray
    offset: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        coeffs = np.ascontiguousarray(np.asarray(self.coeffs, dtype=np.float64).ravel())
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        if self.mode not in ("constant", "linear"):
            raise DataError(f"Unknown model mode: {self.mode}")
        expected = self.coefficient_count(len(self.partition), self.mode)
        if coeffs.size != expected:
            raise DimensionMismatchError(
                f"{self.mode} model over {len(self.partition)} blocks needs {expected} coefficients, got {coeffs.size}"
            )

    @staticmethod
    def coefficient_count(block_count: int, mode: ModelMode) -> int:
        return block_count * (2 if mode == "linear" else 1)

    @property
    def intercepts(self) -> np.ndarray:
        return self.coeffs[: len(self.partition)]

    @property
    def slopes(self) -> Optional[np.ndarray]:
        if self.mode != "linear":
            return None
        return self.coeffs[len(self.partition):]

    def with_coeffs(self, coeffs: np.ndarray) -> "PiecewiseModel":
        return PiecewiseModel(self.partition, self.mode, coeffs, self.offset, self.scale)


TrainMethod = Literal["gradient", "monte_carlo"]

BETA_CAP = 1e12


@dataclass(frozen=True)
class TrainConfig:
    """
    Shared training settings for the Hertz model, the layered network and the autoencoder.

    eta(k) = eta0 / (1 + k / decay_tau). With `auto_scale` the gradient step is further
    divided by an upper bound on the curvature of the cost, so eta0 < 2 keeps plain
    descent monotone.
    """

    eta0: float = 1.0
    decay_tau: float = 1000.0
    max_iters: int = 2000
    seed: int = 0
    method: TrainMethod = "gradient"
    auto_scale: bool = True
    tol: float = 0.0
    mc_step: float = 0.05
    beta0: float = 1.0
    beta_growth: float = 1.001
    log_every: int = 500

    def __post_init__(self):
        if not self.eta0 > 0:
            raise DataError(f"eta0 must be > 0, got {self.eta0}")
        if not self.decay_tau > 0:
            raise DataError(f"decay_tau must be > 0, got {self.decay_tau}")
        if self.max_iters < 0:
            raise DataError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.method not in ("gradient", "monte_carlo"):
            raise DataError(f"Unknown training method: {self.method}")
        if not self.mc_step > 0:
            raise DataError(f"mc_step must be > 0, got {self.mc_step}")
        if not self.beta0 > 0 or self.beta_growth < 1:
            raise DataError("Annealing needs beta0 > 0 and beta_growth >= 1")

    def eta(self, k: int) -> float:
        return self.eta0 / (1.0 + k / self.decay_tau)

    def beta(self, k: int) -> float:
        try:
            return min(self.beta0 * self.beta_growth ** k, BETA_CAP)
        except OverflowError:
            return BETA_CAP

    def to_dict(self) -> dict:
        return {
            "eta0": self.eta0,
            "decay_tau": self.decay_tau,
            "max_iters": self.max_iters,
            "seed": self.seed,
            "method": self.method,
            "auto_scale": self.auto_scale,
            "tol": self.tol,
            "mc_step": self.mc_step,
            "beta0": self.beta0,
            "beta_growth": self.beta_growth,
            "log_every": self.log_every,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        defaults = cls()
        return cls(**{key: data.get(key, getattr(defaults, key)) for key in defaults.to_dict()})


@dataclass
class FitHistory:
    """Per-iteration error trace of a training run."""

    errors: List[float] = field(default_factory=list)

    @property
    def initial(self) -> float:
        return self.errors[0] if self.errors else float("nan")

    @property
    def final(self) -> float:
        return self.errors[-1] if self.errors else float("nan")
