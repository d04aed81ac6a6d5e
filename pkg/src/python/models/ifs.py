from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from models.errors import DataError


@dataclass(frozen=True)
class AffineMap:
    """w(x, y) = (a·x + b·y + c, d·x + e·y + f)."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    def __post_init__(self):
        if not all(np.isfinite(v) for v in self.coefficients()):
            raise DataError(f"Affine map coefficients must be finite: {self.coefficients()}")

    def coefficients(self) -> Tuple[float, ...]:
        return (self.a, self.b, self.c, self.d, self.e, self.f)

    @property
    def linear(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.d, self.e]], dtype=np.float64)

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.c, self.f], dtype=np.float64)

    @classmethod
    def from_coefficients(cls, values) -> "AffineMap":
        a, b, c, d, e, f = (float(v) for v in values)
        return cls(a, b, c, d, e, f)


@dataclass(frozen=True)
class IfsSystem:
    """Contractive maps sharing the contraction factor s."""

    maps: Tuple[AffineMap, ...]
    s: float

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if not self.maps:
            raise DataError("An IFS needs at least one map")
        if not 0.0 < self.s < 1.0:
            raise DataError(f"Contraction factor must lie in (0,1), got {self.s}")

    @property
    def k(self) -> int:
        return len(self.maps)

    def coefficient_vector(self) -> np.ndarray:
        return np.array([c for m in self.maps for c in m.coefficients()], dtype=np.float64)


@dataclass(frozen=True)
class Viewport:
    """Plane rectangle shown by a raster; the top image row is y_max."""

    x_min: float = 0.0
    y_min: float = 0.0
    x_max: float = 1.0
    y_max: float = 1.0

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise DataError(f"Degenerate viewport: {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class AnnealSchedule:
    """
    Inverse-temperature schedule for the coefficient search.

    beta_n = beta0 · growth^n for sweep n; `step` is the coefficient grid spacing as a
    fraction of each coefficient's range.
    """

    beta0: float = 2000.0
    growth: float = 1.0005
    sweeps: int = 1000
    step: float = 1.0 / 64.0
    seed: int = 0

    def __post_init__(self):
        if not self.beta0 > 0:
            raise DataError(f"beta0 must be > 0, got {self.beta0}")
        if self.growth < 1:
            raise DataError(f"growth must be >= 1, got {self.growth}")
        if self.sweeps < 0:
            raise DataError(f"sweeps must be >= 0, got {self.sweeps}")
        if not self.step > 0:
            raise DataError(f"step must be > 0, got {self.step}")

    def beta(self, sweep: int) -> float:
        try:
            return min(self.beta0 * self.growth ** sweep, 1e12)
        except OverflowError:
            return 1e12

    def to_dict(self) -> dict:
        return {
            "beta0": self.beta0,
            "growth": self.growth,
            "sweeps": self.sweeps,
            "step": self.step,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnnealSchedule":
        defaults = cls()
        return cls(**{key: data.get(key, getattr(defaults, key)) for key in defaults.to_dict()})


@dataclass
class SearchResult:
    """Outcome of one inverse-search chain."""

    system: Optional[IfsSystem]
    best_delta: float
    trace: np.ndarray
    best_trace: np.ndarray
    seed: int
    accepted: int = 0
    rejected: int = 0
    contraction_rejects: int = 0
    notes: List[str] = field(default_factory=list)
