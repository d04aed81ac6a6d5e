from dataclasses import dataclass

import numpy as np

from models.errors import DataError, DimensionMismatchError


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """Black-and-white raster; pixels[row, col] is True for set (black) pixels, row 0 on top."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.ascontiguousarray(np.asarray(self.pixels, dtype=bool))
        if pixels.ndim != 2 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise DataError(f"Binary image needs a non-empty 2-D pixel array, got shape {pixels.shape}")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @classmethod
    def blank(cls, width: int, height: int, fill: bool = False) -> "BinaryImage":
        return cls(np.full((height, width), fill, dtype=bool))

    @classmethod
    def from_bits(cls, width: int, height: int, bits) -> "BinaryImage":
        bits = np.asarray(bits, dtype=bool).ravel()
        if bits.size != width * height:
            raise DimensionMismatchError(f"{width}x{height} image needs {width * height} bits, got {bits.size}")
        return cls(bits.reshape(height, width))

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def shape(self) -> tuple:
        return self.pixels.shape

    @property
    def set_count(self) -> int:
        return int(np.count_nonzero(self.pixels))

    @property
    def byte_size(self) -> int:
        """Bytes needed for the raw bit raster, rows packed to byte boundaries."""
        return self.height * ((self.width + 7) // 8)

    def bits(self) -> np.ndarray:
        """Row-major bit vector."""
        return self.pixels.ravel()

    def complement(self) -> "BinaryImage":
        return BinaryImage(~self.pixels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self) -> int:
        return hash((self.shape, self.pixels.tobytes()))

    def __repr__(self) -> str:
        return f"BinaryImage({self.width}x{self.height}, set={self.set_count})"
