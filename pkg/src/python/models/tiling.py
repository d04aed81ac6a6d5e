from dataclasses import dataclass
from typing import Tuple

import numpy as np

from models.errors import DataError, DimensionMismatchError
from models.layer_weights import LayerWeights


@dataclass(frozen=True, eq=False)
class BlockTiling:
    """
    Square tiles of a zero-padded image, each flattened row-major into an M-vector
    (M = block_side²); tiles are ordered row-major over the grid.
    """

    block_side: int
    blocks: np.ndarray
    grid_rows: int
    grid_cols: int
    width: int
    height: int

    def __post_init__(self):
        blocks = np.ascontiguousarray(np.asarray(self.blocks, dtype=np.float64))
        if self.block_side < 1:
            raise DataError(f"block_side must be >= 1, got {self.block_side}")
        expected = (self.grid_rows * self.grid_cols, self.block_side * self.block_side)
        if blocks.shape != expected:
            raise DimensionMismatchError(f"Tiling blocks have shape {blocks.shape}, expected {expected}")
        blocks.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @property
    def block_count(self) -> int:
        return int(self.blocks.shape[0])

    @property
    def block_length(self) -> int:
        return self.block_side * self.block_side

    @property
    def padding(self) -> Tuple[int, int]:
        """(right, bottom) zero padding in pixels."""
        return (
            self.grid_cols * self.block_side - self.width,
            self.grid_rows * self.block_side - self.height,
        )

    def with_blocks(self, blocks: np.ndarray) -> "BlockTiling":
        return BlockTiling(self.block_side, blocks, self.grid_rows, self.grid_cols, self.width, self.height)


@dataclass(frozen=True, eq=False)
class AutoencoderStage:
    """An M -> floor(M/2) -> M network."""

    weights: LayerWeights

    def __post_init__(self):
        w = self.weights
        if w.in_dim != w.out_dim:
            raise DimensionMismatchError(f"Autoencoder stage maps {w.in_dim} -> {w.out_dim}; sizes must match")
        if w.hidden != w.in_dim // 2:
            raise DimensionMismatchError(f"Stage with M={w.in_dim} needs {w.in_dim // 2} hidden units, got {w.hidden}")

    @property
    def block_length(self) -> int:
        return self.weights.in_dim

    @property
    def code_length(self) -> int:
        return self.weights.hidden


@dataclass(frozen=True, eq=False)
class AutoencoderStack:
    """
    Stages applied in sequence; stage s+1 compresses the codes of stage s.

    `stages[g]` is the chain used by block group g: a single chain shared by every
    block, or one chain per block when trained unshared.
    """

    stages: Tuple[Tuple[AutoencoderStage, ...], ...]
    codes: np.ndarray
    shared: bool = True

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(tuple(chain) for chain in self.stages))
        if not self.stages or not self.stages[0]:
            raise DataError("An autoencoder stack needs at least one stage")

    @property
    def depth(self) -> int:
        return len(self.stages[0])

    def chain_for(self, block_index: int) -> Tuple[AutoencoderStage, ...]:
        return self.stages[0] if self.shared else self.stages[block_index]


@dataclass(frozen=True)
class ByteAccounting:
    """Storage cost of an autoencoder encoding against the raw bit raster."""

    original_bytes: int
    code_bytes: int
    weight_bytes: int
    header_bytes: int

    @property
    def total_bytes(self) -> int:
        return self.code_bytes + self.weight_bytes + self.header_bytes

    @property
    def exceeds_original(self) -> bool:
        return self.total_bytes >= self.original_bytes

    @property
    def ratio(self) -> float:
        return self.original_bytes / self.total_bytes if self.total_bytes else float("inf")

    def to_dict(self) -> dict:
        return {
            "original_bytes": self.original_bytes,
            "code_bytes": self.code_bytes,
            "weight_bytes": self.weight_bytes,
            "header_bytes": self.header_bytes,
            "total_bytes": self.total_bytes,
            "exceeds_original": self.exceeds_original,
        }
