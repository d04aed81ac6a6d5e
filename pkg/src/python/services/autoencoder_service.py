"""
Block autoencoder: the image is cut into square tiles and every tile vector goes
through M -> M/2 -> M sigmoid networks, optionally stacked so each stage halves
the code of the previous one.
"""
import struct
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from models.binary_image import BinaryImage
from models.errors import DataError, DimensionMismatchError
from models.layer_weights import LayerWeights
from models.tiling import AutoencoderStack, AutoencoderStage, BlockTiling, ByteAccounting
from models.time_series import FitHistory, TrainConfig
from services.layered_net_service import init_weights, pair_cost, sigmoid, train_pairs
from utils.logger import get_logger, log_execution
from utils.rng import spawn_seeds

logger = get_logger("Autoencoder")

DEFAULT_BLOCK_SIDE = 20
BINARIZE_THRESHOLD = 0.5
CODE_BITS = (64, 8)

_STACK_HEADER = struct.Struct("<BBBI")
_STAGE_DIMS = struct.Struct("<II")


def tile(image: BinaryImage, block_side: int = DEFAULT_BLOCK_SIDE) -> BlockTiling:
    """Zero-pad to multiples of block_side and cut into row-major tiles."""
    if block_side < 1:
        raise DataError(f"block_side must be >= 1, got {block_side}")
    grid_rows = -(-image.height // block_side)
    grid_cols = -(-image.width // block_side)
    padded = np.zeros((grid_rows * block_side, grid_cols * block_side), dtype=np.float64)
    padded[: image.height, : image.width] = image.pixels
    blocks = (
        padded.reshape(grid_rows, block_side, grid_cols, block_side)
        .transpose(0, 2, 1, 3)
        .reshape(grid_rows * grid_cols, block_side * block_side)
    )
    return BlockTiling(block_side, blocks, grid_rows, grid_cols, image.width, image.height)


def binarize(values) -> np.ndarray:
    """Pixels above 0.5 are set; exact ties stay clear."""
    return np.asarray(values, dtype=np.float64) > BINARIZE_THRESHOLD


def untile(tiling: BlockTiling, blocks: Optional[np.ndarray] = None) -> BinaryImage:
    """Reassemble (optionally replacement) block vectors, binarize and crop the padding."""
    values = tiling.blocks if blocks is None else np.asarray(blocks, dtype=np.float64)
    if values.shape != tiling.blocks.shape:
        raise DimensionMismatchError(f"Blocks have shape {values.shape}, tiling needs {tiling.blocks.shape}")
    b = tiling.block_side
    canvas = (
        values.reshape(tiling.grid_rows, tiling.grid_cols, b, b)
        .transpose(0, 2, 1, 3)
        .reshape(tiling.grid_rows * b, tiling.grid_cols * b)
    )
    return BinaryImage(binarize(canvas[: tiling.height, : tiling.width]))


def new_stage(block_length: int, seed: int) -> AutoencoderStage:
    hidden = block_length // 2
    if hidden < 1:
        raise DataError(f"A block of length {block_length} cannot be halved further")
    return AutoencoderStage(init_weights(block_length, hidden, block_length, seed))


def encode(stage: AutoencoderStage, block) -> np.ndarray:
    """z_k = σ₁(Σ_j W¹_kj x_j); a (Q, M) batch gives (Q, floor(M/2))."""
    block = np.asarray(block, dtype=np.float64)
    if block.shape[-1] != stage.block_length:
        raise DimensionMismatchError(f"Stage expects blocks of length {stage.block_length}, got {block.shape[-1]}")
    w = stage.weights
    return sigmoid(block @ w.w1.T, w.lambda1)


def decode(stage: AutoencoderStage, z) -> np.ndarray:
    """y_l = σ₂(Σ_k W²_lk z_k); binarize the result for pixels."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != stage.code_length:
        raise DimensionMismatchError(f"Stage expects codes of length {stage.code_length}, got {z.shape[-1]}")
    w = stage.weights
    return sigmoid(z @ w.w2.T, w.lambda2)


def stage_cost(stage: AutoencoderStage, tiling) -> float:
    """E = Σ_α Σ_l (x_l^α - y_l(x^α))^2 over the tiling's blocks (or a raw vector batch)."""
    vectors = tiling.blocks if isinstance(tiling, BlockTiling) else np.atleast_2d(np.asarray(tiling, dtype=np.float64))
    if vectors.shape[0] == 0:
        raise DataError("Cannot evaluate a stage on an empty tiling")
    return pair_cost(stage.weights, vectors, vectors)


@log_execution(start_msg="Stage Training Started", end_msg="Stage Training Finished")
def train_stage(
    tiling,
    cfg: TrainConfig,
    init: Optional[AutoencoderStage] = None,
    history: Optional[FitHistory] = None,
) -> AutoencoderStage:
    """
    Train one M -> M/2 -> M stage to reproduce its input vectors.

    `tiling` is a BlockTiling or a (Q, M) batch of code vectors from an earlier stage.
    """
    vectors = tiling.blocks if isinstance(tiling, BlockTiling) else np.atleast_2d(np.asarray(tiling, dtype=np.float64))
    if vectors.shape[0] < 1:
        raise DataError("Stage training needs at least one block")
    stage = init if init is not None else new_stage(vectors.shape[1], cfg.seed)
    if stage.block_length != vectors.shape[1]:
        raise DimensionMismatchError(f"Stage expects length {stage.block_length}, blocks have {vectors.shape[1]}")
    return AutoencoderStage(train_pairs(stage.weights, vectors, vectors, cfg, history))


def stage_dimensions(block_length: int, depth: int) -> List[Tuple[int, int]]:
    """(input, code) sizes per stage under floor halving."""
    if depth < 1:
        raise DataError(f"depth must be >= 1, got {depth}")
    dims, length = [], block_length
    for _ in range(depth):
        code = length // 2
        if code < 1:
            raise DataError(f"depth {depth} exhausts a block of length {block_length}")
        dims.append((length, code))
        length = code
    return dims


def _train_chain(vectors: np.ndarray, depth: int, cfg: TrainConfig, seed: int) -> Tuple[Tuple[AutoencoderStage, ...], np.ndarray]:
    stages = []
    codes = vectors
    for level, stage_seed in enumerate(spawn_seeds(seed, depth)):
        level_cfg = TrainConfig.from_dict({**cfg.to_dict(), "seed": stage_seed})
        stage = train_stage(codes, level_cfg, init=new_stage(codes.shape[1], stage_seed))
        codes = encode(stage, codes)
        stages.append(stage)
        logger.debug(f"stage {level}: {stage.block_length} -> {stage.code_length}")
    return tuple(stages), codes


@log_execution(level="INFO", start_msg="Stage Iteration Started", end_msg="Stage Iteration Finished")
def iterate_stages(
    tiling: BlockTiling,
    depth: int,
    cfg: TrainConfig,
    shared: bool = True,
    threads: int = 1,
) -> AutoencoderStack:
    """
    Train `depth` stacked stages; stage s+1 learns the codes of stage s.

    With `shared` one chain serves all blocks; otherwise every block gets its own
    chain, trained concurrently and merged by block index.
    """
    if tiling.block_count < 1:
        raise DataError("Stage iteration needs at least one block")
    stage_dimensions(tiling.block_length, depth)
    if depth == 1 and shared:
        stage = train_stage(tiling, cfg)
        return AutoencoderStack(((stage,),), encode(stage, tiling.blocks), shared=True)

    if shared:
        chain, codes = _train_chain(tiling.blocks, depth, cfg, cfg.seed)
        return AutoencoderStack((chain,), codes, shared=True)

    seeds = spawn_seeds(cfg.seed, tiling.block_count)

    def run(index: int):
        return _train_chain(tiling.blocks[index:index + 1], depth, cfg, seeds[index])

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, range(tiling.block_count)))
    chains = tuple(chain for chain, _ in results)
    codes = np.vstack([code for _, code in results])
    return AutoencoderStack(chains, codes, shared=False)


def encode_stack(stack: AutoencoderStack, tiling: BlockTiling) -> np.ndarray:
    """Codes of every block through its chain."""
    if stack.shared:
        codes = tiling.blocks
        for stage in stack.stages[0]:
            codes = encode(stage, codes)
        return codes
    rows = []
    for index in range(tiling.block_count):
        codes = tiling.blocks[index:index + 1]
        for stage in stack.chain_for(index):
            codes = encode(stage, codes)
        rows.append(codes)
    return np.vstack(rows)


def decode_stack(stack: AutoencoderStack, codes: Optional[np.ndarray] = None) -> np.ndarray:
    """Undo the stages in reverse order; returns pre-binarization block values."""
    codes = stack.codes if codes is None else np.asarray(codes, dtype=np.float64)
    if stack.shared:
        values = codes
        for stage in reversed(stack.stages[0]):
            values = decode(stage, values)
        return values
    rows = []
    for index in range(codes.shape[0]):
        values = codes[index:index + 1]
        for stage in reversed(stack.chain_for(index)):
            values = decode(stage, values)
        rows.append(values)
    return np.vstack(rows)


def quantize_codes(codes: np.ndarray, code_bits: int) -> np.ndarray:
    """Round codes to the stored precision (8-bit codes keep 256 levels on [0, 1])."""
    if code_bits == 64:
        return np.asarray(codes, dtype=np.float64)
    if code_bits == 8:
        return np.round(np.clip(codes, 0.0, 1.0) * 255.0) / 255.0
    raise DataError(f"code_bits must be one of {CODE_BITS}, got {code_bits}")


def _stack_stage_list(stack: AutoencoderStack) -> List[AutoencoderStage]:
    return [stage for chain in stack.stages for stage in chain]


def byte_accounting(
    stack: AutoencoderStack,
    original_bytes: int,
    code_bits: int = 64,
    header_bytes: int = 0,
) -> ByteAccounting:
    """Compare stored codes plus network weights (plus headers) with the raw image size."""
    code_bytes = int(stack.codes.size * code_bits // 8)
    weight_bytes = sum(stage.weights.parameter_count * 8 for stage in _stack_stage_list(stack))
    accounting = ByteAccounting(original_bytes, code_bytes, weight_bytes, header_bytes)
    if accounting.exceeds_original:
        logger.info(
            f"Autoencoder storage {accounting.total_bytes} B is not smaller than the original {original_bytes} B"
        )
    return accounting


def stack_to_payload(stack: AutoencoderStack, code_bits: int = 64) -> bytes:
    """
    depth, shared flag, code bits, block count; per stage (M, hidden); weights of every
    chain (W¹ then W², row-major little-endian doubles); then the codes.
    """
    codes = np.asarray(stack.codes, dtype=np.float64)
    parts = [_STACK_HEADER.pack(stack.depth, 1 if stack.shared else 0, code_bits, codes.shape[0])]
    for stage in stack.stages[0]:
        parts.append(_STAGE_DIMS.pack(stage.block_length, stage.code_length))
    for stage in _stack_stage_list(stack):
        parts.append(stage.weights.w1.astype("<f8").tobytes())
        parts.append(stage.weights.w2.astype("<f8").tobytes())
    if code_bits == 64:
        parts.append(codes.astype("<f8").tobytes())
    elif code_bits == 8:
        parts.append(np.round(np.clip(codes, 0.0, 1.0) * 255.0).astype(np.uint8).tobytes())
    else:
        raise DataError(f"code_bits must be one of {CODE_BITS}, got {code_bits}")
    return b"".join(parts)


def stack_from_payload(payload: bytes) -> Tuple[AutoencoderStack, int]:
    """Inverse of `stack_to_payload`; returns (stack, code_bits)."""
    if len(payload) < _STACK_HEADER.size:
        raise DataError("Autoencoder payload is truncated")
    depth, shared_flag, code_bits, block_count = _STACK_HEADER.unpack_from(payload)
    if code_bits not in CODE_BITS:
        raise DataError(f"Unsupported code width {code_bits}")
    pos = _STACK_HEADER.size
    dims = []
    for _ in range(depth):
        if pos + _STAGE_DIMS.size > len(payload):
            raise DataError("Autoencoder payload is truncated")
        dims.append(_STAGE_DIMS.unpack_from(payload, pos))
        pos += _STAGE_DIMS.size
    if not dims:
        raise DataError("Autoencoder payload declares zero stages")

    def read_doubles(count: int) -> np.ndarray:
        nonlocal pos
        end = pos + 8 * count
        if end > len(payload):
            raise DataError("Autoencoder payload is truncated")
        values = np.frombuffer(payload, dtype="<f8", count=count, offset=pos).astype(np.float64)
        pos = end
        return values

    chain_count = 1 if shared_flag else block_count
    chains = []
    for _ in range(chain_count):
        chain = []
        for length, code in dims:
            w1 = read_doubles(code * length).reshape(code, length)
            w2 = read_doubles(length * code).reshape(length, code)
            chain.append(AutoencoderStage(LayerWeights(w1, w2)))
        chains.append(tuple(chain))

    code_length = dims[-1][1]
    if code_bits == 64:
        codes = read_doubles(block_count * code_length).reshape(block_count, code_length)
    else:
        end = pos + block_count * code_length
        if end > len(payload):
            raise DataError("Autoencoder payload is truncated")
        codes = np.frombuffer(payload, dtype=np.uint8, count=block_count * code_length, offset=pos)
        codes = codes.astype(np.float64).reshape(block_count, code_length) / 255.0
        pos = end
    if pos != len(payload):
        raise DataError(f"Autoencoder payload has {len(payload) - pos} trailing bytes")
    return AutoencoderStack(tuple(chains), codes, shared=bool(shared_flag)), code_bits


def reconstruct(stack: AutoencoderStack, tiling_shape: BlockTiling, codes: Optional[np.ndarray] = None) -> BinaryImage:
    """Decoded, binarized and cropped image for a tiling geometry."""
    return untile(tiling_shape, decode_stack(stack, codes))


def empty_tiling(width: int, height: int, block_side: int) -> BlockTiling:
    """Geometry-only tiling used when decoding from a container header."""
    return tile(BinaryImage.blank(width, height), block_side)


def per_block_hamming(tiling: BlockTiling, decoded: np.ndarray) -> np.ndarray:
    """Fraction of wrong pixels per block after binarization."""
    return np.mean(binarize(decoded) != (tiling.blocks > BINARIZE_THRESHOLD), axis=1)
