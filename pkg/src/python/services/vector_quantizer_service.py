"""
Vector quantization with Voronoi-cell semantics and winner-take-all Kohonen learning.
"""
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from models.codebook import Codebook, LearningSchedule
from models.errors import DataError, DimensionMismatchError
from utils.logger import get_logger, log_execution
from utils.rng import make_rng, spawn_seeds

logger = get_logger("VectorQuant")

_HEADER = struct.Struct("<IIIB")
_CHUNK_ELEMENTS = 4_000_000


def _as_data(data, d: Optional[int] = None) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None] if d in (None, 1) else data[None, :]
    if data.ndim != 2 or data.shape[0] == 0:
        raise DataError("Data must be a non-empty (n, d) array")
    if d is not None and data.shape[1] != d:
        raise DimensionMismatchError(f"Data vectors have dimension {data.shape[1]}, codebook has {d}")
    return data


def squared_distances(codebook: Codebook, data: np.ndarray) -> np.ndarray:
    """(n, m) matrix of ||v - w_i||², computed row by row in bounded chunks."""
    weights = codebook.weights
    rows = max(1, _CHUNK_ELEMENTS // max(1, weights.size))
    out = np.empty((data.shape[0], codebook.m), dtype=np.float64)
    for start in range(0, data.shape[0], rows):
        diff = data[start:start + rows, None, :] - weights[None, :, :]
        out[start:start + rows] = np.einsum("nmd,nmd->nm", diff, diff)
    return out


def _pick(distances: np.ndarray, rng: Optional[np.random.Generator]) -> int:
    tied = np.flatnonzero(distances == distances.min())
    if tied.size == 1 or rng is None:
        return int(tied[0])
    return int(tied[rng.integers(tied.size)])


def winner(codebook: Codebook, v, rng: Optional[np.random.Generator] = None) -> int:
    """argmin_i ||v - w_i||; exact ties are broken uniformly with `rng` (lowest index without one)."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != codebook.d:
        raise DimensionMismatchError(f"Vector has dimension {v.size}, codebook has {codebook.d}")
    return _pick(squared_distances(codebook, v[None, :])[0], rng)


def assign(codebook: Codebook, data, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Winner index of every datum, tie draws taken in data order."""
    data = _as_data(data, codebook.d)
    distances = squared_distances(codebook, data)
    return np.array([_pick(row, rng) for row in distances], dtype=np.int64)


def voronoi_assign(codebook: Codebook, data, rng: Optional[np.random.Generator] = None) -> List[np.ndarray]:
    """Data indices of each codeword's Voronoi cell; cells are disjoint and cover all data."""
    labels = assign(codebook, data, rng)
    return [np.flatnonzero(labels == i) for i in range(codebook.m)]


def distortion(codebook: Codebook, data) -> float:
    """Σ_v min_i ||v - w_i||²."""
    data = _as_data(data, codebook.d)
    return float(np.sum(squared_distances(codebook, data).min(axis=1)))


def online_update(
    codebook: Codebook,
    v,
    eta: float,
    rng: Optional[np.random.Generator] = None,
    radius: float = 0.0,
) -> Codebook:
    """
    Kohonen step: the winner moves toward v, w <- w + η(v - w).

    With radius > 0 chain neighbours j of the winner also move, scaled by
    exp(-(j - winner)² / (2 radius²)); with radius 0 every other codeword is untouched.
    """
    if not 0 < eta <= 1:
        raise DataError(f"eta must lie in (0, 1], got {eta}")
    v = np.asarray(v, dtype=np.float64).ravel()
    index = winner(codebook, v, rng)
    if radius <= 0:
        row = codebook.weights[index]
        return codebook.replace_row(index, row + eta * (v - row))
    offsets = np.arange(codebook.m) - index
    strength = eta * np.exp(-(offsets ** 2) / (2.0 * radius * radius))
    return Codebook(codebook.weights + strength[:, None] * (v[None, :] - codebook.weights))


def batch_step(codebook: Codebook, data, eta: float, rng: Optional[np.random.Generator] = None) -> Codebook:
    """Each w_i moves by η · mean over its cell of (v - w_i); empty cells stay put."""
    if not eta > 0:
        raise DataError(f"eta must be > 0, got {eta}")
    data = _as_data(data, codebook.d)
    labels = assign(codebook, data, rng)
    weights = codebook.weights.copy()
    for i in range(codebook.m):
        members = data[labels == i]
        if members.shape[0]:
            weights[i] = weights[i] + eta * (members.mean(axis=0) - weights[i])
    return Codebook(weights)


def initial_codebook(data, m: int, rng: np.random.Generator, mode: str = "sample") -> Codebook:
    """
    `sample`: m data points drawn without replacement (with replacement if m > n).
    `plusplus`: first point uniform, then each next point with probability ∝ squared
    distance to the nearest chosen one.
    """
    data = _as_data(data)
    n = data.shape[0]
    if m < 1:
        raise DataError(f"m must be >= 1, got {m}")
    if mode == "sample":
        picks = rng.choice(n, size=m, replace=m > n)
        return Codebook(data[picks])
    if mode != "plusplus":
        raise DataError(f"Unknown codebook init '{mode}'")
    chosen = [int(rng.integers(n))]
    nearest = np.sum((data - data[chosen[0]]) ** 2, axis=1)
    for _ in range(1, m):
        total = nearest.sum()
        pick = int(rng.integers(n)) if total <= 0 else int(rng.choice(n, p=nearest / total))
        chosen.append(pick)
        nearest = np.minimum(nearest, np.sum((data - data[pick]) ** 2, axis=1))
    return Codebook(data[chosen])


@log_execution(level="INFO", start_msg="Codebook Training Started", end_msg="Codebook Training Finished")
def train(data, m: int, schedule: LearningSchedule) -> Codebook:
    """Online winner-take-all learning on data presented i.i.d. uniformly (seeded)."""
    data = _as_data(data)
    rng = make_rng(schedule.seed)
    codebook = initial_codebook(data, m, rng, schedule.init)
    draws = rng.integers(data.shape[0], size=schedule.max_steps)
    weights = codebook.weights.copy()
    use_neighbourhood = schedule.radius0 > 0
    for n, index in enumerate(draws.tolist()):
        v = data[index]
        eta = schedule.eta(n)
        if use_neighbourhood:
            weights = online_update(Codebook(weights), v, eta, rng, schedule.radius(n)).weights.copy()
            continue
        # winner-only update in place; same arithmetic as online_update
        w = _pick(squared_distances(Codebook(weights), v[None, :])[0], rng)
        weights[w] = weights[w] + eta * (v - weights[w])
    trained = Codebook(weights)
    logger.info(f"Trained m={m} codebook on {data.shape[0]} vectors, distortion {distortion(trained, data):.6e}")
    return trained


def multi_restart_train(
    data,
    m: int,
    schedule: LearningSchedule,
    restarts: int,
    threads: int = 1,
) -> Tuple[Codebook, List[float]]:
    """Independent trainings from spawned seeds; returns the lowest-distortion codebook and all distortions."""
    if restarts < 1:
        raise DataError(f"restarts must be >= 1, got {restarts}")
    data = _as_data(data)
    seeds = spawn_seeds(schedule.seed, restarts)

    def run(seed: int) -> Codebook:
        return train(data, m, LearningSchedule.from_dict({**schedule.to_dict(), "seed": seed}))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        codebooks = list(pool.map(run, seeds))
    scores = [distortion(codebook, data) for codebook in codebooks]
    best = min(range(restarts), key=lambda i: (scores[i], i))
    return codebooks[best], scores


def index_bits(m: int) -> int:
    """ceil(log2 m) bits per index, with 1 bit for a single codeword."""
    return max(1, math.ceil(math.log2(m))) if m > 1 else 1


def quantize_image(
    blocks,
    codebook: Codebook,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Replace each block by its winner's index.

    Returns (indices, binarized reconstruction blocks, compression ratio), the ratio being
    block bits over index bits.
    """
    blocks = _as_data(blocks, codebook.d)
    indices = assign(codebook, blocks, rng)
    reconstruction = codebook.weights[indices] > 0.5
    ratio = codebook.d / index_bits(codebook.m)
    return indices, reconstruction, ratio


def reconstruction_error(blocks, reconstruction) -> float:
    """Mean fraction of wrong pixels over all blocks."""
    blocks = np.asarray(blocks, dtype=np.float64) > 0.5
    return float(np.mean(blocks != np.asarray(reconstruction, dtype=bool)))


def pack_indices(indices, bits: int) -> bytes:
    """Big-endian bit stream of fixed-width indices, zero-padded to a byte."""
    indices = np.asarray(indices, dtype=np.uint64)
    if indices.size and int(indices.max()) >= (1 << bits):
        raise DataError(f"Index {int(indices.max())} does not fit in {bits} bits")
    shifts = np.arange(bits - 1, -1, -1, dtype=np.uint64)
    bit_matrix = ((indices[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bit_matrix.ravel()).tobytes()


def unpack_indices(data: bytes, count: int, bits: int) -> np.ndarray:
    expected = (count * bits + 7) // 8
    if len(data) != expected:
        raise DataError(f"Packed index stream has {len(data)} bytes, expected {expected}")
    bit_stream = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[: count * bits]
    weights = (1 << np.arange(bits - 1, -1, -1)).astype(np.int64)
    return bit_stream.reshape(count, bits).astype(np.int64) @ weights


def codebook_to_payload(codebook: Codebook, indices) -> bytes:
    """d, m, block count, index width; codebook doubles; packed indices."""
    indices = np.asarray(indices, dtype=np.int64)
    bits = index_bits(codebook.m)
    header = _HEADER.pack(codebook.d, codebook.m, indices.size, bits)
    return header + codebook.weights.astype("<f8").tobytes() + pack_indices(indices, bits)


def codebook_from_payload(payload: bytes) -> Tuple[Codebook, np.ndarray]:
    if len(payload) < _HEADER.size:
        raise DataError("VQ payload is truncated")
    d, m, count, bits = _HEADER.unpack_from(payload)
    if bits != index_bits(m):
        raise DataError(f"VQ payload index width {bits} does not match m={m}")
    book_end = _HEADER.size + 8 * d * m
    if len(payload) < book_end:
        raise DataError("VQ payload is truncated")
    weights = np.frombuffer(payload, dtype="<f8", count=d * m, offset=_HEADER.size).reshape(m, d)
    indices = unpack_indices(payload[book_end:], count, bits)
    if indices.size and int(indices.max()) >= m:
        raise DataError("VQ payload references a codeword outside the codebook")
    return Codebook(weights.astype(np.float64)), indices
