"""
Affine iterated function systems: contraction checks, attractor rendering and the
Metropolis search for coefficients whose attractor approximates a target image.
"""
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from models.binary_image import BinaryImage
from models.errors import DataError, DimensionMismatchError, NotContractiveError
from models.ifs import AffineMap, AnnealSchedule, IfsSystem, SearchResult, Viewport
from services.image_metrics import get_metric
from utils.logger import get_logger, log_execution
from utils.rng import make_rng, spawn_seeds

logger = get_logger("IfsService")

UNIT_VIEWPORT = Viewport(0.0, 0.0, 1.0, 1.0)
FERN_VIEWPORT = Viewport(-2.75, -0.25, 2.75, 10.25)
LINEAR_RANGE = (-1.0, 1.0)
RENDER_MAX_ITERATIONS = 64

_COUNT = struct.Struct("<I")


def apply_map(m: AffineMap, p: Tuple[float, float]) -> Tuple[float, float]:
    x, y = p
    return (m.a * x + m.b * y + m.c, m.d * x + m.e * y + m.f)


def apply_map_points(m: AffineMap, points: np.ndarray) -> np.ndarray:
    """Vectorized apply_map over an (n, 2) array of (x, y) points."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return points @ m.linear.T + m.translation


def contraction_factor(m: AffineMap) -> float:
    """Operator norm (largest singular value) of the linear part."""
    return float(np.linalg.norm(m.linear, ord=2))


def fixed_point(m: AffineMap) -> Tuple[float, float]:
    """Solve (I - A) p = t; contractive maps always have exactly one fixed point."""
    system = np.eye(2) - m.linear
    try:
        x, y = np.linalg.solve(system, m.translation)
    except np.linalg.LinAlgError:
        raise NotContractiveError(0, contraction_factor(m)) from None
    return float(x), float(y)


def validate_ifs(maps: Sequence[AffineMap]) -> IfsSystem:
    """
    Build an IfsSystem with s = max contraction factor.

    Raises:
        DataError: no maps given
        NotContractiveError: some map has factor >= 1
    """
    maps = tuple(maps)
    if not maps:
        raise DataError("An IFS needs at least one map")
    factors = [contraction_factor(m) for m in maps]
    for index, factor in enumerate(factors):
        if not factor < 1.0:
            raise NotContractiveError(index, factor)
    # s must be positive; a map collapsing everything to a point has factor 0
    s = max(max(factors), np.finfo(np.float64).tiny)
    return IfsSystem(maps, s)


def sierpinski_system() -> IfsSystem:
    """Three half-scale maps with fixed points at (0,0), (1,0) and (0,1) of the unit viewport."""
    return validate_ifs([
        AffineMap(0.5, 0.0, 0.0, 0.0, 0.5, 0.0),
        AffineMap(0.5, 0.0, 0.5, 0.0, 0.5, 0.0),
        AffineMap(0.5, 0.0, 0.0, 0.0, 0.5, 0.5),
    ])


def fern_system() -> IfsSystem:
    """Leaf-like fern; draw it with FERN_VIEWPORT."""
    return validate_ifs([
        AffineMap(0.0, 0.0, 0.0, 0.0, 0.16, 0.0),
        AffineMap(0.85, 0.04, 0.0, -0.04, 0.85, 1.6),
        AffineMap(0.2, -0.26, 0.0, 0.23, 0.22, 1.6),
        AffineMap(-0.15, 0.28, 0.0, 0.26, 0.24, 0.44),
    ])


REFERENCE_SYSTEMS = {
    "sierpinski": (sierpinski_system, UNIT_VIEWPORT),
    "fern": (fern_system, FERN_VIEWPORT),
}


def _as_viewport(viewport: Union[Viewport, Sequence[float], None]) -> Viewport:
    if viewport is None:
        return UNIT_VIEWPORT
    if isinstance(viewport, Viewport):
        return viewport
    return Viewport(*(float(v) for v in viewport))


def points_to_raster(points: np.ndarray, viewport: Viewport, width: int, height: int) -> np.ndarray:
    """
    Pixel mask of the points inside the closed viewport.

    Column = floor of the normalized x, row = floor of the normalized distance below
    y_max; points on the far edges land in the last column/row.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    u = (points[:, 0] - viewport.x_min) / viewport.width * width
    v = (viewport.y_max - points[:, 1]) / viewport.height * height
    inside = (u >= 0) & (u <= width) & (v >= 0) & (v <= height)
    cols = np.minimum(np.floor(u[inside]).astype(np.int64), width - 1)
    rows = np.minimum(np.floor(v[inside]).astype(np.int64), height - 1)
    mask = np.zeros((height, width), dtype=bool)
    mask[rows, cols] = True
    return mask


def raster_to_points(image: BinaryImage, viewport: Viewport) -> np.ndarray:
    """Plane coordinates of the centers of the set pixels."""
    rows, cols = np.nonzero(image.pixels)
    x = viewport.x_min + (cols + 0.5) / image.width * viewport.width
    y = viewport.y_max - (rows + 0.5) / image.height * viewport.height
    return np.column_stack([x, y])


@log_execution(start_msg="Chaos Game Started", end_msg="Chaos Game Finished")
def chaos_game(
    ifs: IfsSystem,
    iterations: int,
    burn_in: int,
    viewport: Union[Viewport, Sequence[float], None],
    width: int,
    height: int,
    seed: int,
    weights: Optional[Sequence[float]] = None,
) -> BinaryImage:
    """
    Random-iteration rendering: p <- w_i(p) with i uniform over the maps (or drawn with
    `weights`); every point visited after `burn_in` is rasterized.
    """
    if burn_in < 0 or iterations <= burn_in:
        raise DataError(f"Need iterations > burn_in >= 0, got iterations={iterations}, burn_in={burn_in}")
    if width < 1 or height < 1:
        raise DataError(f"Raster must be at least 1x1, got {width}x{height}")
    viewport = _as_viewport(viewport)
    rng = make_rng(seed)

    if weights is None:
        choices = rng.integers(ifs.k, size=iterations)
    else:
        probs = np.asarray(weights, dtype=np.float64)
        if probs.size != ifs.k or np.any(probs < 0) or probs.sum() <= 0:
            raise DataError("Map weights must be k non-negative numbers with a positive sum")
        choices = rng.choice(ifs.k, size=iterations, p=probs / probs.sum())

    coeffs = [m.coefficients() for m in ifs.maps]
    x = float(rng.uniform(viewport.x_min, viewport.x_max))
    y = float(rng.uniform(viewport.y_min, viewport.y_max))
    visited = np.empty((iterations - burn_in, 2), dtype=np.float64)
    for n, i in enumerate(choices.tolist()):
        a, b, c, d, e, f = coeffs[i]
        x, y = a * x + b * y + c, d * x + e * y + f
        if n >= burn_in:
            visited[n - burn_in, 0] = x
            visited[n - burn_in, 1] = y

    return BinaryImage(points_to_raster(visited, viewport, width, height))


def hutchinson_step(ifs: IfsSystem, image: BinaryImage, viewport: Union[Viewport, Sequence[float], None] = None) -> BinaryImage:
    """W(A) = ∪_i w_i(A) on the raster, mapping pixel centers."""
    viewport = _as_viewport(viewport)
    points = raster_to_points(image, viewport)
    mask = np.zeros(image.shape, dtype=bool)
    for m in ifs.maps:
        mask |= points_to_raster(apply_map_points(m, points), viewport, image.width, image.height)
    return BinaryImage(mask)


def deterministic_attractor(
    ifs: IfsSystem,
    start: BinaryImage,
    iterations: int,
    viewport: Union[Viewport, Sequence[float], None] = None,
) -> BinaryImage:
    """Apply the union operator `iterations` times, stopping early once the raster is fixed."""
    if iterations < 1:
        raise DataError(f"iterations must be >= 1, got {iterations}")
    viewport = _as_viewport(viewport)
    current = start
    for step in range(iterations):
        following = hutchinson_step(ifs, current, viewport)
        if following == current:
            logger.debug(f"Raster attractor fixed after {step} iterations")
            break
        current = following
    return current


def render_attractor(
    ifs: IfsSystem,
    width: int,
    height: int,
    viewport: Union[Viewport, Sequence[float], None] = None,
    max_iterations: int = RENDER_MAX_ITERATIONS,
) -> BinaryImage:
    """Seed-free rendering: iterate the union operator from the full raster."""
    return deterministic_attractor(ifs, BinaryImage.blank(width, height, fill=True), max_iterations, viewport)


def collage_bound(eps: float, s: float) -> float:
    """Collage theorem: the attractor lies within eps / (1 - s) of an image that is within eps of its collage."""
    if not 0.0 < s < 1.0:
        raise DataError(f"Contraction factor must lie in (0,1), got {s}")
    if eps < 0:
        raise DataError(f"eps must be >= 0, got {eps}")
    return eps / (1.0 - s)


def acceptance_probability(delta: float, beta: float) -> float:
    """
    Glauber transition probability 1 / (1 + e^{βΔ}).

    Evaluated so that p(Δ) + p(-Δ) == 1 exactly and p(0) == 0.5.
    """
    if not beta > 0:
        raise DataError(f"beta must be > 0, got {beta}")
    if delta == 0:
        return 0.5
    t = beta * delta
    if t > 0:
        return 1.0 / (1.0 + math.exp(t)) if t < 709.0 else 0.0
    return 1.0 - (1.0 / (1.0 + math.exp(-t)) if -t < 709.0 else 0.0)


def collage_distance(
    ifs: IfsSystem,
    target: BinaryImage,
    viewport: Union[Viewport, Sequence[float], None] = None,
    metric: str = "hamming",
) -> float:
    """d(W(L), L) for the target image L."""
    return get_metric(metric)(hutchinson_step(ifs, target, viewport), target)


def _coefficient_bounds(k: int, viewport: Viewport, step: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    lows, highs, steps = [], [], []
    for _ in range(k):
        for name in "abcdef":
            if name == "c":
                lows.append(viewport.x_min - viewport.width)
                highs.append(viewport.x_max + viewport.width)
                steps.append(step * viewport.width)
            elif name == "f":
                lows.append(viewport.y_min - viewport.height)
                highs.append(viewport.y_max + viewport.height)
                steps.append(step * viewport.height)
            else:
                lows.append(LINEAR_RANGE[0])
                highs.append(LINEAR_RANGE[1])
                steps.append(step * (LINEAR_RANGE[1] - LINEAR_RANGE[0]))
    return np.array(lows), np.array(highs), np.array(steps)


def _cold_start(k: int, viewport: Viewport, steps: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random grid coefficients with linear entries in [-0.4, 0.4] (always contractive)."""
    coeffs = np.empty(6 * k, dtype=np.float64)
    for i in range(k):
        base = 6 * i
        for j in (0, 1, 3, 4):
            coeffs[base + j] = np.round(rng.uniform(-0.4, 0.4) / steps[base + j]) * steps[base + j]
        coeffs[base + 2] = viewport.x_min + np.round(rng.uniform(0.0, viewport.width) / steps[base + 2]) * steps[base + 2]
        coeffs[base + 5] = viewport.y_min + np.round(rng.uniform(0.0, viewport.height) / steps[base + 5]) * steps[base + 5]
    return coeffs


def _coeffs_to_maps(coeffs: np.ndarray) -> List[AffineMap]:
    return [AffineMap.from_coefficients(coeffs[i:i + 6]) for i in range(0, coeffs.size, 6)]


@log_execution(level="INFO", start_msg="Inverse Search Started", end_msg="Inverse Search Finished")
def inverse_search(
    target: BinaryImage,
    k: int,
    schedule: AnnealSchedule,
    init: Union[IfsSystem, Sequence[float], None] = None,
    viewport: Union[Viewport, Sequence[float], None] = None,
    metric: str = "hamming",
) -> SearchResult:
    """
    Metropolis walk over the 6k map coefficients minimizing d(w(L), L).

    Each sweep makes 6k proposals; a proposal moves one uniformly chosen coefficient
    by ±h on its grid and is accepted with the Glauber probability of the cost change
    at the sweep's β. Proposals leaving the coefficient box or breaking contraction
    count as rejected moves. Returns the best-so-far system with the per-sweep traces
    of the current and best cost (index 0 is the starting state).
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if target.set_count == 0:
        raise DataError("Inverse search needs a non-empty target image")
    viewport = _as_viewport(viewport)
    distance = get_metric(metric)
    rng = make_rng(schedule.seed)
    lows, highs, steps = _coefficient_bounds(k, viewport, schedule.step)

    if init is None:
        coeffs = _cold_start(k, viewport, steps, rng)
    else:
        coeffs = init.coefficient_vector() if isinstance(init, IfsSystem) else np.asarray(init, dtype=np.float64).ravel().copy()
        if coeffs.size != 6 * k:
            raise DimensionMismatchError(f"init needs {6 * k} coefficients, got {coeffs.size}")
    maps = _coeffs_to_maps(coeffs)
    validate_ifs(maps)

    points = raster_to_points(target, viewport)
    width, height = target.width, target.height
    images = [points_to_raster(apply_map_points(m, points), viewport, width, height) for m in maps]
    hits = np.sum(images, axis=0, dtype=np.int64)

    def cost_of(mask: np.ndarray) -> float:
        return distance(BinaryImage(mask), target)

    cost = cost_of(hits > 0)
    best_cost, best_coeffs = cost, coeffs.copy()
    trace, best_trace = [cost], [best_cost]
    accepted = rejected = contraction_rejects = 0
    proposals_per_sweep = 6 * k

    for sweep in range(schedule.sweeps):
        beta = schedule.beta(sweep)
        for _ in range(proposals_per_sweep):
            j = int(rng.integers(6 * k))
            sign = 1.0 if rng.integers(2) else -1.0
            u = float(rng.random())
            value = coeffs[j] + sign * steps[j]
            if value < lows[j] or value > highs[j]:
                rejected += 1
                continue
            i = j // 6
            candidate_values = coeffs[6 * i:6 * i + 6].copy()
            candidate_values[j - 6 * i] = value
            candidate = AffineMap.from_coefficients(candidate_values)
            if not contraction_factor(candidate) < 1.0:
                contraction_rejects += 1
                rejected += 1
                continue
            candidate_image = points_to_raster(apply_map_points(candidate, points), viewport, width, height)
            candidate_hits = hits - images[i] + candidate_image
            candidate_cost = cost_of(candidate_hits > 0)
            if u < acceptance_probability(candidate_cost - cost, beta):
                coeffs[j] = value
                images[i] = candidate_image
                hits = candidate_hits
                cost = candidate_cost
                accepted += 1
                if cost < best_cost:
                    best_cost, best_coeffs = cost, coeffs.copy()
            else:
                rejected += 1
        trace.append(cost)
        best_trace.append(best_cost)
        if sweep % 1000 == 0:
            logger.debug(f"sweep {sweep}: beta={beta:.4g} cost={cost:.6f} best={best_cost:.6f}")

    system = validate_ifs(_coeffs_to_maps(best_coeffs))
    logger.info(
        f"Inverse search k={k} seed={schedule.seed}: best Δ={best_cost:.6f} "
        f"(accepted {accepted}, rejected {rejected}, non-contractive {contraction_rejects})"
    )
    return SearchResult(
        system=system,
        best_delta=best_cost,
        trace=np.array(trace),
        best_trace=np.array(best_trace),
        seed=schedule.seed,
        accepted=accepted,
        rejected=rejected,
        contraction_rejects=contraction_rejects,
    )


def _with_seed(schedule: AnnealSchedule, seed: int) -> AnnealSchedule:
    return AnnealSchedule(schedule.beta0, schedule.growth, schedule.sweeps, schedule.step, seed)


def multi_chain_search(
    target: BinaryImage,
    k: int,
    schedule: AnnealSchedule,
    seeds: Sequence[int],
    threads: int = 1,
    init: Union[IfsSystem, Sequence[float], None] = None,
    viewport: Union[Viewport, Sequence[float], None] = None,
    metric: str = "hamming",
) -> SearchResult:
    """Independent chains, one per seed; the lowest Δ wins, earlier seeds win ties."""
    if not seeds:
        raise DataError("multi_chain_search needs at least one seed")

    def run(seed: int) -> SearchResult:
        return inverse_search(target, k, _with_seed(schedule, seed), init, viewport, metric)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, seeds))
    best = min(range(len(results)), key=lambda n: (results[n].best_delta, n))
    return results[best]


def pad_to_blocks(image: BinaryImage, block_side: int) -> np.ndarray:
    rows = -(-image.height // block_side) * block_side
    cols = -(-image.width // block_side) * block_side
    padded = np.zeros((rows, cols), dtype=bool)
    padded[: image.height, : image.width] = image.pixels
    return padded


@log_execution(level="INFO", start_msg="Block Inverse Search Started", end_msg="Block Inverse Search Finished")
def block_inverse_search(
    image: BinaryImage,
    block_side: int,
    k: int,
    schedule: AnnealSchedule,
    threads: int = 1,
    metric: str = "hamming",
) -> List[Optional[SearchResult]]:
    """Search one IFS per block_side x block_side tile (row-major); empty tiles give None."""
    if block_side < 1:
        raise DataError(f"block_side must be >= 1, got {block_side}")
    padded = pad_to_blocks(image, block_side)
    tiles = [
        BinaryImage(padded[r:r + block_side, c:c + block_side])
        for r in range(0, padded.shape[0], block_side)
        for c in range(0, padded.shape[1], block_side)
    ]
    seeds = spawn_seeds(schedule.seed, len(tiles))

    def run(index: int) -> Optional[SearchResult]:
        tile = tiles[index]
        if tile.set_count == 0:
            return None
        return inverse_search(tile, k, _with_seed(schedule, seeds[index]), metric=metric)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(run, range(len(tiles))))


def render_blocks(
    systems: Sequence[Optional[IfsSystem]],
    block_side: int,
    width: int,
    height: int,
) -> BinaryImage:
    """Reassemble per-tile attractors and crop the padding."""
    cols = -(-width // block_side)
    rows = -(-height // block_side)
    if len(systems) != rows * cols:
        raise DimensionMismatchError(f"Expected {rows * cols} tile systems, got {len(systems)}")
    canvas = np.zeros((rows * block_side, cols * block_side), dtype=bool)
    for index, system in enumerate(systems):
        if system is None:
            continue
        r, c = divmod(index, cols)
        tile = render_attractor(system, block_side, block_side)
        canvas[r * block_side:(r + 1) * block_side, c * block_side:(c + 1) * block_side] = tile.pixels
    return BinaryImage(canvas[:height, :width])


def systems_to_payload(systems: Sequence[Optional[IfsSystem]]) -> bytes:
    """For each system: uint32 k then 6k little-endian doubles (k = 0 for an empty tile)."""
    parts = []
    for system in systems:
        if system is None:
            parts.append(_COUNT.pack(0))
        else:
            parts.append(_COUNT.pack(system.k) + system.coefficient_vector().astype("<f8").tobytes())
    return b"".join(parts)


def systems_from_payload(payload: bytes) -> List[Optional[IfsSystem]]:
    systems: List[Optional[IfsSystem]] = []
    pos = 0
    while pos < len(payload):
        if pos + _COUNT.size > len(payload):
            raise DataError("IFS payload is truncated")
        (k,) = _COUNT.unpack_from(payload, pos)
        pos += _COUNT.size
        if k == 0:
            systems.append(None)
            continue
        end = pos + 6 * k * 8
        if end > len(payload):
            raise DataError("IFS payload is truncated")
        coeffs = np.frombuffer(payload, dtype="<f8", count=6 * k, offset=pos).astype(np.float64)
        systems.append(validate_ifs(_coeffs_to_maps(coeffs)))
        pos = end
    return systems
