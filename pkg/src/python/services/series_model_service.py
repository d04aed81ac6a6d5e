"""
Hertz reconstruction of a one-step map x_{t+1} = g(x_t).

The state space is split recursively into variance-minimizing blocks, each block
gets a Gaussian characteristic function, and g is approximated by a blend of
per-block constant or linear pieces fitted by gradient descent or Monte Carlo.
All functions work in model space (0,1); `rescale_series` maps data in and out.
"""
import struct
from typing import Callable, List, Optional, Tuple

import numpy as np

from models.errors import DataError, DimensionMismatchError, DivergenceError, SeriesTooShortError
from models.time_series import (
    Block,
    FitHistory,
    ModelMode,
    Partition,
    PiecewiseModel,
    TimeSeries,
    TrainConfig,
)
from services.ifs_service import acceptance_probability
from utils.logger import get_logger, log_execution
from utils.rng import make_rng

logger = get_logger("SeriesModel")

DEFAULT_MIN_COUNT = 16
DEFAULT_SIGMA_FLOOR = 1e-8
PAYLOAD_KIND_HERTZ = 0

_HEADER = struct.Struct("<BBIdd")


def logistic_map(x):
    return 4.0 * x * (1.0 - x)


def logistic_orbit(n: int, x0: float = 0.3141592653589793, burn_in: int = 100) -> np.ndarray:
    """Orbit of g(x) = 4x(1-x), kept strictly inside (0,1)."""
    if n < 1:
        raise DataError(f"Orbit length must be >= 1, got {n}")
    if not 0.0 < x0 < 1.0:
        raise DataError(f"x0 must lie in (0,1), got {x0}")
    eps = 1e-12
    x = x0
    for _ in range(burn_in):
        x = min(max(logistic_map(x), eps), 1.0 - eps)
    orbit = np.empty(n, dtype=np.float64)
    for i in range(n):
        orbit[i] = x
        x = min(max(logistic_map(x), eps), 1.0 - eps)
    return orbit


def rescale_series(values, margin: float = 0.05) -> Tuple[np.ndarray, float, float]:
    """
    Affine map of raw samples into (0,1).

    Returns (rescaled, offset, scale) with raw = offset + scale * rescaled.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise DataError("Cannot rescale an empty series")
    if not np.all(np.isfinite(values)):
        raise DataError("Series contains non-finite samples")
    low, high = float(values.min()), float(values.max())
    span = high - low
    if span == 0.0:
        offset, scale = low - 0.5, 1.0
    else:
        pad = margin * span
        offset, scale = low - pad, span + 2.0 * pad
    return (values - offset) / scale, offset, scale


def unscale(values, offset: float, scale: float) -> np.ndarray:
    return offset + scale * np.asarray(values, dtype=np.float64)


def estimate_dimension(series: TimeSeries, max_lag: Optional[int] = None) -> int:
    """
    Correlation length of the series: the smallest lag k >= 1 at which the empirical
    autocorrelation falls within 3/sqrt(n) of zero.

    A series that never decorrelates but repeats exactly (autocorrelation back at 1)
    gets its period instead; anything else, and constant input, gives 1.
    """
    values = series.values
    n = values.size
    if n < 4:
        raise SeriesTooShortError(f"Need at least 4 samples to estimate the dimension, got {n}")

    centered = values - values.mean()
    variance = float(np.dot(centered, centered)) / n
    if variance == 0.0:
        return 1

    tolerance = 3.0 / np.sqrt(n)
    max_lag = max(1, n // 2) if max_lag is None else max(1, min(max_lag, n - 1))
    autocorr = np.array(
        [np.dot(centered[:-k], centered[k:]) / ((n - k) * variance) for k in range(1, max_lag + 1)]
    )

    decorrelated = np.flatnonzero(np.abs(autocorr) <= tolerance)
    if decorrelated.size:
        return int(decorrelated[0]) + 1
    periodic = np.flatnonzero(autocorr >= 1.0 - tolerance)
    if periodic.size:
        return int(periodic[0]) + 1
    return 1


def _best_split(segment: np.ndarray, min_count: int) -> Optional[int]:
    """Left size of the admissible split minimizing var_L + var_R, or None."""
    n = segment.size
    if n < 2 * min_count:
        return None

    centered = segment - segment.mean()
    cum = np.cumsum(centered)
    cum2 = np.cumsum(centered * centered)

    left_sizes = np.arange(min_count, n - min_count + 1)
    admissible = segment[left_sizes - 1] < segment[left_sizes]
    if not np.any(admissible):
        return None

    left_sum, left_sq = cum[left_sizes - 1], cum2[left_sizes - 1]
    right_sum, right_sq = cum[-1] - left_sum, cum2[-1] - left_sq
    right_sizes = n - left_sizes
    var_left = np.maximum(left_sq / left_sizes - (left_sum / left_sizes) ** 2, 0.0)
    var_right = np.maximum(right_sq / right_sizes - (right_sum / right_sizes) ** 2, 0.0)

    cost = np.where(admissible, var_left + var_right, np.inf)
    # argmin keeps the first minimum, i.e. the smallest threshold
    return int(left_sizes[int(np.argmin(cost))])


def split_cost(data: np.ndarray, threshold: float) -> float:
    """var_L + var_R of the two sides of `threshold` (population variances)."""
    data = np.asarray(data, dtype=np.float64)
    left, right = data[data < threshold], data[data >= threshold]
    return float(left.var() + right.var())


def _make_block(members: np.ndarray, lower: float, upper: float, sigma_floor: float) -> Block:
    mean = float(np.mean(members))
    variance = float(np.mean((members - mean) ** 2))
    return Block(
        lower=lower,
        upper=upper,
        count=int(members.size),
        mean=mean,
        variance=max(variance, sigma_floor),
    )


@log_execution(start_msg="Building Partition", end_msg="Partition Built")
def build_partition(
    data,
    min_count: int = DEFAULT_MIN_COUNT,
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
) -> Partition:
    """
    Recursive binary splitting of sorted data into variance-minimizing blocks.

    Each split threshold is a midpoint between consecutive distinct values chosen to
    minimize var_L + var_R with at least `min_count` points on both sides; recursion
    stops when no admissible split is left.

    The outer blocks are widened to cover at least [0, 1]: the first lower bound is
    min(0, data[0]) and the last upper bound max(1, data[-1]). `Partition.assign`
    relies on this to give out-of-range x to the outer blocks.

    Raises:
        DataError: unsorted data, min_count < 2 or fewer than min_count points
    """
    data = np.asarray(data, dtype=np.float64).ravel()
    if min_count < 2:
        raise DataError(f"min_count must be >= 2, got {min_count}")
    if data.size < min_count:
        raise DataError(f"Need at least min_count={min_count} data points, got {data.size}")
    if not np.all(np.isfinite(data)):
        raise DataError("Partition data contains non-finite values")
    if np.any(np.diff(data) < 0):
        raise DataError("Partition data must be sorted ascending")

    pending = [(0, data.size)]
    finished: List[Tuple[int, int]] = []
    while pending:
        start, end = pending.pop()
        cut = _best_split(data[start:end], min_count)
        if cut is None:
            finished.append((start, end))
        else:
            pending.append((start + cut, end))
            pending.append((start, start + cut))
    finished.sort()

    lower_bound = min(0.0, float(data[0]))
    upper_bound = max(1.0, float(data[-1]))
    blocks = []
    for index, (start, end) in enumerate(finished):
        lower = lower_bound if index == 0 else 0.5 * (data[start - 1] + data[start])
        upper = upper_bound if index == len(finished) - 1 else 0.5 * (data[end - 1] + data[end])
        blocks.append(_make_block(data[start:end], float(lower), float(upper), sigma_floor))

    logger.info(f"Partition of {data.size} points into {len(blocks)} blocks (min_count={min_count})")
    return Partition(tuple(blocks))


def partition_series(
    series: TimeSeries,
    min_count: int = DEFAULT_MIN_COUNT,
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
) -> Partition:
    """Partition built from the map arguments x_1..x_{N-1} of a series."""
    if len(series) < 2:
        raise SeriesTooShortError("Need at least 2 samples to partition a series")
    return build_partition(np.sort(series.inputs), min_count, sigma_floor)


def membership_matrix(xs, partition: Partition) -> np.ndarray:
    """Row i holds P_α(x_i) = f_α(x_i) / Σ_β f_β(x_i) for every block α."""
    if len(partition) == 0:
        raise DataError("Partition has no blocks")
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    means, variances = partition.means, partition.variances
    exponents = -((xs[:, None] - means[None, :]) ** 2) / (2.0 * variances[None, :])
    exponents -= exponents.max(axis=1, keepdims=True)
    weights = np.exp(exponents)
    return weights / weights.sum(axis=1, keepdims=True)


def membership(x: float, partition: Partition) -> np.ndarray:
    """Probability vector of x over the partition blocks."""
    return membership_matrix([x], partition)[0]


def design_matrix(partition: Partition, mode: ModelMode, xs) -> np.ndarray:
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    probs = membership_matrix(xs, partition)
    if mode == "linear":
        return np.hstack([probs, probs * xs[:, None]])
    return probs


def eval_model(model: PiecewiseModel, x):
    """f(x) = Σ f^α P_α(x), or Σ (a^α + b^α x) P_α(x) in linear mode; x in model space."""
    scalar = np.ndim(x) == 0
    values = design_matrix(model.partition, model.mode, x) @ model.coeffs
    return float(values[0]) if scalar else values


def _require_pairs(series: TimeSeries) -> None:
    if len(series) < 2:
        raise SeriesTooShortError(f"Need at least 2 samples, got {len(series)}")


def training_error(model: PiecewiseModel, series: TimeSeries) -> float:
    """E = Σ_i (x_{i+1} - f(x_i))^2."""
    _require_pairs(series)
    residual = series.targets - eval_model(model, series.inputs)
    return float(np.dot(residual, residual))


def error_gradient(model: PiecewiseModel, series: TimeSeries) -> np.ndarray:
    """Analytic ∂E/∂coeffs, laid out like `model.coeffs`."""
    _require_pairs(series)
    phi = design_matrix(model.partition, model.mode, series.inputs)
    residual = series.targets - phi @ model.coeffs
    return -2.0 * (phi.T @ residual)


def relative_deviation(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| / max(|a|, |n|, 1) over components."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / scale))


def check_gradient(model: PiecewiseModel, series: TimeSeries, step: float = 1e-6) -> float:
    """Max relative deviation between the analytic gradient and central differences."""
    analytic = error_gradient(model, series)
    numeric = np.empty_like(analytic)
    base = model.coeffs.copy()
    for j in range(base.size):
        up, down = base.copy(), base.copy()
        up[j] += step
        down[j] -= step
        numeric[j] = (
            training_error(model.with_coeffs(up), series) - training_error(model.with_coeffs(down), series)
        ) / (2.0 * step)
    return relative_deviation(analytic, numeric)


def curvature_bound(phi: np.ndarray) -> float:
    """Gershgorin upper bound on the largest eigenvalue of the Hessian 2·ΦᵀΦ."""
    magnitude = np.abs(phi)
    bound = float(np.max(magnitude.T @ magnitude.sum(axis=1))) if phi.size else 0.0
    return 2.0 * bound if bound > 0 else 1.0


def stability_bound(cfg: TrainConfig, phi: np.ndarray) -> float:
    """Largest eta0 for which plain gradient descent is guaranteed to be monotone."""
    return 2.0 if cfg.auto_scale else 2.0 / curvature_bound(phi)


def _fit_gradient(phi, targets, coeffs, cfg: TrainConfig, history: FitHistory) -> np.ndarray:
    scale = 1.0 / curvature_bound(phi) if cfg.auto_scale else 1.0
    best, best_error = coeffs.copy(), np.inf
    previous = np.inf
    for k in range(cfg.max_iters + 1):
        residual = targets - phi @ coeffs
        error = float(np.dot(residual, residual))
        if not np.isfinite(error):
            raise DivergenceError(f"Training error became non-finite at iteration {k}; lower eta0")
        history.errors.append(error)
        if error < best_error:
            best, best_error = coeffs.copy(), error
        if k == cfg.max_iters or (np.isfinite(previous) and previous - error <= cfg.tol * previous):
            break
        previous = error
        if cfg.log_every and k % cfg.log_every == 0:
            logger.debug(f"gradient iteration {k}: E={error:.6e}")
        coeffs = coeffs + (cfg.eta(k) * scale * 2.0) * (phi.T @ residual)
    return best


def _fit_monte_carlo(phi, targets, coeffs, cfg: TrainConfig, history: FitHistory) -> np.ndarray:
    rng = make_rng(cfg.seed)
    column_norms = np.einsum("ij,ij->j", phi, phi)
    residual = targets - phi @ coeffs
    error = float(np.dot(residual, residual))
    best, best_error = coeffs.copy(), error
    history.errors.append(error)

    for k in range(cfg.max_iters):
        j = int(rng.integers(coeffs.size))
        delta = float(rng.normal(0.0, cfg.mc_step))
        change = -2.0 * delta * float(np.dot(phi[:, j], residual)) + delta * delta * column_norms[j]
        if rng.random() < acceptance_probability(change, cfg.beta(k)):
            coeffs[j] += delta
            residual -= delta * phi[:, j]
            error += change
            if error < best_error:
                best, best_error = coeffs.copy(), error
        if (k + 1) % 1000 == 0:
            # resynchronize the incremental residual
            residual = targets - phi @ coeffs
            error = float(np.dot(residual, residual))
            if not np.isfinite(error):
                raise DivergenceError(f"Training error became non-finite at step {k}")
        history.errors.append(error)
    return best


@log_execution(level="INFO", start_msg="Fitting Piecewise Model", end_msg="Piecewise Model Fitted")
def fit(
    series: TimeSeries,
    partition: Partition,
    cfg: TrainConfig,
    mode: ModelMode = "constant",
    init: Optional[np.ndarray] = None,
    history: Optional[FitHistory] = None,
) -> PiecewiseModel:
    """
    Fit the per-block coefficients to minimize the one-step training error.

    The returned model never has a larger training error than the initial one
    (zeros unless `init` is given). Identical inputs and seed give identical models.

    Raises:
        SeriesTooShortError: fewer than 2 samples
        DimensionMismatchError: `init` has the wrong length
        DivergenceError: the error became non-finite
    """
    _require_pairs(series)
    count = PiecewiseModel.coefficient_count(len(partition), mode)
    if init is None:
        coeffs = np.zeros(count, dtype=np.float64)
    else:
        coeffs = np.array(init, dtype=np.float64).ravel()
        if coeffs.size != count:
            raise DimensionMismatchError(f"init needs {count} coefficients, got {coeffs.size}")

    history = history if history is not None else FitHistory()
    phi = design_matrix(partition, mode, series.inputs)
    targets = np.asarray(series.targets, dtype=np.float64)
    initial_error = float(np.sum((targets - phi @ coeffs) ** 2))

    if cfg.method == "gradient":
        fitted = _fit_gradient(phi, targets, coeffs.copy(), cfg, history)
    else:
        fitted = _fit_monte_carlo(phi, targets, coeffs.copy(), cfg, history)

    final_error = float(np.sum((targets - phi @ fitted) ** 2))
    if not final_error <= initial_error:
        fitted, final_error = coeffs, initial_error
    logger.info(f"{cfg.method} fit ({mode}, {len(partition)} blocks): E {initial_error:.6e} -> {final_error:.6e}")
    return PiecewiseModel(partition, mode, fitted)


def sup_error(model: PiecewiseModel, g: Callable, grid) -> float:
    grid = np.asarray(grid, dtype=np.float64)
    return float(np.max(np.abs(eval_model(model, grid) - g(grid))))


def predict_next(model: PiecewiseModel, values) -> np.ndarray:
    """One-step predictions in data space for every raw sample."""
    scaled = (np.asarray(values, dtype=np.float64) - model.offset) / model.scale
    return unscale(eval_model(model, np.atleast_1d(scaled)), model.offset, model.scale)


def predict(model: PiecewiseModel, x0: float, steps: int) -> np.ndarray:
    """Iterate the fitted map from a raw starting value; returns `steps` raw predictions."""
    if steps < 0:
        raise DataError(f"steps must be >= 0, got {steps}")
    x = (float(x0) - model.offset) / model.scale
    orbit = np.empty(steps, dtype=np.float64)
    for i in range(steps):
        x = eval_model(model, x)
        orbit[i] = x
    return unscale(orbit, model.offset, model.scale)


def model_to_payload(model: PiecewiseModel) -> bytes:
    """Kind byte, mode, block count, offset, scale; block table; coefficients (all little-endian)."""
    blocks = model.partition.blocks
    header = _HEADER.pack(
        PAYLOAD_KIND_HERTZ, 1 if model.mode == "linear" else 0, len(blocks), model.offset, model.scale
    )
    table = np.array([[b.lower, b.upper, b.mean, b.variance] for b in blocks], dtype="<f8")
    counts = np.array([b.count for b in blocks], dtype="<u4")
    return header + table.tobytes() + counts.tobytes() + model.coeffs.astype("<f8").tobytes()


def model_from_payload(payload: bytes) -> PiecewiseModel:
    if len(payload) < _HEADER.size:
        raise DataError("Series model payload is truncated")
    kind, mode_flag, count, offset, scale = _HEADER.unpack_from(payload)
    if kind != PAYLOAD_KIND_HERTZ:
        raise DataError(f"Payload kind {kind} is not a piecewise series model")
    mode: ModelMode = "linear" if mode_flag else "constant"
    n_coeffs = PiecewiseModel.coefficient_count(count, mode)
    expected = _HEADER.size + count * 4 * 8 + count * 4 + n_coeffs * 8
    if len(payload) != expected:
        raise DataError(f"Series model payload has {len(payload)} bytes, expected {expected}")

    pos = _HEADER.size
    table = np.frombuffer(payload, dtype="<f8", count=count * 4, offset=pos).reshape(count, 4)
    pos += count * 4 * 8
    counts = np.frombuffer(payload, dtype="<u4", count=count, offset=pos)
    pos += count * 4
    coeffs = np.frombuffer(payload, dtype="<f8", count=n_coeffs, offset=pos)

    blocks = tuple(
        Block(lower=float(r[0]), upper=float(r[1]), count=int(c), mean=float(r[2]), variance=float(r[3]))
        for r, c in zip(table, counts)
    )
    return PiecewiseModel(Partition(blocks), mode, coeffs.astype(np.float64), offset, scale)
