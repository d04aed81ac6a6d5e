"""
Three-layer feed-forward network with sigmoid units, trained on squared error by
backpropagation or by annealed Monte Carlo. Shared by series prediction and the
block autoencoder.
"""
import struct
from typing import Optional, Tuple, Union

import numpy as np

from models.errors import DataError, DimensionMismatchError, DivergenceError, SeriesTooShortError
from models.layer_weights import LayerWeights
from models.time_series import FitHistory, TimeSeries, TrainConfig
from services.ifs_service import acceptance_probability
from utils.logger import get_logger, log_execution
from utils.rng import make_rng

logger = get_logger("LayeredNet")

PAYLOAD_KIND_NET = 1
INIT_RANGE = 0.5

_HEADER = struct.Struct("<BBIIIdd")


def sigmoid(x, lam: float = 1.0):
    """σ(x) = 1 / (1 + e^{-λx}), saturating without overflow."""
    if not lam > 0:
        raise DataError(f"Sigmoid steepness must be > 0, got {lam}")
    t = lam * np.asarray(x, dtype=np.float64)
    flat = np.atleast_1d(t)
    out = np.empty_like(flat)
    positive = flat >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-flat[positive]))
    exp_t = np.exp(flat[~positive])
    out[~positive] = exp_t / (1.0 + exp_t)
    return float(out[0]) if t.ndim == 0 else out.reshape(t.shape)


def init_weights(
    in_dim: int,
    hidden: int,
    out_dim: int,
    seed: int,
    lambda1: float = 1.0,
    lambda2: float = 1.0,
    bias: bool = False,
) -> LayerWeights:
    """Uniform weights in [-0.5, 0.5] from the seeded generator."""
    if min(in_dim, hidden, out_dim) < 1:
        raise DataError(f"Layer sizes must be >= 1, got {in_dim}x{hidden}x{out_dim}")
    rng = make_rng(seed)
    extra = 1 if bias else 0
    w1 = rng.uniform(-INIT_RANGE, INIT_RANGE, size=(hidden, in_dim + extra))
    w2 = rng.uniform(-INIT_RANGE, INIT_RANGE, size=(out_dim, hidden + extra))
    return LayerWeights(w1, w2, lambda1, lambda2, bias)


def zero_weights(in_dim: int, hidden: int, out_dim: int, bias: bool = False) -> LayerWeights:
    extra = 1 if bias else 0
    return LayerWeights(np.zeros((hidden, in_dim + extra)), np.zeros((out_dim, hidden + extra)), bias=bias)


def _augment(values: np.ndarray, bias: bool) -> np.ndarray:
    if not bias:
        return values
    return np.hstack([values, np.ones((values.shape[0], 1))])


def forward_batch(weights: LayerWeights, inputs) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise forward pass over an (n, d) batch; returns (hidden z, output y)."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if inputs.shape[1] != weights.in_dim:
        raise DimensionMismatchError(f"Network expects {weights.in_dim} inputs, got {inputs.shape[1]}")
    z = sigmoid(_augment(inputs, weights.bias) @ weights.w1.T, weights.lambda1)
    y = sigmoid(_augment(z, weights.bias) @ weights.w2.T, weights.lambda2)
    return z, y


def forward(weights: LayerWeights, x) -> Tuple[np.ndarray, np.ndarray]:
    """z_i = σ₁(Σ_j W¹_ij x_j), y_i = σ₂(Σ_j W²_ij z_j) for one input vector."""
    x = np.asarray(x, dtype=np.float64).ravel()
    z, y = forward_batch(weights, x[None, :])
    return z[0], y[0]


def pair_cost(weights: LayerWeights, inputs, targets) -> float:
    """Σ over pairs and components of (target - y(input))^2."""
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    _, y = forward_batch(weights, inputs)
    if y.shape != targets.shape:
        raise DimensionMismatchError(f"Targets have shape {targets.shape}, outputs {y.shape}")
    residual = targets - y
    return float(np.sum(residual * residual))


def pair_gradient(weights: LayerWeights, inputs, targets) -> Tuple[np.ndarray, np.ndarray]:
    """Backpropagated (∂E/∂W¹, ∂E/∂W²) of `pair_cost`."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    z, y = forward_batch(weights, inputs)
    if y.shape != targets.shape:
        raise DimensionMismatchError(f"Targets have shape {targets.shape}, outputs {y.shape}")

    x_aug, z_aug = _augment(inputs, weights.bias), _augment(z, weights.bias)
    delta_out = -2.0 * (targets - y) * weights.lambda2 * y * (1.0 - y)
    grad_w2 = delta_out.T @ z_aug
    back = delta_out @ weights.w2
    if weights.bias:
        back = back[:, :-1]
    delta_hidden = back * weights.lambda1 * z * (1.0 - z)
    grad_w1 = delta_hidden.T @ x_aug
    return grad_w1, grad_w2


def series_pairs(series: Union[TimeSeries, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Consecutive disjoint d-vectors (x^k, x^{k+1})."""
    vectors = series.vectors() if isinstance(series, TimeSeries) else np.atleast_2d(np.asarray(series, dtype=np.float64))
    if vectors.shape[0] < 2:
        raise SeriesTooShortError(f"Need at least 2 vectors, got {vectors.shape[0]}")
    return vectors[:-1], vectors[1:]


def series_cost(weights: LayerWeights, series: Union[TimeSeries, np.ndarray]) -> float:
    """E = Σ_k Σ_l (x_l^{k+1} - y_l(x^k))^2."""
    inputs, targets = series_pairs(series)
    return pair_cost(weights, inputs, targets)


def check_gradient(weights: LayerWeights, inputs, targets, step: float = 1e-6) -> float:
    """Max relative deviation of backprop from central differences, |a-n| / max(|a|, |n|, 1)."""
    grad_w1, grad_w2 = pair_gradient(weights, inputs, targets)
    analytic = np.concatenate([grad_w1.ravel(), grad_w2.ravel()])
    base = weights.flat()
    numeric = np.empty_like(base)
    for j in range(base.size):
        up, down = base.copy(), base.copy()
        up[j] += step
        down[j] -= step
        numeric[j] = (
            pair_cost(weights.with_flat(up), inputs, targets) - pair_cost(weights.with_flat(down), inputs, targets)
        ) / (2.0 * step)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / scale))


def _train_gradient(weights, inputs, targets, cfg: TrainConfig, history: FitHistory) -> LayerWeights:
    # auto_scale descends on the mean error per pair so eta0 does not depend on the data size
    scale = 1.0 / inputs.shape[0] if cfg.auto_scale else 1.0
    best, best_cost = weights, np.inf
    previous = np.inf
    for k in range(cfg.max_iters + 1):
        cost = pair_cost(weights, inputs, targets)
        if not np.isfinite(cost):
            raise DivergenceError(f"Network cost became non-finite at iteration {k}; lower eta0")
        history.errors.append(cost)
        if cost < best_cost:
            best, best_cost = weights, cost
        if k == cfg.max_iters or (np.isfinite(previous) and previous - cost <= cfg.tol * previous):
            break
        previous = cost
        if cfg.log_every and k % cfg.log_every == 0:
            logger.debug(f"backprop iteration {k}: E={cost:.6e}")
        grad_w1, grad_w2 = pair_gradient(weights, inputs, targets)
        step = cfg.eta(k) * scale
        try:
            weights = LayerWeights(
                weights.w1 - step * grad_w1,
                weights.w2 - step * grad_w2,
                weights.lambda1,
                weights.lambda2,
                weights.bias,
            )
        except DataError:
            raise DivergenceError(f"Weights became non-finite at iteration {k}; lower eta0") from None
    return best


def _train_annealing(weights, inputs, targets, cfg: TrainConfig, history: FitHistory) -> LayerWeights:
    rng = make_rng(cfg.seed)
    current = weights.flat()
    cost = pair_cost(weights, inputs, targets)
    best, best_cost = current.copy(), cost
    history.errors.append(best_cost)
    for k in range(cfg.max_iters):
        j = int(rng.integers(current.size))
        delta = float(rng.normal(0.0, cfg.mc_step))
        proposal = current.copy()
        proposal[j] += delta
        proposal_cost = pair_cost(weights.with_flat(proposal), inputs, targets)
        if not np.isfinite(proposal_cost):
            raise DivergenceError(f"Network cost became non-finite at step {k}")
        if rng.random() < acceptance_probability(proposal_cost - cost, cfg.beta(k)):
            current, cost = proposal, proposal_cost
            if cost < best_cost:
                best, best_cost = current.copy(), cost
        history.errors.append(best_cost)
    return weights.with_flat(best)


@log_execution(level="INFO", start_msg="Network Training Started", end_msg="Network Training Finished")
def train_pairs(
    weights: LayerWeights,
    inputs,
    targets,
    cfg: TrainConfig,
    history: Optional[FitHistory] = None,
) -> LayerWeights:
    """
    Minimize `pair_cost` from the given weights.

    Gradient mode takes Δw = -η(k) ∂E/∂w; monte_carlo mode anneals single-weight
    Gaussian perturbations with the Glauber rule. The result never costs more than
    the starting weights and is a pure function of the inputs and cfg.seed.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    history = history if history is not None else FitHistory()
    initial_cost = pair_cost(weights, inputs, targets)

    if cfg.method == "gradient":
        trained = _train_gradient(weights, inputs, targets, cfg, history)
    else:
        trained = _train_annealing(weights, inputs, targets, cfg, history)

    final_cost = pair_cost(trained, inputs, targets)
    if not final_cost <= initial_cost:
        trained, final_cost = weights, initial_cost
    logger.info(
        f"{cfg.method} training {weights.in_dim}x{weights.hidden}x{weights.out_dim}: "
        f"E {initial_cost:.6e} -> {final_cost:.6e}"
    )
    return trained


def train(
    weights: LayerWeights,
    series: Union[TimeSeries, np.ndarray],
    cfg: TrainConfig,
    history: Optional[FitHistory] = None,
) -> LayerWeights:
    """Train next-vector prediction x^k -> x^{k+1} on a vectorized series."""
    inputs, targets = series_pairs(series)
    return train_pairs(weights, inputs, targets, cfg, history)


def predict_series(weights: LayerWeights, series: Union[TimeSeries, np.ndarray]) -> np.ndarray:
    """One-step-ahead predictions for every vector of the series."""
    vectors = series.vectors() if isinstance(series, TimeSeries) else np.atleast_2d(np.asarray(series, dtype=np.float64))
    return forward_batch(weights, vectors)[1]


def weights_to_payload(weights: LayerWeights, offset: float = 0.0, scale: float = 1.0) -> bytes:
    """Kind, bias flag, dimensions, lambdas, then row-major W¹ and W² as little-endian doubles."""
    header = _HEADER.pack(
        PAYLOAD_KIND_NET,
        1 if weights.bias else 0,
        weights.in_dim,
        weights.hidden,
        weights.out_dim,
        weights.lambda1,
        weights.lambda2,
    )
    scaling = struct.pack("<dd", offset, scale)
    return header + scaling + weights.w1.astype("<f8").tobytes() + weights.w2.astype("<f8").tobytes()


def weights_from_payload(payload: bytes) -> Tuple[LayerWeights, float, float]:
    """Inverse of `weights_to_payload`; returns (weights, offset, scale)."""
    fixed = _HEADER.size + 16
    if len(payload) < fixed:
        raise DataError("Network payload is truncated")
    kind, bias_flag, in_dim, hidden, out_dim, lambda1, lambda2 = _HEADER.unpack_from(payload)
    if kind != PAYLOAD_KIND_NET:
        raise DataError(f"Payload kind {kind} is not a layered network")
    offset, scale = struct.unpack_from("<dd", payload, _HEADER.size)
    extra = 1 if bias_flag else 0
    n1, n2 = hidden * (in_dim + extra), out_dim * (hidden + extra)
    if len(payload) != fixed + 8 * (n1 + n2):
        raise DataError(f"Network payload has {len(payload)} bytes, expected {fixed + 8 * (n1 + n2)}")
    w1 = np.frombuffer(payload, dtype="<f8", count=n1, offset=fixed).reshape(hidden, in_dim + extra)
    w2 = np.frombuffer(payload, dtype="<f8", count=n2, offset=fixed + 8 * n1).reshape(out_dim, hidden + extra)
    weights = LayerWeights(w1.astype(np.float64), w2.astype(np.float64), lambda1, lambda2, bool(bias_flag))
    return weights, offset, scale
