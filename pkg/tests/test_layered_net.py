import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from models.errors import DataError, DimensionMismatchError, SeriesTooShortError
from models.layer_weights import LayerWeights
from models.time_series import FitHistory, TimeSeries, TrainConfig
from services import layered_net_service as net
from services.series_model_service import logistic_map


def _direct_forward(w1, w2, x, lam1=1.0, lam2=1.0):
    z = [1.0 / (1.0 + math.exp(-lam1 * sum(w1[i][j] * x[j] for j in range(len(x))))) for i in range(len(w1))]
    y = [1.0 / (1.0 + math.exp(-lam2 * sum(w2[i][j] * z[j] for j in range(len(z))))) for i in range(len(w2))]
    return z, y


class TestSigmoid:
    def test_closed_forms(self):
        assert net.sigmoid(0.0, 3.7) == 0.5
        assert net.sigmoid(math.log(3.0)) == pytest.approx(0.75, abs=1e-15)
        assert net.sigmoid(-math.log(3.0)) == pytest.approx(0.25, abs=1e-15)

    def test_saturates_without_overflow(self):
        values = net.sigmoid(np.array([-1e6, -50.0, 0.0, 50.0, 1e6]))
        assert np.all(np.isfinite(values))
        assert np.all(np.diff(values) >= 0)
        assert values[0] >= 0.0 and values[-1] <= 1.0

    def test_steepness_must_be_positive(self):
        with pytest.raises(DataError):
            net.sigmoid(0.3, 0.0)


class TestForward:
    def test_zero_weights(self):
        z, y = net.forward(net.zero_weights(3, 5, 2), [0.2, 0.9, 0.4])
        assert np.all(z == 0.5)
        assert np.all(y == 0.5)

    def test_scalar_net(self):
        weights = LayerWeights([[1.0]], [[1.0]])
        z, y = net.forward(weights, [0.0])
        assert z[0] == 0.5
        assert y[0] == pytest.approx(1.0 / (1.0 + math.exp(-0.5)), abs=1e-15)

    def test_matches_direct_summation(self, rng):
        weights = LayerWeights(rng.normal(size=(8, 4)), rng.normal(size=(4, 8)), 1.3, 0.7)
        x = rng.random(4)
        z, y = net.forward(weights, x)
        z_ref, y_ref = _direct_forward(weights.w1, weights.w2, x, 1.3, 0.7)
        np.testing.assert_allclose(z, z_ref, rtol=0, atol=1e-12)
        np.testing.assert_allclose(y, y_ref, rtol=0, atol=1e-12)

    def test_bias_appends_constant_input(self, rng):
        weights = net.init_weights(2, 3, 2, seed=5, bias=True)
        x = rng.random(2)
        z, y = net.forward(weights, x)
        z_ref = net.sigmoid(weights.w1 @ np.append(x, 1.0))
        y_ref = net.sigmoid(weights.w2 @ np.append(z_ref, 1.0))
        np.testing.assert_allclose(z, z_ref, atol=1e-15)
        np.testing.assert_allclose(y, y_ref, atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            net.forward(net.zero_weights(3, 2, 3), [0.1, 0.2])

    def test_outputs_inside_unit_interval(self, rng):
        weights = net.init_weights(3, 6, 3, seed=1)
        _, y = net.forward_batch(weights, rng.normal(size=(50, 3)))
        assert np.all((y > 0.0) & (y < 1.0))


class TestCost:
    def test_single_scalar_pair(self):
        series = np.array([[0.3], [1.0]])
        assert net.series_cost(net.zero_weights(1, 4, 1), series) == pytest.approx(0.25)

    def test_zero_when_outputs_match(self):
        series = np.full((10, 2), 0.5)
        assert net.series_cost(net.zero_weights(2, 3, 2), series) == 0.0

    def test_matches_resummation(self, rng):
        weights = net.init_weights(2, 5, 2, seed=3)
        vectors = rng.random((30, 2))
        expected = 0.0
        for k in range(len(vectors) - 1):
            _, y = _direct_forward(weights.w1, weights.w2, vectors[k])
            expected += sum((vectors[k + 1][l] - y[l]) ** 2 for l in range(2))
        assert net.series_cost(weights, vectors) == pytest.approx(expected, rel=1e-10)

    def test_vectorized_series(self):
        series = TimeSeries(np.linspace(0.1, 0.9, 9), dim=2)
        inputs, targets = net.series_pairs(series)
        assert inputs.shape == (3, 2)
        np.testing.assert_allclose(targets[0], [0.3, 0.4])

    def test_too_short(self):
        with pytest.raises(SeriesTooShortError):
            net.series_cost(net.zero_weights(2, 2, 2), np.array([[0.1, 0.2]]))


class TestGradient:
    def test_small_net(self, rng):
        weights = net.init_weights(2, 4, 2, seed=11)
        inputs, targets = rng.random((12, 2)), rng.random((12, 2))
        assert net.check_gradient(weights, inputs, targets) < 1e-5

    @settings(max_examples=100, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        in_dim=st.integers(min_value=1, max_value=3),
        hidden=st.integers(min_value=1, max_value=4),
        bias=st.booleans(),
    )
    def test_random_configurations(self, seed, in_dim, hidden, bias):
        rng = np.random.default_rng(seed)
        weights = net.init_weights(in_dim, hidden, in_dim, seed=seed, bias=bias)
        inputs, targets = rng.random((6, in_dim)), rng.random((6, in_dim))
        assert net.check_gradient(weights, inputs, targets) < 1e-5


class TestTraining:
    def test_already_optimal_weights_unchanged(self):
        weights = net.zero_weights(1, 4, 1)
        series = np.full((20, 1), 0.5)
        trained = net.train(weights, series, TrainConfig(max_iters=50))
        assert trained == weights

    def test_relative_tolerance_still_trains(self, logistic_values):
        series = logistic_values[:300, None]
        weights = net.init_weights(1, 6, 1, seed=2, bias=True)
        history = FitHistory()
        trained = net.train(weights, series, TrainConfig(eta0=0.5, max_iters=400, tol=1e-9), history)
        assert len(history.errors) > 1
        assert trained != weights
        assert net.series_cost(trained, series) < net.series_cost(weights, series)

    @pytest.mark.parametrize("method", ["gradient", "monte_carlo"])
    def test_cost_decreases(self, logistic_values, method):
        series = logistic_values[:300, None]
        weights = net.init_weights(1, 6, 1, seed=2, bias=True)
        cfg = TrainConfig(method=method, max_iters=400, seed=4, mc_step=0.2)
        trained = net.train(weights, series, cfg)
        assert net.series_cost(trained, series) < net.series_cost(weights, series)

    def test_annealing_best_cost_non_increasing(self, logistic_values):
        series = logistic_values[:200, None]
        history = FitHistory()
        net.train(net.init_weights(1, 4, 1, seed=8), series,
                  TrainConfig(method="monte_carlo", max_iters=300, seed=1), history)
        assert all(b <= a for a, b in zip(history.errors, history.errors[1:]))

    def test_deterministic_by_seed(self, logistic_values):
        series = logistic_values[:200, None]
        cfg = TrainConfig(method="monte_carlo", max_iters=200, seed=21)
        first = net.train(net.init_weights(1, 4, 1, seed=3), series, cfg)
        second = net.train(net.init_weights(1, 4, 1, seed=3), series, cfg)
        assert first == second

    @pytest.mark.slow
    def test_logistic_map_is_learned(self, logistic_values):
        series = logistic_values[:, None]
        weights = net.init_weights(1, 16, 1, seed=0, bias=True)
        cfg = TrainConfig(eta0=2.0, decay_tau=1e5, max_iters=100_000)
        trained = net.train(weights, series, cfg)
        grid = np.linspace(0.0, 1.0, 1000)
        _, y = net.forward_batch(trained, grid[:, None])
        assert np.max(np.abs(y[:, 0] - logistic_map(grid))) < 0.08


class TestPayload:
    def test_round_trip_with_scaling(self):
        weights = net.init_weights(3, 4, 3, seed=6, lambda1=1.5, lambda2=0.5, bias=True)
        restored, offset, scale = net.weights_from_payload(net.weights_to_payload(weights, -2.0, 8.0))
        assert restored == weights
        assert (offset, scale) == (-2.0, 8.0)

    def test_wrong_kind(self):
        payload = bytearray(net.weights_to_payload(net.zero_weights(1, 1, 1)))
        payload[0] = 0
        with pytest.raises(DataError):
            net.weights_from_payload(bytes(payload))

    def test_truncated(self):
        with pytest.raises(DataError):
            net.weights_from_payload(net.weights_to_payload(net.zero_weights(2, 2, 2))[:-1])
