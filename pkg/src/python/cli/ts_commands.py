from typing import Tuple, Union

import numpy as np

from cli.common import EXIT_OK, CommandGroup
from config import Config
from models.container import Container, MethodTag
from models.errors import ContainerFormatError, DataError, SeriesTooShortError
from models.layer_weights import LayerWeights
from models.time_series import PiecewiseModel, TimeSeries, TrainConfig
from services import container_service, image_io_service, layered_net_service, series_model_service
from utils.command_registry import argument, expose_command
from utils.logger import log_execution

NetModel = Tuple[LayerWeights, float, float]


def _to_unit(values: np.ndarray) -> Tuple[np.ndarray, float, float]:
    """Series already inside (0, 1) are used as they are."""
    if TimeSeries(values).in_unit_interval():
        return values, 0.0, 1.0
    return series_model_service.rescale_series(values)


def one_step(model: Union[PiecewiseModel, NetModel], values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(predictions, actual successors) in data space."""
    if isinstance(model, PiecewiseModel):
        if values.size < 2:
            raise SeriesTooShortError("Need at least 2 samples for one-step predictions")
        return series_model_service.predict_next(model, values[:-1]), values[1:]
    weights, offset, scale = model
    vectors = TimeSeries((values - offset) / scale, weights.in_dim).vectors()
    if vectors.shape[0] < 2:
        raise SeriesTooShortError(f"Need at least 2 vectors of length {weights.in_dim}")
    predicted = layered_net_service.predict_series(weights, vectors[:-1])
    return (
        series_model_service.unscale(predicted, offset, scale).ravel(),
        series_model_service.unscale(vectors[1:], offset, scale).ravel(),
    )


def _errors(predicted: np.ndarray, actual: np.ndarray) -> dict:
    residual = predicted - actual
    return {
        "max_abs_error": float(np.max(np.abs(residual))),
        "rms_error": float(np.sqrt(np.mean(residual ** 2))),
    }


class SeriesCommands(CommandGroup):
    name = "ts"
    help = "Time-series reconstruction with the Hertz partition model or a layered network"

    def _read(self, args) -> np.ndarray:
        return image_io_service.read_csv_series(args.input, args.column, args.skip_header)

    def _fit_hertz(self, args, values: np.ndarray, cfg: TrainConfig) -> Tuple[PiecewiseModel, bytes, dict]:
        scaled, offset, scale = _to_unit(values)
        series = TimeSeries(scaled)
        partition = series_model_service.partition_series(series, args.min_count, args.sigma_floor)
        fitted = series_model_service.fit(series, partition, cfg, mode=args.mode)
        model = PiecewiseModel(partition, fitted.mode, fitted.coeffs, offset, scale)
        info = {
            "model": "hertz",
            "mode": args.mode,
            "blocks": len(partition),
            "training_error": series_model_service.training_error(fitted, series),
        }
        return model, series_model_service.model_to_payload(model), info

    def _fit_net(self, args, values: np.ndarray, cfg: TrainConfig) -> Tuple[NetModel, bytes, dict]:
        scaled, offset, scale = _to_unit(values)
        dim = args.dim or series_model_service.estimate_dimension(TimeSeries(scaled))
        series = TimeSeries(scaled, dim)
        weights = layered_net_service.init_weights(dim, args.hidden, dim, args.seed, bias=not args.no_bias)
        trained = layered_net_service.train(weights, series, cfg)
        info = {
            "model": "net",
            "dim": dim,
            "hidden": args.hidden,
            "training_error": layered_net_service.series_cost(trained, series),
        }
        return (trained, offset, scale), layered_net_service.weights_to_payload(trained, offset, scale), info

    @expose_command("fit", "Fit a one-step model to a CSV series and store it in an FNC1 container")
    @argument("input", help="CSV file, one sample per row")
    @argument("--column", type=int, default=0, help="CSV column holding the series")
    @argument("--skip-header", action="store_true", help="Skip the first CSV row")
    @argument("--model", choices=("hertz", "net"), default="hertz", help="Model family")
    @argument("--mode", choices=("constant", "linear"), default="linear", help="Hertz piece type")
    @argument("--min-count", type=int, default=None, help="Minimum samples per partition block")
    @argument("--sigma-floor", type=float, default=None, help="Lower bound on stored block variances")
    @argument("--method", choices=("gradient", "monte_carlo"), default="gradient", help="Trainer")
    @argument("--eta0", type=float, default=1.0, help="Initial step size")
    @argument("--max-iters", type=int, default=2000, help="Training iterations")
    @argument("--dim", type=int, default=0, help="Network vector length; 0 estimates it")
    @argument("--hidden", type=int, default=8, help="Network hidden units")
    @argument("--no-bias", action="store_true", help="Network without constant bias inputs")
    @log_execution(level="INFO", start_msg="ts fit Started", end_msg="ts fit Finished")
    def fit(self, args) -> int:
        output = self.require_output(args)
        args.min_count = args.min_count if args.min_count is not None else Config.min_count()
        args.sigma_floor = args.sigma_floor if args.sigma_floor is not None else Config.sigma_floor()
        values = self._read(args)
        cfg = TrainConfig(eta0=args.eta0, max_iters=args.max_iters, seed=args.seed, method=args.method)

        if args.model == "hertz":
            model, payload, info = self._fit_hertz(args, values, cfg)
        else:
            model, payload, info = self._fit_net(args, values, cfg)
        written = self.save_container(Container(MethodTag.NET, values.size, 0, payload), output)
        predicted, actual = one_step(model, values)
        self.emit(args, {"input": args.input, "output": str(output), **info, **_errors(predicted, actual),
                         "bytes": written})
        return EXIT_OK

    @expose_command("predict", "One-step predictions (or an iterated forecast) from a fitted series model")
    @argument("input", help="CSV file, one sample per row")
    @argument("--model", required=True, help="Container written by `ts fit`")
    @argument("--column", type=int, default=0)
    @argument("--skip-header", action="store_true")
    @argument("--steps", type=int, default=0, help="Iterate the fitted map this many steps past the last sample")
    @log_execution(level="INFO", start_msg="ts predict Started", end_msg="ts predict Finished")
    def predict(self, args) -> int:
        container = container_service.load_container(args.model)
        if container.method != MethodTag.NET:
            raise ContainerFormatError(f"ts predict needs a series container, got {container.method.name}")
        model = container_service.decode_payload(container)
        values = self._read(args)
        predicted, actual = one_step(model, values)
        record = {"input": args.input, "model": "hertz" if isinstance(model, PiecewiseModel) else "net",
                  "predictions": int(predicted.size), **_errors(predicted, actual)}

        if args.steps:
            if not isinstance(model, PiecewiseModel):
                raise DataError("--steps forecasting is only defined for the Hertz model")
            forecast = series_model_service.predict(model, float(values[-1]), args.steps)
            record["forecast_steps"] = args.steps
            out_values = forecast
        else:
            out_values = predicted
        if args.output:
            record["output"] = args.output
            image_io_service.write_csv_series(out_values, args.output)
        self.emit(args, record)
        return EXIT_OK
