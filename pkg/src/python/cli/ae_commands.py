from cli.common import EXIT_OK, CommandGroup, overrides
from config import Config
from services import autoencoder_service, container_service, image_io_service
from services.image_metrics import hamming_distance
from utils.command_registry import argument, expose_command
from utils.logger import log_execution

_TRAIN_PARAMS = {
    "block_side": "block_side",
    "depth": "depth",
    "eta0": "eta0",
    "max_iters": "max_iters",
    "code_bits": "code_bits",
}


def _train_arguments(func):
    for flags, kwargs in reversed((
        (("--block-side",), {"type": int, "help": "Tile side in pixels (default FNC_BLOCK_SIDE, 20)"}),
        (("--depth",), {"type": int, "help": "Number of stacked halving stages"}),
        (("--eta0",), {"type": float, "help": "Initial learning rate"}),
        (("--max-iters",), {"type": int, "help": "Gradient steps per stage"}),
        (("--code-bits",), {"type": int, "choices": (64, 8), "help": "Stored code precision"}),
        (("--unshared",), {"action": "store_true", "help": "Train one network chain per block"}),
        (("--threshold",), {"type": float, "default": image_io_service.DEFAULT_THRESHOLD,
                            "help": "PGM binarization level"}),
    )):
        func = argument(*flags, **kwargs)(func)
    return func


class AutoencoderCommands(CommandGroup):
    name = "ae"
    help = "Block autoencoder coding"

    def _params(self, args) -> dict:
        params = {**overrides(args, _TRAIN_PARAMS), "seed": args.seed}
        params.setdefault("block_side", Config.block_side())
        if getattr(args, "unshared", False):
            params["shared"] = False
        return params

    def _summary(self, args, image, container, written) -> dict:
        compressor = self.compressor("ae", args)
        accounting = compressor.accounting(container)
        return {
            "method": "ae",
            "input": args.input,
            "output": args.output,
            "original_bytes": image.byte_size,
            "compressed_bytes": written,
            "exceeds_original": accounting.exceeds_original,
            "distortion": hamming_distance(compressor.decode(container), image),
        }

    @expose_command("train", "Train autoencoder stages on an image's blocks and store weights and codes")
    @argument("input", help="Input PBM/PGM image")
    @_train_arguments
    @log_execution(level="INFO", start_msg="ae train Started", end_msg="ae train Finished")
    def train(self, args) -> int:
        output = self.require_output(args)
        image = self.load_image(args.input, args)
        compressor = self.compressor("ae", args)
        container = compressor.encode(image, self.checked_params(compressor, self._params(args)))
        written = self.save_container(container, output)
        self.emit(args, self._summary(args, image, container, written))
        return EXIT_OK

    @expose_command("encode", "Encode an image, reusing the weights of a trained container when --model is given")
    @argument("input", help="Input PBM/PGM image")
    @argument("--model", help="Container from `ae train` whose weights are reused")
    @_train_arguments
    @log_execution(level="INFO", start_msg="ae encode Started", end_msg="ae encode Finished")
    def encode(self, args) -> int:
        output = self.require_output(args)
        image = self.load_image(args.input, args)
        model = container_service.load_container(args.model) if args.model else None
        compressor = self.compressor("ae", args)
        container = compressor.encode(image, self.checked_params(compressor, self._params(args)), model=model)
        written = self.save_container(container, output)
        self.emit(args, self._summary(args, image, container, written))
        return EXIT_OK

    @expose_command("decode", "Decode an autoencoder container to a PBM image")
    @argument("input", help="FNC1 container")
    @argument("--pbm-mode", choices=("P1", "P4"), default="P4")
    @log_execution(level="INFO", start_msg="ae decode Started", end_msg="ae decode Finished")
    def decode(self, args) -> int:
        self.require_output(args)
        image = self.compressor("ae", args).decode(container_service.load_container(args.input))
        written = self.save_image(image, args)
        self.emit(args, {"method": "ae", "output": args.output, "width": image.width,
                         "height": image.height, "bytes": written})
        return EXIT_OK

    @expose_command("report", "Byte accounting of an autoencoder container against the raw bit raster")
    @argument("input", help="FNC1 container")
    @argument("--image", help="Original image, to add the reconstruction distortion")
    @argument("--threshold", type=float, default=image_io_service.DEFAULT_THRESHOLD)
    @log_execution(level="INFO", start_msg="ae report Started", end_msg="ae report Finished")
    def report(self, args) -> int:
        container = container_service.load_container(args.input)
        compressor = self.compressor("ae", args)
        accounting = compressor.accounting(container)
        record = {"method": "ae", **accounting.to_dict(), "ratio": accounting.ratio}
        if args.image:
            image = self.load_image(args.image, args)
            decoded = compressor.decode(container)
            record["distortion"] = hamming_distance(decoded, image)
            per_block = autoencoder_service.per_block_hamming(
                autoencoder_service.tile(image, container.block_side),
                autoencoder_service.tile(decoded, container.block_side).blocks,
            )
            record["worst_block_distortion"] = float(per_block.max())
        self.emit(args, record)
        return EXIT_OK
