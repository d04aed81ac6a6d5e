from cli.common import EXIT_OK, CommandGroup, overrides
from config import Config
from models.binary_image import BinaryImage
from services import container_service, image_io_service, vector_quantizer_service
from services.image_metrics import hamming_distance
from utils.command_registry import argument, expose_command
from utils.logger import log_execution

_TRAIN_PARAMS = {
    "block_side": "block_side",
    "m": "m",
    "max_steps": "max_steps",
    "eta0": "eta0",
    "radius0": "radius0",
    "init": "init",
    "restarts": "restarts",
}


def _train_arguments(func):
    for flags, kwargs in reversed((
        (("--block-side",), {"type": int, "help": "Tile side in pixels (default FNC_BLOCK_SIDE, 20)"}),
        (("--m",), {"type": int, "help": "Codebook size"}),
        (("--max-steps",), {"type": int, "help": "Online learning steps"}),
        (("--eta0",), {"type": float, "help": "Initial learning rate in (0, 1]"}),
        (("--radius0",), {"type": float, "help": "Initial neighbourhood radius; 0 = winner only"}),
        (("--init",), {"choices": ("sample", "plusplus"), "help": "Codebook initialization"}),
        (("--restarts",), {"type": int, "help": "Independent trainings; lowest distortion wins"}),
        (("--threshold",), {"type": float, "default": image_io_service.DEFAULT_THRESHOLD,
                            "help": "PGM binarization level"}),
    )):
        func = argument(*flags, **kwargs)(func)
    return func


class VqCommands(CommandGroup):
    name = "vq"
    help = "Kohonen vector quantization of image blocks"

    def _params(self, args) -> dict:
        params = {**overrides(args, _TRAIN_PARAMS), "seed": args.seed}
        params.setdefault("block_side", Config.block_side())
        return params

    def _encode(self, args, model=None) -> int:
        output = self.require_output(args)
        image = self.load_image(args.input, args)
        compressor = self.compressor("vq", args)
        container = compressor.encode(image, self.checked_params(compressor, self._params(args)), model=model)
        written = self.save_container(container, output)
        self.emit(args, {
            "method": "vq",
            "input": args.input,
            "output": str(output),
            "original_bytes": image.byte_size,
            "compressed_bytes": written,
            "distortion": hamming_distance(compressor.decode(container), image),
        })
        return EXIT_OK

    @expose_command("train", "Train a codebook on an image's blocks and store it with the block indices")
    @argument("input", help="Input PBM/PGM image")
    @_train_arguments
    @log_execution(level="INFO", start_msg="vq train Started", end_msg="vq train Finished")
    def train(self, args) -> int:
        return self._encode(args)

    @expose_command("encode", "Quantize an image's blocks, reusing the codebook of --model when given")
    @argument("input", help="Input PBM/PGM image")
    @argument("--model", help="Container from `vq train` whose codebook is reused")
    @_train_arguments
    @log_execution(level="INFO", start_msg="vq encode Started", end_msg="vq encode Finished")
    def encode(self, args) -> int:
        model = container_service.load_container(args.model) if args.model else None
        return self._encode(args, model)

    @expose_command("decode", "Decode a VQ container to a PBM image")
    @argument("input", help="FNC1 container")
    @argument("--pbm-mode", choices=("P1", "P4"), default="P4")
    @log_execution(level="INFO", start_msg="vq decode Started", end_msg="vq decode Finished")
    def decode(self, args) -> int:
        self.require_output(args)
        image = self.compressor("vq", args).decode(container_service.load_container(args.input))
        written = self.save_image(image, args)
        self.emit(args, {"method": "vq", "output": args.output, "width": image.width,
                         "height": image.height, "bytes": written})
        return EXIT_OK

    @expose_command("report", "Codebook statistics and compression ratio of a VQ container")
    @argument("input", help="FNC1 container")
    @argument("--image", help="Original image, to add the reconstruction distortion")
    @argument("--threshold", type=float, default=image_io_service.DEFAULT_THRESHOLD)
    @log_execution(level="INFO", start_msg="vq report Started", end_msg="vq report Finished")
    def report(self, args) -> int:
        container = container_service.load_container(args.input)
        compressor = self.compressor("vq", args)
        compressor.check_container(container)
        codebook, indices = vector_quantizer_service.codebook_from_payload(container.payload)
        bits = vector_quantizer_service.index_bits(codebook.m)
        original = BinaryImage.blank(container.width, container.height).byte_size
        compressed = container_service.HEADER.size + container.payload_length
        record = {
            "method": "vq",
            "m": codebook.m,
            "d": codebook.d,
            "blocks": int(indices.size),
            "index_bits": bits,
            "block_ratio": codebook.d / bits,
            "original_bytes": original,
            "compressed_bytes": compressed,
            "ratio": original / compressed,
        }
        if args.image:
            record["distortion"] = hamming_distance(compressor.decode(container), self.load_image(args.image, args))
        self.emit(args, record)
        return EXIT_OK
