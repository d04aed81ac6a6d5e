from cli.common import EXIT_OK, CommandGroup, overrides
from models.errors import UsageError
from services import container_service, ifs_service, image_io_service
from services.image_metrics import hamming_distance
from utils.command_registry import argument, expose_command
from utils.logger import log_execution

_ENCODE_PARAMS = {
    "k": "k",
    "block_side": "block_side",
    "sweeps": "sweeps",
    "beta0": "beta0",
    "growth": "growth",
    "step": "step",
    "chains": "chains",
    "metric": "metric",
    "warm_start": "warm_start",
}


class IfsCommands(CommandGroup):
    name = "ifs"
    help = "Fractal (IFS) coding by annealed inverse search"

    @expose_command("encode", "Search IFS coefficients for a PBM/PGM image and write an FNC1 container")
    @argument("input", help="Input PBM/PGM image")
    @argument("--maps", "--k", dest="k", type=int, help="Maps per system (default 3)")
    @argument("--block-side", type=int, help="Search one system per tile of this side; 0 = whole image")
    @argument("--sweeps", type=int, help="Annealing sweeps per chain")
    @argument("--beta0", type=float, help="Initial inverse temperature")
    @argument("--growth", type=float, help="Per-sweep inverse temperature growth")
    @argument("--step", type=float, help="Coefficient grid step as a fraction of each range")
    @argument("--chains", type=int, help="Independent chains; the best one is kept")
    @argument("--metric", choices=("hamming", "hausdorff"), help="Image distance for the search cost")
    @argument("--warm-start", choices=tuple(ifs_service.REFERENCE_SYSTEMS), help="Start from a reference system")
    @argument("--threshold", type=float, default=image_io_service.DEFAULT_THRESHOLD, help="PGM binarization level")
    @log_execution(level="INFO", start_msg="ifs encode Started", end_msg="ifs encode Finished")
    def encode(self, args) -> int:
        output = self.require_output(args)
        image = self.load_image(args.input, args)
        compressor = self.compressor("ifs", args)
        params = self.checked_params(compressor, {**overrides(args, _ENCODE_PARAMS), "seed": args.seed})
        container = compressor.encode(image, params)
        written = self.save_container(container, output)
        decoded = compressor.decode(container)
        self.emit(args, {
            "method": "ifs",
            "input": args.input,
            "output": str(output),
            "original_bytes": image.byte_size,
            "compressed_bytes": written,
            "distortion": hamming_distance(decoded, image),
        })
        return EXIT_OK

    @expose_command("decode", "Render the attractor(s) stored in an IFS container to a PBM image")
    @argument("input", help="FNC1 container written by `ifs encode`")
    @argument("--pbm-mode", choices=("P1", "P4"), default="P4", help="Output bitmap flavour")
    @log_execution(level="INFO", start_msg="ifs decode Started", end_msg="ifs decode Finished")
    def decode(self, args) -> int:
        self.require_output(args)
        container = container_service.load_container(args.input)
        image = self.compressor("ifs", args).decode(container)
        written = self.save_image(image, args)
        self.emit(args, {"method": "ifs", "output": args.output, "width": image.width,
                         "height": image.height, "bytes": written})
        return EXIT_OK

    @expose_command("render", "Render a reference system or a container's system by chaos game or union iteration")
    @argument("--system", choices=tuple(ifs_service.REFERENCE_SYSTEMS), help="Reference system to render")
    @argument("--container", help="Whole-image IFS container to render instead")
    @argument("--method", choices=("chaos", "deterministic"), default="chaos", help="Rendering scheme")
    @argument("--width", type=int, default=256)
    @argument("--height", type=int, default=256)
    @argument("--size", type=int, help="Square output side; overrides --width and --height")
    @argument("--iterations", type=int, default=200_000, help="Chaos game steps")
    @argument("--burn-in", type=int, default=100, help="Chaos game steps discarded before plotting")
    @argument("--pbm-mode", choices=("P1", "P4"), default="P4")
    @log_execution(level="INFO", start_msg="ifs render Started", end_msg="ifs render Finished")
    def render(self, args) -> int:
        self.require_output(args)
        if (args.system is None) == (args.container is None):
            raise UsageError("ifs render: give exactly one of --system or --container")
        if args.size is not None:
            args.width = args.height = args.size
        if args.system is not None:
            factory, viewport = ifs_service.REFERENCE_SYSTEMS[args.system]
            system = factory()
        else:
            container = container_service.load_container(args.container)
            self.compressor("ifs", args).check_container(container)
            systems = ifs_service.systems_from_payload(container.payload)
            if container.block_side or len(systems) != 1 or systems[0] is None:
                raise UsageError("ifs render: --container must hold one whole-image system; use `ifs decode`")
            system, viewport = systems[0], ifs_service.UNIT_VIEWPORT

        if args.method == "chaos":
            image = ifs_service.chaos_game(
                system, args.iterations, args.burn_in, viewport, args.width, args.height, args.seed
            )
        else:
            image = ifs_service.render_attractor(system, args.width, args.height, viewport)
        written = self.save_image(image, args)
        self.emit(args, {"method": args.method, "output": args.output, "set_pixels": image.set_count,
                         "bytes": written})
        return EXIT_OK
