import os
import sys
import time
from pathlib import Path
from typing import List

from cli.common import EXIT_OK, CommandGroup
from compressors import get_all_compressor_types
from config import Config
from models.errors import UsageError
from models.run_report import RunReport, format_jsonl, format_table
from services import container_service, image_io_service
from services.image_metrics import hamming_distance
from utils.command_registry import argument, expose_command
from utils.fs import atomic_write_text
from utils.logger import get_logger, log_execution

logger = get_logger("CLI")


class BenchCommands(CommandGroup):
    name = "bench"
    help = "Side-by-side compression benchmarks"

    def _params(self, method: str, args) -> dict:
        params = {"seed": args.seed}
        if method == "ifs":
            params.update(sweeps=args.ifs_sweeps, k=args.ifs_k)
            if args.ifs_block_side:
                params["block_side"] = args.ifs_block_side
            if args.ifs_warm_start:
                params["warm_start"] = args.ifs_warm_start
        else:
            params["block_side"] = args.block_side if args.block_side is not None else Config.block_side()
        if method == "ae":
            params.update(max_iters=args.ae_iters, depth=args.ae_depth)
        elif method == "vq":
            params.update(m=args.vq_m, max_steps=args.vq_steps)
        return params

    @expose_command("compare", "Run every compressor on one image and print a RunReport per method")
    @argument("input", help="Input PBM/PGM image")
    @argument("--methods", nargs="+", choices=tuple(get_all_compressor_types()),
              default=list(get_all_compressor_types()), help="Compressors to run, in report order")
    @argument("--block-side", type=int, help="Tile side for ae and vq (default FNC_BLOCK_SIDE, 20)")
    @argument("--ifs-block-side", type=int, default=0, help="Tile side for ifs; 0 = whole image")
    @argument("--ifs-k", type=int, default=3)
    @argument("--ifs-sweeps", type=int, default=300)
    @argument("--ifs-warm-start", default="", help="Reference system to start the IFS search from")
    @argument("--ae-iters", type=int, default=300)
    @argument("--ae-depth", type=int, default=1)
    @argument("--vq-m", type=int, default=16)
    @argument("--vq-steps", type=int, default=5000)
    @argument("--threshold", type=float, default=image_io_service.DEFAULT_THRESHOLD)
    @argument("--report", help="Also write the report to this file")
    @argument("--no-timing", action="store_true", help="Report wall_time as 0 so reports are byte-reproducible")
    @log_execution(level="INFO", start_msg="bench compare Started", end_msg="bench compare Finished")
    def compare(self, args) -> int:
        image = self.load_image(args.input, args)
        out_dir = Path(args.output) if args.output else None
        if out_dir is not None and out_dir.exists() and not out_dir.is_dir():
            raise UsageError(f"bench compare: --output {out_dir} must be a directory")

        reports: List[RunReport] = []
        stem = Path(args.input).stem
        for method in args.methods:
            compressor = self.compressor(method, args)
            params = self.checked_params(compressor, self._params(method, args))
            started = time.perf_counter()
            container = compressor.encode(image, params)
            encoded = container_service.write_container(container)
            if out_dir is not None:
                path = out_dir / f"{stem}.{method}.fnc"
                container_service.save_container(container, path)
                compressed = os.path.getsize(path)
                decoded = compressor.decode(container_service.load_container(path))
            else:
                compressed = len(encoded)
                decoded = compressor.decode(container_service.read_container(encoded))
            elapsed = 0.0 if args.no_timing else time.perf_counter() - started

            report = RunReport.build(
                method,
                image.byte_size,
                compressed,
                metric="hamming",
                distortion=hamming_distance(decoded, image),
                wall_time=elapsed,
                seed=args.seed,
                config=compressor.params_class.from_dict(params).to_dict(),
            )
            logger.info(f"{method}: {report.compressed_bytes} B, ratio {report.ratio:.3f}, Δ={report.distortion:.4f}")
            reports.append(report)

        text = format_jsonl(reports) if args.format == "jsonl" else format_table(reports)
        sys.stdout.write(text)
        if args.report:
            atomic_write_text(args.report, text)
        return EXIT_OK
