from dataclasses import dataclass

from compressors.compressor_base import CompressorBase
from models.binary_image import BinaryImage
from models.container import Container, MethodTag
from models.errors import ContainerFormatError, DataError
from models.ifs import AnnealSchedule
from services import ifs_service
from utils.logger import get_logger, log_execution
from utils.rng import spawn_seeds

logger = get_logger("Compressors")


@dataclass
class IfsCompressorParams:
    """Parameters for IFS coding. block_side 0 searches one system for the whole image."""

    k: int = 3
    block_side: int = 0
    sweeps: int = 300
    beta0: float = 2000.0
    growth: float = 1.0005
    step: float = 1.0 / 64.0
    chains: int = 1
    metric: str = "hamming"
    warm_start: str = ""
    seed: int = 0

    def schedule(self) -> AnnealSchedule:
        return AnnealSchedule(self.beta0, self.growth, self.sweeps, self.step, self.seed)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "block_side": self.block_side,
            "sweeps": self.sweeps,
            "beta0": self.beta0,
            "growth": self.growth,
            "step": self.step,
            "chains": self.chains,
            "metric": self.metric,
            "warm_start": self.warm_start,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IfsCompressorParams":
        defaults = cls()
        params = cls(**{key: data.get(key, getattr(defaults, key)) for key in defaults.to_dict()})
        if params.chains < 1:
            raise DataError(f"chains must be >= 1, got {params.chains}")
        if params.block_side < 0:
            raise DataError(f"block_side must be >= 0, got {params.block_side}")
        if params.warm_start and params.warm_start not in ifs_service.REFERENCE_SYSTEMS:
            raise DataError(f"Unknown warm start system '{params.warm_start}'")
        return params


class IfsCompressor(CompressorBase):
    """Stores the map coefficients of an IFS whose attractor approximates the image."""

    @property
    def compressor_type(self) -> str:
        return "ifs"

    @property
    def method_tag(self) -> MethodTag:
        return MethodTag.IFS

    @property
    def display_name(self) -> str:
        return "IFS"

    @property
    def params_class(self) -> type:
        return IfsCompressorParams

    @log_execution(start_msg="IFS Encode Started", end_msg="IFS Encode Finished")
    def encode(self, image: BinaryImage, params: dict) -> Container:
        p = IfsCompressorParams.from_dict(params)
        schedule = p.schedule()

        if p.block_side:
            results = ifs_service.block_inverse_search(
                image, p.block_side, p.k, schedule, threads=self._threads, metric=p.metric
            )
            systems = [None if r is None else r.system for r in results]
            cols = -(-image.width // p.block_side)
            rows = -(-image.height // p.block_side)
            return Container(
                MethodTag.IFS,
                image.width,
                image.height,
                ifs_service.systems_to_payload(systems),
                p.block_side,
                cols * p.block_side - image.width,
                rows * p.block_side - image.height,
            )

        if image.set_count == 0:
            return Container(MethodTag.IFS, image.width, image.height, ifs_service.systems_to_payload([None]))
        init = ifs_service.REFERENCE_SYSTEMS[p.warm_start][0]() if p.warm_start else None
        if p.chains > 1:
            result = ifs_service.multi_chain_search(
                image, p.k, schedule, spawn_seeds(p.seed, p.chains), self._threads, init=init, metric=p.metric
            )
        else:
            result = ifs_service.inverse_search(image, p.k, schedule, init=init, metric=p.metric)
        logger.info(f"IFS whole-image search: best Δ={result.best_delta:.6f}")
        return Container(MethodTag.IFS, image.width, image.height, ifs_service.systems_to_payload([result.system]))

    @log_execution(start_msg="IFS Decode Started", end_msg="IFS Decode Finished")
    def decode(self, container: Container) -> BinaryImage:
        self.check_container(container)
        systems = ifs_service.systems_from_payload(container.payload)
        if container.block_side:
            return ifs_service.render_blocks(systems, container.block_side, container.width, container.height)
        if len(systems) != 1:
            raise ContainerFormatError(f"Whole-image IFS container holds {len(systems)} systems")
        if systems[0] is None:
            return BinaryImage.blank(container.width, container.height)
        return ifs_service.render_attractor(systems[0], container.width, container.height)
