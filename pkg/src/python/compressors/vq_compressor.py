from dataclasses import dataclass
from typing import Optional

from compressors.compressor_base import CompressorBase
from models.binary_image import BinaryImage
from models.codebook import Codebook, LearningSchedule
from models.container import Container, MethodTag
from models.errors import DataError, DimensionMismatchError
from services import autoencoder_service, vector_quantizer_service
from utils.logger import log_execution
from utils.rng import make_rng


@dataclass
class VqCompressorParams:
    """Parameters for Kohonen vector quantization of image blocks."""

    block_side: int = 20
    m: int = 16
    max_steps: int = 5000
    eta0: float = 0.5
    radius0: float = 0.0
    init: str = "sample"
    restarts: int = 1
    seed: int = 0

    def schedule(self) -> LearningSchedule:
        return LearningSchedule(
            max_steps=self.max_steps, eta0=self.eta0, seed=self.seed, radius0=self.radius0, init=self.init
        )

    def to_dict(self) -> dict:
        return {
            "block_side": self.block_side,
            "m": self.m,
            "max_steps": self.max_steps,
            "eta0": self.eta0,
            "radius0": self.radius0,
            "init": self.init,
            "restarts": self.restarts,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VqCompressorParams":
        defaults = cls()
        params = cls(**{key: data.get(key, getattr(defaults, key)) for key in defaults.to_dict()})
        if params.m < 1:
            raise DataError(f"m must be >= 1, got {params.m}")
        if params.restarts < 1:
            raise DataError(f"restarts must be >= 1, got {params.restarts}")
        return params


class VqCompressor(CompressorBase):
    """Stores a codebook of block vectors and one packed index per block."""

    @property
    def compressor_type(self) -> str:
        return "vq"

    @property
    def method_tag(self) -> MethodTag:
        return MethodTag.VQ

    @property
    def display_name(self) -> str:
        return "Vector quantizer"

    @property
    def params_class(self) -> type:
        return VqCompressorParams

    def train(self, image: BinaryImage, params: dict) -> Codebook:
        p = VqCompressorParams.from_dict(params)
        blocks = autoencoder_service.tile(image, p.block_side).blocks
        if p.restarts > 1:
            codebook, _ = vector_quantizer_service.multi_restart_train(
                blocks, p.m, p.schedule(), p.restarts, self._threads
            )
            return codebook
        return vector_quantizer_service.train(blocks, p.m, p.schedule())

    @log_execution(start_msg="VQ Encode Started", end_msg="VQ Encode Finished")
    def encode(self, image: BinaryImage, params: dict, model: Optional[Container] = None) -> Container:
        """Train a codebook on the image's blocks, or quantize against the codebook of `model`."""
        p = VqCompressorParams.from_dict(params)
        if model is None:
            block_side, codebook = p.block_side, self.train(image, params)
        else:
            self.check_container(model)
            block_side = model.block_side
            codebook, _ = vector_quantizer_service.codebook_from_payload(model.payload)
        tiling = autoencoder_service.tile(image, block_side)
        if codebook.d != tiling.block_length:
            raise DimensionMismatchError(f"Codebook dimension {codebook.d} does not match blocks of {tiling.block_length}")
        indices, _, _ = vector_quantizer_service.quantize_image(tiling.blocks, codebook, make_rng(p.seed))
        pad_right, pad_bottom = tiling.padding
        payload = vector_quantizer_service.codebook_to_payload(codebook, indices)
        return Container(MethodTag.VQ, image.width, image.height, payload, block_side, pad_right, pad_bottom)

    @log_execution(start_msg="VQ Decode Started", end_msg="VQ Decode Finished")
    def decode(self, container: Container) -> BinaryImage:
        self.check_container(container)
        if not container.block_side:
            raise DataError("VQ container has block_side 0")
        codebook, indices = vector_quantizer_service.codebook_from_payload(container.payload)
        tiling = autoencoder_service.empty_tiling(container.width, container.height, container.block_side)
        if indices.size != tiling.block_count:
            raise DimensionMismatchError(f"Container holds {indices.size} indices for {tiling.block_count} blocks")
        if codebook.d != tiling.block_length:
            raise DimensionMismatchError(f"Codebook dimension {codebook.d} does not match blocks of {tiling.block_length}")
        return autoencoder_service.untile(tiling, codebook.weights[indices])
