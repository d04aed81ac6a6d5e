from dataclasses import dataclass
from typing import Optional

from compressors.compressor_base import CompressorBase
from models.binary_image import BinaryImage
from models.container import Container, MethodTag
from models.errors import DataError, DimensionMismatchError
from models.tiling import AutoencoderStack, ByteAccounting
from models.time_series import TrainConfig
from services import autoencoder_service
from services.container_service import HEADER
from utils.logger import log_execution


@dataclass
class AutoencoderCompressorParams:
    """Parameters for block autoencoder coding."""

    block_side: int = 20
    depth: int = 1
    eta0: float = 1.0
    max_iters: int = 300
    shared: bool = True
    code_bits: int = 64
    seed: int = 0

    def train_config(self) -> TrainConfig:
        return TrainConfig(eta0=self.eta0, max_iters=self.max_iters, seed=self.seed)

    def to_dict(self) -> dict:
        return {
            "block_side": self.block_side,
            "depth": self.depth,
            "eta0": self.eta0,
            "max_iters": self.max_iters,
            "shared": self.shared,
            "code_bits": self.code_bits,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AutoencoderCompressorParams":
        defaults = cls()
        params = cls(**{key: data.get(key, getattr(defaults, key)) for key in defaults.to_dict()})
        if params.code_bits not in autoencoder_service.CODE_BITS:
            raise DataError(f"code_bits must be one of {autoencoder_service.CODE_BITS}, got {params.code_bits}")
        return params


class AutoencoderCompressor(CompressorBase):
    """Stores trained stage weights plus the innermost codes of every block."""

    @property
    def compressor_type(self) -> str:
        return "ae"

    @property
    def method_tag(self) -> MethodTag:
        return MethodTag.AE

    @property
    def display_name(self) -> str:
        return "Autoencoder"

    @property
    def params_class(self) -> type:
        return AutoencoderCompressorParams

    def train(self, image: BinaryImage, params: dict) -> AutoencoderStack:
        p = AutoencoderCompressorParams.from_dict(params)
        tiling = autoencoder_service.tile(image, p.block_side)
        return autoencoder_service.iterate_stages(tiling, p.depth, p.train_config(), p.shared, self._threads)

    def pack(self, image: BinaryImage, stack: AutoencoderStack, block_side: int, code_bits: int) -> Container:
        tiling = autoencoder_service.tile(image, block_side)
        pad_right, pad_bottom = tiling.padding
        payload = autoencoder_service.stack_to_payload(stack, code_bits)
        return Container(MethodTag.AE, image.width, image.height, payload, block_side, pad_right, pad_bottom)

    @log_execution(start_msg="Autoencoder Encode Started", end_msg="Autoencoder Encode Finished")
    def encode(self, image: BinaryImage, params: dict, model: Optional[Container] = None) -> Container:
        """Train a fresh stack, or reuse the weights of `model` and only compute new codes."""
        p = AutoencoderCompressorParams.from_dict(params)
        if model is None:
            return self.pack(image, self.train(image, params), p.block_side, p.code_bits)

        self.check_container(model)
        trained, code_bits = autoencoder_service.stack_from_payload(model.payload)
        tiling = autoencoder_service.tile(image, model.block_side)
        if not trained.shared and len(trained.stages) != tiling.block_count:
            raise DimensionMismatchError(
                f"Per-block model has {len(trained.stages)} chains, image has {tiling.block_count} blocks"
            )
        codes = autoencoder_service.encode_stack(trained, tiling)
        stack = AutoencoderStack(trained.stages, codes, trained.shared)
        return self.pack(image, stack, model.block_side, code_bits)

    @log_execution(start_msg="Autoencoder Decode Started", end_msg="Autoencoder Decode Finished")
    def decode(self, container: Container) -> BinaryImage:
        self.check_container(container)
        if not container.block_side:
            raise DataError("Autoencoder container has block_side 0")
        stack, _ = autoencoder_service.stack_from_payload(container.payload)
        tiling = autoencoder_service.empty_tiling(container.width, container.height, container.block_side)
        if stack.codes.shape[0] != tiling.block_count:
            raise DimensionMismatchError(
                f"Container holds {stack.codes.shape[0]} codes for {tiling.block_count} blocks"
            )
        return autoencoder_service.reconstruct(stack, tiling)

    def accounting(self, container: Container) -> ByteAccounting:
        self.check_container(container)
        stack, code_bits = autoencoder_service.stack_from_payload(container.payload)
        original = BinaryImage.blank(container.width, container.height).byte_size
        header = HEADER.size + (container.payload_length - self._body_bytes(stack, code_bits))
        return autoencoder_service.byte_accounting(stack, original, code_bits, header)

    @staticmethod
    def _body_bytes(stack: AutoencoderStack, code_bits: int) -> int:
        weights = sum(stage.weights.parameter_count * 8 for chain in stack.stages for stage in chain)
        return weights + stack.codes.size * code_bits // 8
