from typing import Dict, Type
from compressors.compressor_base import CompressorBase
from compressors.ifs_compressor import IfsCompressor
from compressors.autoencoder_compressor import AutoencoderCompressor
from compressors.vq_compressor import VqCompressor

_compressor_registry: Dict[str, Type[CompressorBase]] = {}


def register_compressor(compressor_type: str, compressor_class: Type[CompressorBase]) -> None:
    """Register a compressor class."""
    _compressor_registry[compressor_type] = compressor_class


def get_compressor(compressor_type: str) -> Type[CompressorBase] | None:
    """Get a compressor class by type."""
    return _compressor_registry.get(compressor_type)


def get_all_compressor_types() -> list[str]:
    """Get all registered compressor types, in registration order."""
    return list(_compressor_registry.keys())


register_compressor("ifs", IfsCompressor)
register_compressor("ae", AutoencoderCompressor)
register_compressor("vq", VqCompressor)
