"""
FNC1 container: magic, version, method byte, width, height, block side,
right/bottom padding and payload length, all little-endian, then the payload.
"""
import os
import struct
from pathlib import Path
from typing import Any, Union

from models.container import MAGIC, VERSION, Container, MethodTag
from models.errors import ContainerFormatError
from services import autoencoder_service, ifs_service, layered_net_service, series_model_service
from services import vector_quantizer_service
from utils.fs import atomic_write_bytes
from utils.logger import get_logger, log_execution

logger = get_logger("Container")

HEADER = struct.Struct("<4sBBIIHHHQ")


def write_container(container: Container) -> bytes:
    header = HEADER.pack(
        MAGIC,
        container.version,
        int(container.method),
        container.width,
        container.height,
        container.block_side,
        container.pad_right,
        container.pad_bottom,
        container.payload_length,
    )
    return header + container.payload


def read_container(data: bytes) -> Container:
    """
    Raises:
        ContainerFormatError: foreign magic, unsupported version, unknown method,
            or a payload length that disagrees with the bytes present
    """
    if len(data) < HEADER.size:
        raise ContainerFormatError(f"Container is {len(data)} bytes, shorter than its {HEADER.size}-byte header")
    magic, version, method, width, height, block_side, pad_right, pad_bottom, length = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ContainerFormatError(f"Foreign magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ContainerFormatError(f"Unsupported container version {version}")
    tag = MethodTag.parse(method)
    actual = len(data) - HEADER.size
    if length != actual:
        raise ContainerFormatError(f"Header declares {length} payload bytes, found {actual}")
    return Container(tag, width, height, bytes(data[HEADER.size:]), block_side, pad_right, pad_bottom, version)


def decode_payload(container: Container) -> Any:
    """Hand the payload to the module that owns the method tag."""
    if container.method == MethodTag.IFS:
        return ifs_service.systems_from_payload(container.payload)
    if container.method == MethodTag.AE:
        return autoencoder_service.stack_from_payload(container.payload)
    if container.method == MethodTag.VQ:
        return vector_quantizer_service.codebook_from_payload(container.payload)
    # series payloads carry their own kind byte
    if not container.payload:
        raise ContainerFormatError("Empty series payload")
    kind = container.payload[0]
    if kind == series_model_service.PAYLOAD_KIND_HERTZ:
        return series_model_service.model_from_payload(container.payload)
    if kind == layered_net_service.PAYLOAD_KIND_NET:
        return layered_net_service.weights_from_payload(container.payload)
    raise ContainerFormatError(f"Unknown series payload kind {kind}")


@log_execution(start_msg="Container Save Started", end_msg="Container Save Completed")
def save_container(container: Container, path: Union[str, Path]) -> int:
    written = atomic_write_bytes(path, write_container(container))
    logger.info(f"Wrote {container.method.name} container {path} ({written} bytes)")
    return written


@log_execution(start_msg="Container Load Started", end_msg="Container Load Completed")
def load_container(path: Union[str, Path]) -> Container:
    if not os.path.exists(path):
        logger.error(f"Container Load Error: File not found at {path}")
        raise FileNotFoundError(f"File not found: {path}")
    return read_container(Path(path).read_bytes())
